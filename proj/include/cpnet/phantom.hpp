#pragma once

// Procedural dual-phase kidney phantom generator. Each phantom is an
// ellipsoid with a cortical shell, interior medullary wedges and thin
// cortical columns between them; CTA/CTU intensities are rendered from the
// label grid so that a fixed config reproduces bit-identical output.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpnet/common.hpp"
#include "cpnet/volume.hpp"

namespace cpnet {

struct IntensityEntry {
  double mean = 0.0;
  double sigma = -1.0;  // < 0: inherit PhantomConfig::noise_sigma
};

struct DeformConfig {
  double max_rotation_deg = 10.0;
  double max_scale_frac = 0.10;
};

struct PhantomConfig {
  Shape3 size = {64, 64, 64};
  std::uint64_t seed = 0;
  int pyramids_min = 6;
  int pyramids_max = 10;
  double cortex_thickness_vox = 3.0;
  // Intensity table per (phase, class), class order {background, cortex, medulla}.
  std::array<IntensityEntry, 3> cta = {{{40.0}, {180.0}, {100.0}}};
  std::array<IntensityEntry, 3> ctu = {{{40.0}, {110.0}, {150.0}}};
  double noise_sigma = 5.0;
  DeformConfig deform;

  double sigma_for(const IntensityEntry& e) const {
    return e.sigma < 0.0 ? noise_sigma : e.sigma;
  }
};

inline void validate(const PhantomConfig& cfg) {
  if (cfg.size.d <= 0 || cfg.size.h <= 0 || cfg.size.w <= 0)
    throw ValidationError("phantom size must be positive");
  if (cfg.pyramids_min < 1 || cfg.pyramids_max < cfg.pyramids_min)
    throw ValidationError("pyramid count range is empty");
  const int min_dim = std::min({cfg.size.d, cfg.size.h, cfg.size.w});
  if (!(cfg.cortex_thickness_vox > 0.0) || cfg.cortex_thickness_vox >= min_dim / 4.0)
    throw ValidationError("cortex thickness must be in (0, min(dims)/4)");
  if (cfg.noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");
  for (const auto& e : cfg.cta)
    if (e.sigma >= 0.0 && !(e.sigma >= 0.0)) throw ValidationError("bad sigma");
  if (cfg.deform.max_rotation_deg < 0.0 || cfg.deform.max_scale_frac < 0.0 ||
      cfg.deform.max_scale_frac >= 1.0)
    throw ValidationError("deform parameters out of range");
}

inline void to_json(nlohmann::json& j, const IntensityEntry& e) {
  j = nlohmann::json{{"mean", e.mean}, {"sigma", e.sigma}};
}
inline void from_json(const nlohmann::json& j, IntensityEntry& e) {
  j.at("mean").get_to(e.mean);
  if (j.contains("sigma")) j.at("sigma").get_to(e.sigma);
}
inline void to_json(nlohmann::json& j, const DeformConfig& d) {
  j = nlohmann::json{{"max_rotation_deg", d.max_rotation_deg},
                     {"max_scale_frac", d.max_scale_frac}};
}
inline void from_json(const nlohmann::json& j, DeformConfig& d) {
  if (j.contains("max_rotation_deg")) j.at("max_rotation_deg").get_to(d.max_rotation_deg);
  if (j.contains("max_scale_frac")) j.at("max_scale_frac").get_to(d.max_scale_frac);
}
inline void to_json(nlohmann::json& j, const PhantomConfig& c) {
  j = nlohmann::json{{"size", {c.size.d, c.size.h, c.size.w}},
                     {"seed", c.seed},
                     {"pyramids_min", c.pyramids_min},
                     {"pyramids_max", c.pyramids_max},
                     {"cortex_thickness_vox", c.cortex_thickness_vox},
                     {"cta", c.cta},
                     {"ctu", c.ctu},
                     {"noise_sigma", c.noise_sigma},
                     {"deform", c.deform}};
}
inline void from_json(const nlohmann::json& j, PhantomConfig& c) {
  if (j.contains("size")) {
    const auto& s = j.at("size");
    c.size = {s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
  }
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("pyramids_min")) j.at("pyramids_min").get_to(c.pyramids_min);
  if (j.contains("pyramids_max")) j.at("pyramids_max").get_to(c.pyramids_max);
  if (j.contains("cortex_thickness_vox")) j.at("cortex_thickness_vox").get_to(c.cortex_thickness_vox);
  if (j.contains("cta")) j.at("cta").get_to(c.cta);
  if (j.contains("ctu")) j.at("ctu").get_to(c.ctu);
  if (j.contains("noise_sigma")) j.at("noise_sigma").get_to(c.noise_sigma);
  if (j.contains("deform")) j.at("deform").get_to(c.deform);
}

struct PhantomTriple {
  Volume cta;
  Volume ctu;
  LabelVolume truth;
};

namespace phantom_detail {

struct Mat3 {
  double m[3][3];
};

// Rotation about z, y, x axes composed as Rz * Ry * Rx; angles in radians.
inline Mat3 rotation_matrix(double az, double ay, double ax) {
  const double cz = std::cos(az), sz = std::sin(az);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cx = std::cos(ax), sx = std::sin(ax);
  Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  auto mul = [](const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += a.m[i][k] * b.m[k][j];
        r.m[i][j] = s;
      }
    return r;
  };
  return mul(mul(rz, ry), rx);
}

}  // namespace phantom_detail

inline PhantomTriple generate_phantom(const PhantomConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);

  const int n_pyramids =
      static_cast<int>(rng.uniform_int(cfg.pyramids_min, cfg.pyramids_max));
  const double phi0 = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double rot_max = cfg.deform.max_rotation_deg * 3.14159265358979323846 / 180.0;
  const double az = rng.uniform(-rot_max, rot_max);
  const double ay = rng.uniform(-rot_max, rot_max);
  const double ax = rng.uniform(-rot_max, rot_max);
  const double f = cfg.deform.max_scale_frac;
  const double sz = 1.0 + rng.uniform(-f, f);
  const double sy = 1.0 + rng.uniform(-f, f);
  const double sx = 1.0 + rng.uniform(-f, f);

  const auto rot = phantom_detail::rotation_matrix(az, ay, ax);
  const Shape3 dims = cfg.size;
  const double cz0 = (dims.d - 1) / 2.0;
  const double cy0 = (dims.h - 1) / 2.0;
  const double cx0 = (dims.w - 1) / 2.0;

  // Base semi-axes in voxels, ordered (z, y, x); deliberately unequal so the
  // kidney is oblong.
  const double semi_z = 0.36 * dims.d * sz;
  const double semi_y = 0.31 * dims.h * sy;
  const double semi_x = 0.26 * dims.w * sx;
  const double min_semi = std::min({semi_z, semi_y, semi_x});
  if (cfg.cortex_thickness_vox >= min_semi)
    throw GeometryError("cortical shell exceeds ellipsoid (thickness " +
                        std::to_string(cfg.cortex_thickness_vox) + " vs min semi-axis " +
                        std::to_string(min_semi) + ")");

  LabelVolume truth = make_label_volume(dims, kBackground);
  const double half_col = cfg.cortex_thickness_vox / 2.0;
  const double pi = 3.14159265358979323846;

  for (int z = 0; z < dims.d; ++z) {
    for (int y = 0; y < dims.h; ++y) {
      for (int x = 0; x < dims.w; ++x) {
        const double pz = z - cz0, py = y - cy0, px = x - cx0;
        // Into canonical frame: undo rotation, then undo anisotropic scale.
        // Row vectors of R act as R^T columns; p is (x,y,z) in world order.
        const double qx = rot.m[0][0] * px + rot.m[1][0] * py + rot.m[2][0] * pz;
        const double qy = rot.m[0][1] * px + rot.m[1][1] * py + rot.m[2][1] * pz;
        const double qz = rot.m[0][2] * px + rot.m[1][2] * py + rot.m[2][2] * pz;

        const double nx = qx / semi_x, ny = qy / semi_y, nz = qz / semi_z;
        const double rho2 = nx * nx + ny * ny + nz * nz;
        if (rho2 >= 1.0) continue;  // background
        const double rho = std::sqrt(rho2);

        // Approximate metric distance to the ellipsoid surface along the ray
        // through the center (exact for spheres).
        const double radius_here = std::sqrt(qx * qx + qy * qy + qz * qz);
        const double dir_radius = rho > 1e-12 ? radius_here / rho : min_semi;
        const double boundary_dist = (1.0 - rho) * dir_radius;

        if (boundary_dist <= cfg.cortex_thickness_vox) {
          truth.at(z, y, x) = kCortex;
          continue;
        }

        // Interior: medullary wedges split by cortical column planes through
        // the canonical z axis.
        const double rxy = std::hypot(qx, qy);
        const double phi = std::atan2(qy, qx);
        double column_dist = rxy;  // distance collapses to rxy at the axis
        for (int k = 0; k < n_pyramids; ++k) {
          const double phik = phi0 + 2.0 * pi * k / n_pyramids;
          const double d = std::fabs(rxy * std::sin(phi - phik));
          column_dist = std::min(column_dist, d);
        }
        truth.at(z, y, x) = column_dist <= half_col ? kCortex : kMedulla;
      }
    }
  }

  const std::size_t n = truth.labels.size();
  Volume cta = make_volume(dims);
  Volume ctu = make_volume(dims);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = cfg.cta[truth.labels[i]];
    cta.voxels[i] = static_cast<float>(e.mean + cfg.sigma_for(e) * rng.normal());
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = cfg.ctu[truth.labels[i]];
    ctu.voxels[i] = static_cast<float>(e.mean + cfg.sigma_for(e) * rng.normal());
  }

  return {std::move(cta), std::move(ctu), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Dataset generation and the JSON manifest consumed by the harness.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string cta;              // stem relative to the manifest directory
  std::string ctu;
  std::optional<std::string> truth;
};

struct Manifest {
  std::uint64_t master_seed = 0;
  int n_train = 0, n_test = 0, n_labeled = 0;
  PhantomConfig phantom;
  std::vector<ManifestEntry> train_labeled;
  std::vector<ManifestEntry> train_unlabeled;
  std::vector<ManifestEntry> test;
  std::filesystem::path root;   // directory the manifest was loaded from

  std::filesystem::path resolve(const std::string& stem) const { return root / stem; }
};

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = nlohmann::json{{"id", e.id}, {"cta", e.cta}, {"ctu", e.ctu}};
  if (e.truth) j["truth"] = *e.truth;
}
inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
  j.at("id").get_to(e.id);
  j.at("cta").get_to(e.cta);
  j.at("ctu").get_to(e.ctu);
  if (j.contains("truth")) e.truth = j.at("truth").get<std::string>();
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "cpnet-manifest-v1";
  j["master_seed"] = m.master_seed;
  j["n_train"] = m.n_train;
  j["n_test"] = m.n_test;
  j["n_labeled"] = m.n_labeled;
  j["phantom"] = m.phantom;
  j["train_labeled"] = m.train_labeled;
  j["train_unlabeled"] = m.train_unlabeled;
  j["test"] = m.test;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw WriteError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt manifest " + path.string() + ": " + e.what());
  }
  Manifest m;
  try {
    if (j.at("format").get<std::string>() != "cpnet-manifest-v1")
      throw FormatError("unknown manifest format in " + path.string());
    j.at("master_seed").get_to(m.master_seed);
    j.at("n_train").get_to(m.n_train);
    j.at("n_test").get_to(m.n_test);
    j.at("n_labeled").get_to(m.n_labeled);
    j.at("phantom").get_to(m.phantom);
    j.at("train_labeled").get_to(m.train_labeled);
    j.at("train_unlabeled").get_to(m.train_unlabeled);
    j.at("test").get_to(m.test);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.root = std::filesystem::absolute(path).parent_path();
  return m;
}

inline Manifest generate_dataset(const PhantomConfig& cfg, int n_train, int n_test,
                                 int n_labeled, const std::filesystem::path& out_dir,
                                 bool overwrite = false) {
  validate(cfg);
  if (n_train < 0 || n_test < 0 || n_labeled < 0 || n_labeled > n_train)
    throw ConfigError("need 0 <= n_labeled <= n_train and n_test >= 0");

  namespace fs = std::filesystem;
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !overwrite)
    throw RefusalError("output directory " + out_dir.string() +
                       " is not empty (pass overwrite to replace)");
  fs::create_directories(out_dir);

  Manifest m;
  m.master_seed = cfg.seed;
  m.n_train = n_train;
  m.n_test = n_test;
  m.n_labeled = n_labeled;
  m.phantom = cfg;
  m.root = fs::absolute(out_dir);

  auto emit = [&](const std::string& id, std::uint64_t seed) {
    PhantomConfig c = cfg;
    c.seed = seed;
    PhantomTriple t = generate_phantom(c);
    write_volume(out_dir / (id + "_cta"), t.cta);
    write_volume(out_dir / (id + "_ctu"), t.ctu);
    write_volume(out_dir / (id + "_truth"), t.truth);
    ManifestEntry e;
    e.id = id;
    e.cta = id + "_cta";
    e.ctu = id + "_ctu";
    e.truth = id + "_truth";
    return e;
  };

  char buf[32];
  for (int i = 0; i < n_train; ++i) {
    std::snprintf(buf, sizeof(buf), "train_%03d", i);
    ManifestEntry e = emit(buf, cfg.seed + static_cast<std::uint64_t>(i));
    if (i < n_labeled) {
      m.train_labeled.push_back(std::move(e));
    } else {
      e.truth.reset();  // phase discipline: unlabeled entries carry no truth path
      m.train_unlabeled.push_back(std::move(e));
    }
  }
  for (int i = 0; i < n_test; ++i) {
    std::snprintf(buf, sizeof(buf), "test_%03d", i);
    m.test.push_back(emit(buf, cfg.seed + static_cast<std::uint64_t>(n_train + i)));
  }

  save_manifest(m, out_dir / "manifest.json");
  return m;
}

// Rewrites the labeled/unlabeled split of an existing dataset. Truth stems for
// promoted entries follow the generator's "<id>_truth" naming.
inline Manifest resplit_manifest(const Manifest& src, int n_labeled) {
  if (n_labeled < 1 || n_labeled > src.n_train)
    throw ConfigError("n_labeled must be in [1, n_train]");
  std::vector<ManifestEntry> all_train;
  all_train.reserve(src.n_train);
  for (const auto& e : src.train_labeled) all_train.push_back(e);
  for (const auto& e : src.train_unlabeled) all_train.push_back(e);
  std::sort(all_train.begin(), all_train.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });

  Manifest out = src;
  out.n_labeled = n_labeled;
  out.train_labeled.clear();
  out.train_unlabeled.clear();
  for (std::size_t i = 0; i < all_train.size(); ++i) {
    ManifestEntry e = all_train[i];
    if (static_cast<int>(i) < n_labeled) {
      if (!e.truth) {
        const std::string stem = e.id + "_truth";
        if (!std::filesystem::exists(out.resolve(stem + ".json")))
          throw ConfigError("no truth grid on disk for " + e.id);
        e.truth = stem;
      }
      out.train_labeled.push_back(std::move(e));
    } else {
      e.truth.reset();
      out.train_unlabeled.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace cpnet
