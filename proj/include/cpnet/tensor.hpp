#pragma once

// Channels-first dense tensor over a voxel grid, shape (C, D, H, W). This is
// the workhorse container for feature maps, activations and gradients.

#include <cmath>
#include <cstdint>
#include <vector>

#include "cpnet/common.hpp"
#include "cpnet/volume.hpp"

namespace cpnet {

template <typename T>
struct Tensor {
  int c = 0;
  Shape3 dims;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int channels, Shape3 shape, T fill = T(0))
      : c(channels), dims(shape),
        v(static_cast<std::size_t>(channels) * shape.voxels(), fill) {}

  std::int64_t spatial() const { return dims.voxels(); }
  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }

  T* channel(int ch) { return v.data() + static_cast<std::size_t>(ch) * spatial(); }
  const T* channel(int ch) const { return v.data() + static_cast<std::size_t>(ch) * spatial(); }

  T& at(int ch, int z, int y, int x) { return channel(ch)[flat_index(dims, z, y, x)]; }
  T at(int ch, int z, int y, int x) const { return channel(ch)[flat_index(dims, z, y, x)]; }

  void fill(T value) { std::fill(v.begin(), v.end(), value); }

  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }
};

// Per-volume shift/scale to zero mean, unit variance; feature extractor inputs
// are expected in this form.
template <typename T>
Tensor<T> normalized_input(const Volume& vol) {
  Tensor<T> t(1, vol.dims);
  double mean = 0.0;
  for (float x : vol.voxels) mean += x;
  mean /= static_cast<double>(vol.voxels.size());
  double var = 0.0;
  for (float x : vol.voxels) {
    const double d = x - mean;
    var += d * d;
  }
  var /= static_cast<double>(vol.voxels.size());
  const double inv_std = 1.0 / std::sqrt(var + 1e-12);
  for (std::size_t i = 0; i < vol.voxels.size(); ++i)
    t.v[i] = static_cast<T>((vol.voxels[i] - mean) * inv_std);
  return t;
}

}  // namespace cpnet
