#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace boxpose {

/// Dense row-major (channel, row, column) float32 grid. The stage-resolution
/// map tensors exchanged between the label generator, external networks, the
/// detector, and the DTNS file format.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0f) {}

  float& at(int c, int y, int x) {
    assert(c >= 0 && c < channels && y >= 0 && y < height && x >= 0 && x < width);
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    assert(c >= 0 && c < channels && y >= 0 && y < height && x >= 0 && x < width);
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.channels == b.channels && a.height == b.height &&
           a.width == b.width && a.data == b.data;
  }
};

/// 9-channel belief tensor: channel k holds vertex k for k < 8, channel 8
/// holds centroids. Ground-truth values lie in [0, 1].
struct BeliefMapSet {
  static constexpr int kChannels = 9;
  Tensor3 grid;

  BeliefMapSet() = default;
  BeliefMapSet(int h, int w) : grid(kChannels, h, w) {}
  explicit BeliefMapSet(Tensor3 t) : grid(std::move(t)) {}

  int height() const { return grid.height; }
  int width() const { return grid.width; }
  bool valid_shape() const { return grid.channels == kChannels; }
};

/// 16-channel vector-field tensor: channels (2k, 2k+1) hold the (x, y)
/// components of vertex k's field. Nonzero ground-truth vectors are unit norm.
struct VectorFieldSet {
  static constexpr int kChannels = 16;
  Tensor3 grid;

  VectorFieldSet() = default;
  VectorFieldSet(int h, int w) : grid(kChannels, h, w) {}
  explicit VectorFieldSet(Tensor3 t) : grid(std::move(t)) {}

  int height() const { return grid.height; }
  int width() const { return grid.width; }
  bool valid_shape() const { return grid.channels == kChannels; }
};

}  // namespace boxpose
