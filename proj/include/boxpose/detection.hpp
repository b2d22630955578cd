#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "boxpose/labelgen.hpp"
#include "boxpose/tensor.hpp"

namespace boxpose {

struct DetectionConfig {
  double peak_threshold = 0.1;  // min belief value for a peak
  int nms_window = 5;           // odd window side for the strict-max test
  int refine_window = 11;       // odd window side for the subpixel centroid
  double smooth_sigma = 1.0;    // pre-smoothing Gaussian, map cells; 0 disables
  double angle_threshold = 0.3; // max angular deviation for assignment, radians
  int min_vertices = 4;         // minimum assigned vertices to keep an instance
};

inline void validate(const DetectionConfig& c) {
  if (!(c.peak_threshold > 0.0 && c.peak_threshold < 1.0))
    throw std::invalid_argument("detection: peak_threshold must be in (0,1)");
  if (c.nms_window < 3 || c.nms_window % 2 == 0 || c.refine_window < 3 ||
      c.refine_window % 2 == 0)
    throw std::invalid_argument("detection: windows must be odd and >= 3");
  if (!(c.angle_threshold > 0.0 && c.angle_threshold < 3.14159265358979323846))
    throw std::invalid_argument("detection: angle_threshold must be in (0, pi)");
  if (c.min_vertices < 4 || c.min_vertices > 8)
    throw std::invalid_argument("detection: min_vertices must be in [4, 8]");
  if (c.smooth_sigma < 0.0)
    throw std::invalid_argument("detection: smooth_sigma must be >= 0");
}

/// One local maximum of a belief channel. pos is subpixel, in map coordinates
/// (detect() rescales to image pixels before handing instances downstream).
struct Peak {
  Eigen::Vector2d pos{0.0, 0.0};
  double confidence = 0.0;
};

/// One object hypothesis: a centroid peak plus up to 8 assigned vertex peaks
/// (slot k = cuboid keypoint k).
struct DetectedInstance {
  Peak centroid;
  std::array<std::optional<Peak>, 8> vertices;

  int vertex_count() const {
    int n = 0;
    for (const auto& v : vertices) n += v.has_value() ? 1 : 0;
    return n;
  }
};

namespace detail {

/// Separable Gaussian blur with zero padding outside the grid.
inline std::vector<float> smooth_channel(const Tensor3& t, int channel,
                                         double sigma) {
  const int h = t.height, w = t.width;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& kv : kernel) kv /= sum;

  std::vector<float> tmp(static_cast<std::size_t>(h) * w, 0.0f);
  std::vector<float> out(static_cast<std::size_t>(h) * w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) acc += kernel[i + radius] * t.at(channel, y, xx);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h)
          acc += kernel[i + radius] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace detail

/// Finds local peaks in one belief channel.
///
/// The channel is optionally pre-smoothed (smooth_sigma > 0) to merge plateau
/// maxima; the strict-max test, the threshold, and the reported confidence all
/// use that working copy. The subpixel position is the belief-weighted
/// centroid of the refine_window around the maximum, computed on the raw
/// (unsmoothed) channel, which is sharper. Peaks are returned sorted by
/// descending confidence, ties broken by (y, x) position.
inline std::vector<Peak> extract_peaks(const Tensor3& maps, int channel,
                                       const DetectionConfig& cfg) {
  const int h = maps.height, w = maps.width;
  std::vector<Peak> peaks;
  if (h <= 0 || w <= 0) return peaks;

  std::vector<float> smoothed;
  const bool use_smooth = cfg.smooth_sigma > 0.0;
  if (use_smooth) smoothed = detail::smooth_channel(maps, channel, cfg.smooth_sigma);
  auto work = [&](int y, int x) -> float {
    return use_smooth ? smoothed[static_cast<std::size_t>(y) * w + x]
                      : maps.at(channel, y, x);
  };

  const int nr = cfg.nms_window / 2;
  const int rr = cfg.refine_window / 2;
  struct Cand {
    int x, y;
    double conf;
  };
  std::vector<Cand> cands;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = work(y, x);
      if (v < cfg.peak_threshold) continue;
      bool strict_max = true;
      for (int dy = -nr; dy <= nr && strict_max; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -nr; dx <= nr; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w || (dx == 0 && dy == 0)) continue;
          if (work(yy, xx) >= v) {
            strict_max = false;
            break;
          }
        }
      }
      if (strict_max) cands.push_back({x, y, static_cast<double>(v)});
    }
  }

  for (const Cand& c : cands) {
    // shrink the window symmetrically at the borders: an asymmetrically
    // clipped window drags the centroid toward the grid interior
    const int rx = std::min({rr, c.x, w - 1 - c.x});
    const int ry = std::min({rr, c.y, h - 1 - c.y});
    double wsum = 0.0, xsum = 0.0, ysum = 0.0;
    for (int dy = -ry; dy <= ry; ++dy) {
      for (int dx = -rx; dx <= rx; ++dx) {
        // cells nearer to another maximum of this channel belong to that
        // peak's bump; mixing them in drags the centroid between peaks
        const int d_own = dx * dx + dy * dy;
        bool foreign = false;
        for (const Cand& o : cands) {
          if (&o == &c) continue;
          const int ox = c.x + dx - o.x;
          const int oy = c.y + dy - o.y;
          if (ox * ox + oy * oy < d_own) {
            foreign = true;
            break;
          }
        }
        if (foreign) continue;
        const double bw = maps.at(channel, c.y + dy, c.x + dx);
        wsum += bw;
        xsum += bw * (c.x + dx);
        ysum += bw * (c.y + dy);
      }
    }
    Peak p;
    p.confidence = c.conf;
    p.pos = wsum > 0.0 ? Eigen::Vector2d(xsum / wsum, ysum / wsum)
                       : Eigen::Vector2d(c.x, c.y);
    peaks.push_back(p);
  }

  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.pos.y() != b.pos.y()) return a.pos.y() < b.pos.y();
    return a.pos.x() < b.pos.x();
  });
  return peaks;
}

/// Bilinear interpolation of vertex k's field at a map position.
/// Valid domain is [0, width-1] x [0, height-1]; outside it throws.
inline Eigen::Vector2d sample_field(const VectorFieldSet& fields, int k,
                                    const Eigen::Vector2d& pos) {
  const int h = fields.height(), w = fields.width();
  const double x = pos.x(), y = pos.y();
  if (!(x >= 0.0 && x <= w - 1 && y >= 0.0 && y <= h - 1))
    throw std::out_of_range("sample_field: position outside grid");
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 == w - 1) --x0;  // right/bottom edge: interpolate from the last cell pair
  if (y0 == h - 1) --y0;
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  const double fx = x - x0, fy = y - y0;
  Eigen::Vector2d out;
  for (int c = 0; c < 2; ++c) {
    const int ch = 2 * k + c;
    const double v00 = fields.grid.at(ch, y0, x0);
    const double v01 = fields.grid.at(ch, y0, x0 + 1);
    const double v10 = fields.grid.at(ch, y0 + 1, x0);
    const double v11 = fields.grid.at(ch, y0 + 1, x0 + 1);
    out[c] = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
             fy * ((1 - fx) * v10 + fx * v11);
  }
  return out;
}

/// Greedy vertex-to-centroid association.
///
/// Vertex peaks are processed per channel in descending confidence. For each
/// peak the field sampled at the peak is compared with the direction from the
/// peak to every centroid whose slot k is still empty; centroids outside
/// angle_threshold are gated out and the peak goes to the NEAREST remaining
/// centroid (ties by angle). Distance, not angle, picks the winner: a far
/// centroid can sit within a fraction of a degree of the field ray by pure
/// projection accident, while the owning centroid is never farther than the
/// object radius. Instances with fewer than min_vertices assigned vertices
/// are discarded.
inline std::vector<DetectedInstance> associate_instances(
    const std::array<std::vector<Peak>, 8>& vertex_peaks,
    const std::vector<Peak>& centroid_peaks, const VectorFieldSet& fields,
    const DetectionConfig& cfg) {
  const auto by_confidence = [](const Peak& a, const Peak& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.pos.y() != b.pos.y()) return a.pos.y() < b.pos.y();
    return a.pos.x() < b.pos.x();
  };
  // sort here rather than trusting the caller: output must not depend on
  // the storage order of the inputs
  std::vector<Peak> centroids = centroid_peaks;
  std::sort(centroids.begin(), centroids.end(), by_confidence);
  std::vector<DetectedInstance> instances(centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i)
    instances[i].centroid = centroids[i];

  for (int k = 0; k < 8; ++k) {
    std::vector<Peak> channel = vertex_peaks[k];
    std::sort(channel.begin(), channel.end(), by_confidence);
    for (const Peak& p : channel) {
      Eigen::Vector2d f;
      try {
        f = sample_field(fields, k, p.pos);
      } catch (const std::out_of_range&) {
        continue;  // peak refined outside the grid
      }
      const double fn = f.norm();
      if (fn <= 1e-9) continue;  // no field support at this peak
      int best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      double best_angle = cfg.angle_threshold;
      for (std::size_t c = 0; c < instances.size(); ++c) {
        if (instances[c].vertices[k].has_value()) continue;
        const Eigen::Vector2d d = instances[c].centroid.pos - p.pos;
        const double dn = d.norm();
        if (dn <= 1e-9) continue;
        const double cosang =
            std::clamp(f.dot(d) / (fn * dn), -1.0, 1.0);
        const double angle = std::acos(cosang);
        if (angle > cfg.angle_threshold) continue;
        if (dn < best_dist || (dn == best_dist && angle < best_angle)) {
          best_dist = dn;
          best_angle = angle;
          best = static_cast<int>(c);
        }
      }
      if (best >= 0) instances[best].vertices[k] = p;
    }
  }

  std::vector<DetectedInstance> kept;
  for (auto& inst : instances)
    if (inst.vertex_count() >= cfg.min_vertices) kept.push_back(std::move(inst));
  return kept;
}

/// Full detection pass: peak extraction on all 9 channels, association, then
/// conversion of every peak position from map coordinates to image pixels
/// (multiplication by downscale) for downstream pose recovery.
inline std::vector<DetectedInstance> detect(const BeliefMapSet& maps,
                                            const VectorFieldSet& fields,
                                            const DetectionConfig& cfg,
                                            int downscale = 8) {
  std::array<std::vector<Peak>, 8> vertex_peaks;
  for (int k = 0; k < 8; ++k) vertex_peaks[k] = extract_peaks(maps.grid, k, cfg);
  std::vector<Peak> centroid_peaks = extract_peaks(maps.grid, 8, cfg);

  std::vector<DetectedInstance> out =
      associate_instances(vertex_peaks, centroid_peaks, fields, cfg);
  const double s = static_cast<double>(downscale);
  for (auto& inst : out) {
    inst.centroid.pos *= s;
    for (auto& v : inst.vertices)
      if (v.has_value()) v->pos *= s;
  }
  return out;
}

}  // namespace boxpose
