#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "boxpose/rng.hpp"
#include "boxpose/tensor.hpp"

namespace boxpose {

/// One object instance's 9 keypoints in map (stage-resolution) coordinates.
using MapKeypoints = std::array<Eigen::Vector2d, 9>;

struct LabelGenConfig {
  double sigma = 2.0;      // Gaussian std-dev, map pixels
  int vector_radius = 3;   // field disk radius, map pixels
  int downscale = 8;       // image -> map resolution factor
  std::uint64_t rng_seed = 0;
};

inline void validate(const LabelGenConfig& c) {
  if (!(c.sigma > 0.0)) throw std::invalid_argument("labelgen: sigma must be > 0");
  if (c.vector_radius < 1) throw std::invalid_argument("labelgen: vector_radius must be >= 1");
  if (c.downscale < 1) throw std::invalid_argument("labelgen: downscale must be >= 1");
}

/// Image pixel -> map coordinate. Real-valued division, no half-pixel offset.
inline Eigen::Vector2d image_to_map(const Eigen::Vector2d& px,
                                    const LabelGenConfig& cfg) {
  return px / static_cast<double>(cfg.downscale);
}

inline Eigen::Vector2d map_to_image(const Eigen::Vector2d& mc,
                                    const LabelGenConfig& cfg) {
  return mc * static_cast<double>(cfg.downscale);
}

/// Renders ground-truth belief maps: channel k cell (x, y) holds
/// max over instances of exp(-((x-xk)^2 + (y-yk)^2) / (2 sigma^2)).
/// Keypoints outside the grid still contribute their in-bounds tails.
inline BeliefMapSet render_belief_maps(const std::vector<MapKeypoints>& instances,
                                       const LabelGenConfig& cfg,
                                       int map_height, int map_width) {
  BeliefMapSet out(map_height, map_width);
  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  for (const MapKeypoints& kps : instances) {
    for (int k = 0; k < 9; ++k) {
      const double kx = kps[k].x();
      const double ky = kps[k].y();
      for (int y = 0; y < map_height; ++y) {
        const double dy = y - ky;
        for (int x = 0; x < map_width; ++x) {
          const double dx = x - kx;
          const float v = static_cast<float>(
              std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq));
          float& cell = out.grid.at(k, y, x);
          if (v > cell) cell = v;  // overlapping instances combine by max
        }
      }
    }
  }
  return out;
}

/// Renders ground-truth vector fields. For each instance and each vertex
/// k < 8, every cell within Euclidean distance vector_radius of the vertex
/// (measured at cell centers) receives the unit vector from the vertex toward
/// that instance's centroid. Cells claimed by several vertices on the same
/// channel get one claimant chosen uniformly by the seeded RNG; all other
/// cells stay (0, 0).
inline VectorFieldSet render_vector_fields(const std::vector<MapKeypoints>& instances,
                                           const LabelGenConfig& cfg,
                                           int map_height, int map_width) {
  VectorFieldSet out(map_height, map_width);
  Rng rng(cfg.rng_seed);
  const double r2 = static_cast<double>(cfg.vector_radius) * cfg.vector_radius;

  struct Claim {
    float vx, vy;
  };
  // claims[cell] per channel; rebuilt channel by channel to bound memory
  std::vector<std::vector<Claim>> claims(
      static_cast<std::size_t>(map_height) * map_width);

  for (int k = 0; k < 8; ++k) {
    for (auto& c : claims) c.clear();
    for (const MapKeypoints& kps : instances) {
      const Eigen::Vector2d& v = kps[k];
      const Eigen::Vector2d dir = kps[8] - v;
      const double n = dir.norm();
      if (n <= 0.0) continue;  // vertex coincides with centroid: leave zero
      const Claim cl{static_cast<float>(dir.x() / n),
                     static_cast<float>(dir.y() / n)};
      const int x0 = static_cast<int>(std::ceil(v.x() - cfg.vector_radius));
      const int x1 = static_cast<int>(std::floor(v.x() + cfg.vector_radius));
      const int y0 = static_cast<int>(std::ceil(v.y() - cfg.vector_radius));
      const int y1 = static_cast<int>(std::floor(v.y() + cfg.vector_radius));
      for (int y = std::max(y0, 0); y <= std::min(y1, map_height - 1); ++y) {
        for (int x = std::max(x0, 0); x <= std::min(x1, map_width - 1); ++x) {
          const double dx = x - v.x();
          const double dy = y - v.y();
          if (dx * dx + dy * dy <= r2)
            claims[static_cast<std::size_t>(y) * map_width + x].push_back(cl);
        }
      }
    }
    // resolve cell by cell in row-major order so the RNG stream is stable
    for (int y = 0; y < map_height; ++y) {
      for (int x = 0; x < map_width; ++x) {
        const auto& cs = claims[static_cast<std::size_t>(y) * map_width + x];
        if (cs.empty()) continue;
        const Claim& pick =
            cs.size() == 1 ? cs[0] : cs[rng.uniform_int(static_cast<int>(cs.size()))];
        out.grid.at(2 * k, y, x) = pick.vx;
        out.grid.at(2 * k + 1, y, x) = pick.vy;
      }
    }
  }
  return out;
}

}  // namespace boxpose
