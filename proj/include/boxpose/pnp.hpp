#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "boxpose/geometry.hpp"

namespace boxpose {

/// 2D-3D correspondences: object-frame points paired with their observed
/// pixel projections.
struct Correspondences {
  std::vector<Eigen::Vector3d> object_points;
  std::vector<Eigen::Vector2d> image_points;

  std::size_t size() const { return object_points.size(); }
  void add(const Eigen::Vector3d& p, const Eigen::Vector2d& u) {
    object_points.push_back(p);
    image_points.push_back(u);
  }
};

enum class PnpMethod {
  epnp_case1,
  epnp_case2,
  epnp_case3,
  epnp_planar_case1,
  epnp_planar_case2,
};

struct PnpSolution {
  Pose pose;
  double reprojection_rmse = 0.0;
  PnpMethod method = PnpMethod::epnp_case1;
  bool refined = false;
};

class PnpError : public std::runtime_error {
 public:
  enum class Code { insufficient_points, no_valid_pose, degenerate };
  PnpError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
  Code code;
};

/// Root-mean-square of the 2D reprojection residual norms, in pixels.
inline double reprojection_rmse(const Pose& pose, const Correspondences& c,
                                const CameraIntrinsics& k) {
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Eigen::Vector2d r =
        project_point(pose.apply(c.object_points[i]), k) - c.image_points[i];
    acc += r.squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(c.size()));
}

namespace epnp_detail {

/// Least-squares rigid alignment taking world points onto camera points
/// (rotation constrained to det +1).
inline Pose align_rigid(const std::vector<Eigen::Vector3d>& world,
                        const std::vector<Eigen::Vector3d>& camera) {
  const std::size_t n = world.size();
  Eigen::Vector3d wc = Eigen::Vector3d::Zero(), cc = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    wc += world[i];
    cc += camera[i];
  }
  wc /= static_cast<double>(n);
  cc /= static_cast<double>(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i)
    h += (world[i] - wc) * (camera[i] - cc).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  return Pose(Eigen::Quaterniond(r), cc - r * wc);
}

/// One candidate evaluation shared by both branches: reconstruct the
/// camera-frame point cloud from camera control points, fix the depth sign,
/// enforce cheirality, align, and score by reprojection error.
struct Candidate {
  Pose pose;
  double rmse = std::numeric_limits<double>::infinity();
  bool valid = false;
};

template <int NumCtrl>
Candidate evaluate_candidate(
    const std::vector<Eigen::Matrix<double, NumCtrl, 1>>& alphas,
    std::array<Eigen::Vector3d, NumCtrl> ctrl_cam,
    const Correspondences& c, const CameraIntrinsics& k) {
  const std::size_t n = alphas.size();
  std::vector<Eigen::Vector3d> cam(n);
  auto reconstruct = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector3d p = Eigen::Vector3d::Zero();
      for (int j = 0; j < NumCtrl; ++j) p += alphas[i][j] * ctrl_cam[j];
      cam[i] = p;
    }
  };
  reconstruct();
  double zsum = 0.0;
  for (const auto& p : cam) zsum += p.z();
  if (zsum < 0.0) {  // the null-space solution is defined up to sign
    for (auto& cp : ctrl_cam) cp = -cp;
    reconstruct();
  }
  Candidate out;
  for (const auto& p : cam)
    if (!(p.z() > 0.0)) return out;  // cheirality violated

  out.pose = align_rigid(c.object_points, cam);
  for (std::size_t i = 0; i < n; ++i)
    if (!(out.pose.apply(c.object_points[i]).z() > 0.0)) return out;
  out.rmse = reprojection_rmse(out.pose, c, k);
  out.valid = true;
  return out;
}

/// Gauss-Newton refinement of the betas on the control-point distance
/// equations:  sum_terms L(i,:) * quad(beta) = rho(i).
/// L columns are ordered [B11 B12 B22 B13 B23 B33 B14 B24 B34 B44] truncated
/// to the active component count.
template <int NumBetas, int NumPairs, int NumTerms>
void refine_betas(const Eigen::Matrix<double, NumPairs, NumTerms>& l,
                  const Eigen::Matrix<double, NumPairs, 1>& rho,
                  Eigen::Matrix<double, NumBetas, 1>& betas, int iters = 8) {
  // term index for the pair (a,b), a <= b, in the ordering above
  auto term = [](int a, int b) {
    static constexpr int idx[4][4] = {
        {0, 1, 3, 6}, {1, 2, 4, 7}, {3, 4, 5, 8}, {6, 7, 8, 9}};
    return idx[a][b];
  };
  for (int it = 0; it < iters; ++it) {
    Eigen::Matrix<double, NumPairs, NumBetas> a;
    Eigen::Matrix<double, NumPairs, 1> b;
    for (int i = 0; i < NumPairs; ++i) {
      double f = 0.0;
      for (int p = 0; p < NumBetas; ++p)
        for (int q = p; q < NumBetas; ++q)
          f += l(i, term(p, q)) * betas[p] * betas[q];
      b[i] = rho[i] - f;
      for (int p = 0; p < NumBetas; ++p) {
        double d = 2.0 * l(i, term(p, p)) * betas[p];
        for (int q = 0; q < NumBetas; ++q)
          if (q != p) d += l(i, term(std::min(p, q), std::max(p, q))) * betas[q];
        a(i, p) = d;
      }
    }
    betas += a.colPivHouseholderQr().solve(b);
  }
}

}  // namespace epnp_detail

/// EPnP pose recovery from n >= 4 correspondences.
///
/// Object points are expressed as barycentric combinations of 4 control
/// points (3 when the point set is near-planar), the 2n x 12 projection
/// system is solved for its near-null space, and candidate control-point
/// reconstructions for null-space dimensions 1-3 are scored by reprojection
/// error after closed-form rigid alignment. Candidates placing any point
/// behind the camera are rejected.
inline PnpSolution solve_epnp(const Correspondences& c, const CameraIntrinsics& k) {
  const std::size_t n = c.size();
  if (n < 4)
    throw PnpError(PnpError::Code::insufficient_points,
                   "solve_epnp: need at least 4 correspondences, got " +
                       std::to_string(n));
  if (c.image_points.size() != n)
    throw std::invalid_argument("solve_epnp: point count mismatch");

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : c.object_points) centroid += p;
  centroid /= static_cast<double>(n);
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : c.object_points) {
    const Eigen::Vector3d d = p - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
  if (!(evals[2] > 0.0) || evals[1] < 1e-12 * evals[2])
    throw PnpError(PnpError::Code::degenerate,
                   "solve_epnp: object points coincident or collinear");
  const bool planar = evals[0] < 1e-6 * evals[2];

  const double nn = static_cast<double>(n);
  epnp_detail::Candidate best;
  PnpMethod best_method = PnpMethod::epnp_case1;

  if (!planar) {
    // 4 control points: centroid plus the principal axes
    std::array<Eigen::Vector3d, 4> cw;
    cw[0] = centroid;
    for (int j = 0; j < 3; ++j)
      cw[j + 1] = centroid + std::sqrt(evals[2 - j] / nn) * eig.eigenvectors().col(2 - j);

    Eigen::Matrix3d basis;
    for (int j = 0; j < 3; ++j) basis.col(j) = cw[j + 1] - cw[0];
    const Eigen::Matrix3d basis_inv = basis.inverse();
    std::vector<Eigen::Vector4d> alphas(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d a = basis_inv * (c.object_points[i] - cw[0]);
      alphas[i] << 1.0 - a.sum(), a[0], a[1], a[2];
    }

    Eigen::MatrixXd m(2 * n, 12);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = c.image_points[i].x();
      const double v = c.image_points[i].y();
      for (int j = 0; j < 4; ++j) {
        m(2 * i, 3 * j) = alphas[i][j] * k.fx;
        m(2 * i, 3 * j + 1) = 0.0;
        m(2 * i, 3 * j + 2) = alphas[i][j] * (k.cx - u);
        m(2 * i + 1, 3 * j) = 0.0;
        m(2 * i + 1, 3 * j + 1) = alphas[i][j] * k.fy;
        m(2 * i + 1, 3 * j + 2) = alphas[i][j] * (k.cy - v);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> meig(m.transpose() * m);
    // null basis: the 4 smallest eigenvectors, smallest first
    std::array<std::array<Eigen::Vector3d, 4>, 4> nb;
    for (int kk = 0; kk < 4; ++kk)
      for (int j = 0; j < 4; ++j)
        nb[kk][j] = meig.eigenvectors().col(kk).segment<3>(3 * j);

    static constexpr int pair_a[6] = {0, 0, 0, 1, 1, 2};
    static constexpr int pair_b[6] = {1, 2, 3, 2, 3, 3};
    Eigen::Matrix<double, 6, 10> l;
    Eigen::Matrix<double, 6, 1> rho;
    for (int i = 0; i < 6; ++i) {
      std::array<Eigen::Vector3d, 4> dv;
      for (int kk = 0; kk < 4; ++kk) dv[kk] = nb[kk][pair_a[i]] - nb[kk][pair_b[i]];
      l(i, 0) = dv[0].dot(dv[0]);
      l(i, 1) = 2.0 * dv[0].dot(dv[1]);
      l(i, 2) = dv[1].dot(dv[1]);
      l(i, 3) = 2.0 * dv[0].dot(dv[2]);
      l(i, 4) = 2.0 * dv[1].dot(dv[2]);
      l(i, 5) = dv[2].dot(dv[2]);
      l(i, 6) = 2.0 * dv[0].dot(dv[3]);
      l(i, 7) = 2.0 * dv[1].dot(dv[3]);
      l(i, 8) = 2.0 * dv[2].dot(dv[3]);
      l(i, 9) = dv[3].dot(dv[3]);
      rho[i] = (cw[pair_a[i]] - cw[pair_b[i]]).squaredNorm();
    }

    // Candidate initializations. The near-null eigenvalues are often equal to
    // machine noise, so the true solution's dominant component can sit on ANY
    // of the basis vectors; each case pattern is therefore anchored on every
    // choice of dominant component instead of assuming the first.
    auto term = [](int a, int b) {
      static constexpr int idx[4][4] = {
          {0, 1, 3, 6}, {1, 2, 4, 7}, {3, 4, 5, 8}, {6, 7, 8, 9}};
      return idx[std::min(a, b)][std::max(a, b)];
    };
    struct Init {
      Eigen::Vector4d beta;
      PnpMethod method;
    };
    std::vector<Init> inits;
    for (int a = 0; a < 4; ++a) {
      // case 1 anchored on a: unknowns [Baa, Bab for every b != a]
      Eigen::Matrix<double, 6, 4> l4;
      l4.col(0) = l.col(term(a, a));
      int col = 1;
      std::array<int, 3> others{};
      for (int b = 0, o = 0; b < 4; ++b)
        if (b != a) {
          l4.col(col++) = l.col(term(a, b));
          others[o++] = b;
        }
      const Eigen::Vector4d b4 = l4.colPivHouseholderQr().solve(rho);
      if (std::abs(b4[0]) < 1e-16) continue;
      Eigen::Vector4d beta = Eigen::Vector4d::Zero();
      const double s = b4[0] < 0 ? -1.0 : 1.0;
      beta[a] = std::sqrt(s * b4[0]);
      for (int o = 0; o < 3; ++o) beta[others[o]] = s * b4[o + 1] / beta[a];
      inits.push_back({beta, PnpMethod::epnp_case1});
    }
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        // case 2 on the pair (a, b): unknowns [Baa, Bab, Bbb]
        Eigen::Matrix<double, 6, 3> l3;
        l3 << l.col(term(a, a)), l.col(term(a, b)), l.col(term(b, b));
        const Eigen::Vector3d b3 = l3.colPivHouseholderQr().solve(rho);
        Eigen::Vector4d beta = Eigen::Vector4d::Zero();
        if (b3[0] < 0) {
          beta[a] = std::sqrt(-b3[0]);
          beta[b] = b3[2] < 0 ? std::sqrt(-b3[2]) : 0.0;
        } else {
          beta[a] = std::sqrt(b3[0]);
          beta[b] = b3[2] > 0 ? std::sqrt(b3[2]) : 0.0;
        }
        if (b3[1] < 0) beta[a] = -beta[a];
        inits.push_back({beta, PnpMethod::epnp_case2});
      }
    }
    for (int skip = 3; skip >= 0; --skip) {
      // case 3 on the triple excluding `skip`:
      // unknowns [Baa, Bab, Bbb, Bac, Bbc], anchored on the triple's first
      std::array<int, 3> tri{};
      for (int b = 0, o = 0; b < 4; ++b)
        if (b != skip) tri[o++] = b;
      Eigen::Matrix<double, 6, 5> l5;
      l5 << l.col(term(tri[0], tri[0])), l.col(term(tri[0], tri[1])),
          l.col(term(tri[1], tri[1])), l.col(term(tri[0], tri[2])),
          l.col(term(tri[1], tri[2]));
      const Eigen::Matrix<double, 5, 1> b5 = l5.colPivHouseholderQr().solve(rho);
      Eigen::Vector4d beta = Eigen::Vector4d::Zero();
      if (b5[0] < 0) {
        beta[tri[0]] = std::sqrt(-b5[0]);
        beta[tri[1]] = b5[2] < 0 ? std::sqrt(-b5[2]) : 0.0;
      } else {
        beta[tri[0]] = std::sqrt(b5[0]);
        beta[tri[1]] = b5[2] > 0 ? std::sqrt(b5[2]) : 0.0;
      }
      if (b5[1] < 0) beta[tri[0]] = -beta[tri[0]];
      if (std::abs(beta[tri[0]]) > 1e-12) beta[tri[2]] = b5[3] / beta[tri[0]];
      inits.push_back({beta, PnpMethod::epnp_case3});
    }

    for (const Init& init : inits) {
      Eigen::Vector4d beta = init.beta;
      epnp_detail::refine_betas<4, 6, 10>(l, rho, beta);
      std::array<Eigen::Vector3d, 4> cc;
      for (int j = 0; j < 4; ++j) {
        cc[j] = Eigen::Vector3d::Zero();
        for (int kk = 0; kk < 4; ++kk) cc[j] += beta[kk] * nb[kk][j];
      }
      const auto cand = epnp_detail::evaluate_candidate<4>(alphas, cc, c, k);
      if (cand.valid && cand.rmse < best.rmse) {
        best = cand;
        best_method = init.method;
      }
    }
  } else {
    // planar branch: 3 control points spanning the dominant plane
    std::array<Eigen::Vector3d, 3> cw;
    cw[0] = centroid;
    cw[1] = centroid + std::sqrt(evals[2] / nn) * eig.eigenvectors().col(2);
    cw[2] = centroid + std::sqrt(evals[1] / nn) * eig.eigenvectors().col(1);

    Eigen::Matrix<double, 3, 2> basis;
    basis.col(0) = cw[1] - cw[0];
    basis.col(1) = cw[2] - cw[0];
    const Eigen::Matrix2d gram_inv = (basis.transpose() * basis).inverse();
    std::vector<Eigen::Vector3d> alphas(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d a =
          gram_inv * (basis.transpose() * (c.object_points[i] - cw[0]));
      alphas[i] << 1.0 - a.sum(), a[0], a[1];
    }

    Eigen::MatrixXd m(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = c.image_points[i].x();
      const double v = c.image_points[i].y();
      for (int j = 0; j < 3; ++j) {
        m(2 * i, 3 * j) = alphas[i][j] * k.fx;
        m(2 * i, 3 * j + 1) = 0.0;
        m(2 * i, 3 * j + 2) = alphas[i][j] * (k.cx - u);
        m(2 * i + 1, 3 * j) = 0.0;
        m(2 * i + 1, 3 * j + 1) = alphas[i][j] * k.fy;
        m(2 * i + 1, 3 * j + 2) = alphas[i][j] * (k.cy - v);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> meig(m.transpose() * m);
    std::array<std::array<Eigen::Vector3d, 3>, 3> nb;
    for (int kk = 0; kk < 3; ++kk)
      for (int j = 0; j < 3; ++j)
        nb[kk][j] = meig.eigenvectors().col(kk).segment<3>(3 * j);

    static constexpr int pair_a[3] = {0, 0, 1};
    static constexpr int pair_b[3] = {1, 2, 2};
    // columns [B11 B12 B22 B13 B23 B33]
    Eigen::Matrix<double, 3, 6> l;
    Eigen::Matrix<double, 3, 1> rho;
    for (int i = 0; i < 3; ++i) {
      std::array<Eigen::Vector3d, 3> dv;
      for (int kk = 0; kk < 3; ++kk) dv[kk] = nb[kk][pair_a[i]] - nb[kk][pair_b[i]];
      l(i, 0) = dv[0].dot(dv[0]);
      l(i, 1) = 2.0 * dv[0].dot(dv[1]);
      l(i, 2) = dv[1].dot(dv[1]);
      l(i, 3) = 2.0 * dv[0].dot(dv[2]);
      l(i, 4) = 2.0 * dv[1].dot(dv[2]);
      l(i, 5) = dv[2].dot(dv[2]);
      rho[i] = (cw[pair_a[i]] - cw[pair_b[i]]).squaredNorm();
    }
    auto term = [](int a, int b) {
      static constexpr int idx[3][3] = {{0, 1, 3}, {1, 2, 4}, {3, 4, 5}};
      return idx[std::min(a, b)][std::max(a, b)];
    };

    struct Init {
      Eigen::Vector3d beta;
      PnpMethod method;
    };
    std::vector<Init> inits;
    for (int a = 0; a < 3; ++a) {
      // single dominant component, least-squares scale
      double num = 0.0, den = 0.0;
      for (int i = 0; i < 3; ++i) {
        num += l(i, term(a, a)) * rho[i];
        den += l(i, term(a, a)) * l(i, term(a, a));
      }
      Eigen::Vector3d beta = Eigen::Vector3d::Zero();
      beta[a] = std::sqrt(std::max(0.0, num / den));
      inits.push_back({beta, PnpMethod::epnp_planar_case1});
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = a + 1; b < 3; ++b) {
        // pair (a, b): unknowns [Baa, Bab, Bbb]
        Eigen::Matrix3d l3;
        l3 << l.col(term(a, a)), l.col(term(a, b)), l.col(term(b, b));
        const Eigen::Vector3d b3 = l3.colPivHouseholderQr().solve(rho);
        Eigen::Vector3d beta = Eigen::Vector3d::Zero();
        if (b3[0] < 0) {
          beta[a] = std::sqrt(-b3[0]);
          beta[b] = b3[2] < 0 ? std::sqrt(-b3[2]) : 0.0;
        } else {
          beta[a] = std::sqrt(b3[0]);
          beta[b] = b3[2] > 0 ? std::sqrt(b3[2]) : 0.0;
        }
        if (b3[1] < 0) beta[a] = -beta[a];
        inits.push_back({beta, PnpMethod::epnp_planar_case2});
      }
    }

    for (const Init& init : inits) {
      Eigen::Vector3d beta = init.beta;
      epnp_detail::refine_betas<3, 3, 6>(l, rho, beta);
      std::array<Eigen::Vector3d, 3> cc;
      for (int j = 0; j < 3; ++j) {
        cc[j] = Eigen::Vector3d::Zero();
        for (int kk = 0; kk < 3; ++kk) cc[j] += beta[kk] * nb[kk][j];
      }
      const auto cand = epnp_detail::evaluate_candidate<3>(alphas, cc, c, k);
      if (cand.valid && cand.rmse < best.rmse) {
        best = cand;
        best_method = init.method;
      }
    }
  }

  if (!best.valid)
    throw PnpError(PnpError::Code::no_valid_pose,
                   "solve_epnp: all candidates place points behind the camera");
  PnpSolution out;
  out.pose = best.pose;
  out.reprojection_rmse = best.rmse;
  out.method = best_method;
  return out;
}

/// Levenberg-damped Gauss-Newton on the reprojection residuals over a local
/// 6-parameter update (axis-angle increment composed on the left of the
/// rotation, additive translation). Damping is multiplied by 10 on a failed
/// step and divided by 10 on success, floored at 1e-12. If no step improves
/// the error the initial solution is returned unchanged with refined=false.
inline PnpSolution refine_gauss_newton(const PnpSolution& initial,
                                       const Correspondences& c,
                                       const CameraIntrinsics& k,
                                       int max_iters = 20,
                                       double damping = 1e-6) {
  const std::size_t n = c.size();
  if (n == 0) return initial;

  auto cost_of = [&](const Pose& pose, bool& ok) {
    double acc = 0.0;
    ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d q = pose.apply(c.object_points[i]);
      if (!(q.z() > 0.0)) {
        ok = false;
        return 0.0;
      }
      const Eigen::Vector2d r =
          Eigen::Vector2d(k.fx * q.x() / q.z() + k.cx,
                          k.fy * q.y() / q.z() + k.cy) -
          c.image_points[i];
      acc += r.squaredNorm();
    }
    return acc;
  };

  Pose pose = initial.pose;
  bool ok = false;
  double cost = cost_of(pose, ok);
  if (!ok) return initial;
  double lambda = std::max(damping, 1e-12);
  bool any_accepted = false;

  for (int it = 0; it < max_iters; ++it) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d q = pose.apply(c.object_points[i]);
      const Eigen::Vector3d rp = q - pose.translation;  // rotated point
      const double iz = 1.0 / q.z();
      const Eigen::Vector2d r(k.fx * q.x() * iz + k.cx - c.image_points[i].x(),
                              k.fy * q.y() * iz + k.cy - c.image_points[i].y());
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << k.fx * iz, 0.0, -k.fx * q.x() * iz * iz,
             0.0, k.fy * iz, -k.fy * q.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dq;
      Eigen::Matrix3d skew;
      skew << 0, -rp.z(), rp.y(), rp.z(), 0, -rp.x(), -rp.y(), rp.x(), 0;
      dq.block<3, 3>(0, 0) = -skew;
      dq.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 2, 6> j = dpi * dq;
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }

    bool stepped = false;
    while (lambda <= 1e12) {
      Eigen::Matrix<double, 6, 6> a = jtj;
      a.diagonal().array() += lambda;
      const Eigen::Matrix<double, 6, 1> delta = a.ldlt().solve(-jtr);
      const Eigen::Vector3d w = delta.head<3>();
      const double angle = w.norm();
      Eigen::Quaterniond dr = Eigen::Quaterniond::Identity();
      if (angle > 0.0)
        dr = Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
      const Pose trial(dr * pose.rotation, pose.translation + delta.tail<3>());
      bool trial_ok = false;
      const double trial_cost = cost_of(trial, trial_ok);
      if (trial_ok && trial_cost < cost) {
        pose = trial;
        const double drop = cost - trial_cost;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        stepped = true;
        any_accepted = true;
        if (drop < 1e-18 * (1.0 + cost)) it = max_iters;  // converged
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) break;  // diverged at max damping
  }

  if (!any_accepted) {
    PnpSolution out = initial;
    out.refined = false;
    return out;
  }
  PnpSolution out;
  out.pose = pose;
  out.reprojection_rmse = std::sqrt(cost / static_cast<double>(n));
  out.method = initial.method;
  out.refined = true;
  return out;
}

}  // namespace boxpose
