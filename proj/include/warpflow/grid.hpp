#pragma once

// Discretizations of the round n-sphere: node layout, covariant derivatives in
// an orthonormal frame, and quadrature.
//
//   circle   n = 1, N periodic nodes, 4th-order centered differences
//   axisym   any n, nodes theta_j = j pi / N (poles included), fields depend on
//            theta only, 4th-order differences with even-reflection ghosts
//   latlong  n = 2, N rows at theta_i = (i + 1/2) pi / N times 2N columns in psi,
//            2nd-order differences, ghosts across the pole from the antipodal column

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "warpflow/detail/numerics.hpp"
#include "warpflow/errors.hpp"

namespace warpflow {

enum class GridMode { circle, axisym, latlong };

inline std::string to_string(GridMode m) {
  switch (m) {
    case GridMode::circle: return "circle";
    case GridMode::axisym: return "axisym";
    case GridMode::latlong: return "latlong";
  }
  return "unknown";
}

inline GridMode grid_mode_from_string(const std::string& s) {
  if (s == "circle") return GridMode::circle;
  if (s == "axisym") return GridMode::axisym;
  if (s == "latlong") return GridMode::latlong;
  throw ConfigError("unknown grid mode '" + s + "'");
}

/// Frame gradient (node-major, n per node) and Hessian (n*n per node, row-major).
struct NodeDerivatives {
  int n = 0;
  std::vector<double> grad;
  std::vector<double> hess;

  double g(std::size_t node, int i) const { return grad[node * n + i]; }
  double h(std::size_t node, int i, int j) const { return hess[(node * n + i) * n + j]; }
};

/// The scalar combinations the flow needs: |Df|^2, Laplacian, f^i f^k f_ik.
struct ScalarDerivatives {
  std::vector<double> grad_sq;
  std::vector<double> lap;
  std::vector<double> q;
};

class SphereGrid {
 public:
  static SphereGrid build(GridMode mode, int n, int resolution) {
    if (resolution < 8) throw ConfigError("grid resolution must be >= 8");
    if (mode == GridMode::circle && n != 1) throw ConfigError("circle grids require n = 1");
    if (mode == GridMode::latlong && n != 2) throw ConfigError("latlong grids require n = 2");
    if (mode == GridMode::axisym && n < 2) throw ConfigError("axisym grids require n >= 2");
    SphereGrid g;
    g.mode_ = mode;
    g.n_ = n;
    g.res_ = resolution;
    switch (mode) {
      case GridMode::circle: g.build_circle(); break;
      case GridMode::axisym: g.build_axisym(); break;
      case GridMode::latlong: g.build_latlong(); break;
    }
    g.stiff_h_ = g.gershgorin_spacing();
    return g;
  }

  GridMode mode() const { return mode_; }
  int n() const { return n_; }
  int resolution() const { return res_; }
  std::size_t node_count() const { return weights_.size(); }
  /// Polar (or circle) angle spacing.
  double spacing() const { return h_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// Per-node (theta, psi); psi is 0 for circle and axisym grids.
  const std::vector<std::array<double, 2>>& coords() const { return coords_; }
  const std::vector<double>& quad_weights() const { return weights_; }

  double integrate(std::span<const double> f) const {
    check(f);
    return detail::dot_fixed_order(f, weights_);
  }

  std::vector<double> gradient_sq(std::span<const double> f) const { return scalar_derivatives(f).grad_sq; }

  std::vector<double> laplacian(std::span<const double> f) const { return scalar_derivatives(f).lap; }

  /// Gradient and covariant Hessian in the orthonormal frame.
  NodeDerivatives derivatives(std::span<const double> f) const {
    check(f);
    NodeDerivatives d;
    d.n = n_;
    const std::size_t N = node_count();
    d.grad.assign(N * n_, 0.0);
    d.hess.assign(N * n_ * n_, 0.0);
    if (mode_ == GridMode::latlong) {
      for (std::size_t k = 0; k < N; ++k) {
        const auto p = latlong_partials(f, k, +1.0);
        const double th = coords_[k][0];
        const double s = std::sin(th), c = std::cos(th);
        d.grad[2 * k] = p.ft;
        d.grad[2 * k + 1] = p.fp / s;
        d.hess[4 * k] = p.ftt;
        const double off = p.ftp / s - c * p.fp / (s * s);
        d.hess[4 * k + 1] = off;
        d.hess[4 * k + 2] = off;
        d.hess[4 * k + 3] = p.fpp / (s * s) + c / s * p.ft;
      }
      return d;
    }
    for (std::size_t k = 0; k < N; ++k) {
      const auto [f1, f2] = line_partials(f, k, +1.0);
      d.grad[k * n_] = f1;
      d.hess[k * n_ * n_] = f2;
      if (n_ > 1) {
        const double t = tangential(k, f1, f2);
        for (int a = 1; a < n_; ++a) d.hess[(k * n_ + a) * n_ + a] = t;
      }
    }
    return d;
  }

  ScalarDerivatives scalar_derivatives(std::span<const double> f) const {
    check(f);
    const std::size_t N = node_count();
    ScalarDerivatives out;
    out.grad_sq.resize(N);
    out.lap.resize(N);
    out.q.resize(N);
    if (mode_ == GridMode::latlong) {
      for (std::size_t k = 0; k < N; ++k) {
        const auto p = latlong_partials(f, k, +1.0);
        const double s = std::sin(coords_[k][0]), c = std::cos(coords_[k][0]);
        const double g1 = p.ft, g2 = p.fp / s;
        const double h11 = p.ftt;
        const double h12 = p.ftp / s - c * p.fp / (s * s);
        const double h22 = p.fpp / (s * s) + c / s * p.ft;
        out.grad_sq[k] = g1 * g1 + g2 * g2;
        out.lap[k] = h11 + h22;
        out.q[k] = g1 * g1 * h11 + 2.0 * g1 * g2 * h12 + g2 * g2 * h22;
      }
      return out;
    }
    for (std::size_t k = 0; k < N; ++k) {
      const auto [f1, f2] = line_partials(f, k, +1.0);
      out.grad_sq[k] = f1 * f1;
      out.lap[k] = f2 + (n_ - 1) * tangential(k, f1, f2);
      out.q[k] = f1 * f1 * f2;
    }
    return out;
  }

  /// Covariant derivative (nabla T)(e_i, e_j) of a 1-form given by frame components (n per node).
  std::vector<double> covariant_derivative(std::span<const double> t) const {
    const std::size_t N = node_count();
    if (t.size() != N * n_) throw ShapeError("covariant_derivative: expected n components per node");
    std::vector<double> out(N * n_ * n_, 0.0);
    if (mode_ == GridMode::latlong) {
      std::vector<double> t1(N), t2(N);
      for (std::size_t k = 0; k < N; ++k) {
        t1[k] = t[2 * k];
        t2[k] = t[2 * k + 1];
      }
      for (std::size_t k = 0; k < N; ++k) {
        // Frame components flip sign across the pole.
        const auto a = latlong_partials(t1, k, -1.0);
        const auto b = latlong_partials(t2, k, -1.0);
        const double s = std::sin(coords_[k][0]), c = std::cos(coords_[k][0]);
        out[4 * k] = a.ft;
        out[4 * k + 1] = b.ft;
        out[4 * k + 2] = a.fp / s - c / s * t2[k];
        out[4 * k + 3] = b.fp / s + c / s * t1[k];
      }
      return out;
    }
    std::vector<double> t1(N);
    for (std::size_t k = 0; k < N; ++k) t1[k] = t[k * n_];
    for (std::size_t k = 0; k < N; ++k) {
      // The theta-component of an axially symmetric 1-form is odd at the poles.
      const auto [d1, d2] = line_partials(t1, k, -1.0);
      out[k * n_ * n_] = d1;
      if (n_ > 1) {
        double tang;
        if (is_pole(k)) {
          tang = d1;
        } else {
          tang = std::cos(coords_[k][0]) / std::sin(coords_[k][0]) * t1[k];
        }
        for (int a = 1; a < n_; ++a) out[(k * n_ + a) * n_ + a] = tang;
      }
      (void)d2;
    }
    return out;
  }

  /// Discrete Laplacian as a sparse matrix; L * f equals laplacian(f).
  Eigen::SparseMatrix<double> laplacian_matrix() const {
    const auto N = static_cast<Eigen::Index>(node_count());
    std::vector<Eigen::Triplet<double>> trip;
    auto add = [&](std::size_t row, std::size_t col, double v) {
      trip.emplace_back(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col), v);
    };
    if (mode_ == GridMode::latlong) {
      const double ht = h_, hp = 2.0 * std::numbers::pi / cols_;
      for (int i = 0; i < rows_; ++i) {
        const double th = coords_[idx(i, 0)][0];
        const double s = std::sin(th), c = std::cos(th);
        for (int j = 0; j < cols_; ++j) {
          const std::size_t k = idx(i, j);
          const std::size_t up = ghost(i + 1, j), dn = ghost(i - 1, j);
          add(k, up, 1.0 / (ht * ht) + c / s / (2.0 * ht));
          add(k, dn, 1.0 / (ht * ht) - c / s / (2.0 * ht));
          add(k, k, -2.0 / (ht * ht) - 2.0 / (hp * hp * s * s));
          add(k, idx(i, (j + 1) % cols_), 1.0 / (hp * hp * s * s));
          add(k, idx(i, (j + cols_ - 1) % cols_), 1.0 / (hp * hp * s * s));
        }
      }
    } else {
      const std::size_t M = node_count();
      for (std::size_t k = 0; k < M; ++k) {
        const double c1 = 1.0 / (12.0 * h_), c2 = 1.0 / (12.0 * h_ * h_);
        const int offs[4] = {-2, -1, 1, 2};
        const double w1[4] = {c1, -8.0 * c1, 8.0 * c1, -c1};
        const double w2[4] = {-c2, 16.0 * c2, 16.0 * c2, -c2};
        double tang1 = 0.0, tang2 = 0.0;  // tangential term = tang1 * f' + tang2 * f''
        if (mode_ == GridMode::axisym) {
          if (is_pole(k)) {
            tang2 = n_ - 1;
          } else {
            tang1 = (n_ - 1) * std::cos(coords_[k][0]) / std::sin(coords_[k][0]);
          }
        }
        add(k, k, -30.0 * c2 * (1.0 + tang2));
        for (int a = 0; a < 4; ++a) {
          const std::size_t col = line_index(static_cast<long>(k) + offs[a]);
          add(k, col, w2[a] * (1.0 + tang2) + tang1 * w1[a]);
        }
      }
    }
    Eigen::SparseMatrix<double> L(N, N);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
  }

  /// Effective spacing 2 / sqrt(rho), rho a Gershgorin bound on the Laplacian's spectral radius.
  double stiffness_spacing() const { return stiff_h_; }

  bool is_pole(std::size_t k) const {
    return mode_ == GridMode::axisym && (k == 0 || k + 1 == node_count());
  }

 private:
  double gershgorin_spacing() const {
    const auto L = laplacian_matrix();
    std::vector<double> rowsum(node_count(), 0.0);
    for (Eigen::Index c = 0; c < L.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(L, c); it; ++it) {
        rowsum[static_cast<std::size_t>(it.row())] += std::abs(it.value());
      }
    }
    double rho = 0.0;
    for (double v : rowsum) rho = std::max(rho, v);
    return 2.0 / std::sqrt(rho);
  }

  struct LatLongPartials {
    double ft, fp, ftt, fpp, ftp;
  };

  void check(std::span<const double> f) const {
    if (f.size() != node_count()) {
      throw ShapeError("node field has " + std::to_string(f.size()) + " entries, grid has " +
                       std::to_string(node_count()));
    }
  }

  void build_circle() {
    const int N = res_;
    h_ = 2.0 * std::numbers::pi / N;
    coords_.resize(N);
    weights_.assign(N, h_);
    for (int j = 0; j < N; ++j) coords_[j] = {h_ * j, 0.0};
    rows_ = N;
    cols_ = 1;
  }

  void build_axisym() {
    const int N = res_;
    h_ = std::numbers::pi / N;
    coords_.resize(N + 1);
    for (int j = 0; j <= N; ++j) coords_[j] = {h_ * j, 0.0};
    coords_[N][0] = std::numbers::pi;
    // Clenshaw-Curtis with sin^{n-1} folded in: integrate the cosine interpolant exactly.
    const int m = n_ - 1;
    std::vector<double> moments(N + 1);
    for (int k = 0; k <= N; ++k) moments[k] = cos_sin_moment(k, m);
    weights_.assign(N + 1, 0.0);
    const double scale = sphere_area(n_ - 1) * 2.0 / N;
    for (int j = 0; j <= N; ++j) {
      detail::CompensatedSum s;
      for (int k = 0; k <= N; ++k) {
        const double ck = (k == 0 || k == N) ? 0.5 : 1.0;
        s.add(ck * moments[k] * std::cos(std::numbers::pi * static_cast<double>((static_cast<long>(k) * j) % (2 * N)) / N));
      }
      const double cj = (j == 0 || j == N) ? 0.5 : 1.0;
      weights_[j] = scale * cj * s.value();
    }
    rows_ = N + 1;
    cols_ = 1;
  }

  void build_latlong() {
    rows_ = res_;
    cols_ = 2 * res_;
    h_ = std::numbers::pi / rows_;
    const double hp = 2.0 * std::numbers::pi / cols_;
    coords_.resize(static_cast<std::size_t>(rows_) * cols_);
    weights_.resize(coords_.size());
    // Fejer's first rule in x = cos(theta) on the shifted nodes, trapezoid in psi.
    for (int i = 0; i < rows_; ++i) {
      const double th = (i + 0.5) * h_;
      double s = 0.0;
      for (int k = 1; k <= rows_ / 2; ++k) s += std::cos(2.0 * k * th) / (4.0 * k * k - 1.0);
      const double w = (2.0 / rows_) * (1.0 - 2.0 * s);
      for (int j = 0; j < cols_; ++j) {
        coords_[idx(i, j)] = {th, hp * j};
        weights_[idx(i, j)] = w * hp;
      }
    }
  }

  /// Integral over [0, pi] of cos(k t) sin^m(t), from the binomial expansion of sin^m.
  static double cos_sin_moment(int k, int m) {
    using C = std::complex<double>;
    C total = 0.0;
    double binom = 1.0;
    auto exp_int = [](int q) -> C {
      if (q == 0) return C(std::numbers::pi, 0.0);
      const double num = ((q % 2 == 0) ? 1.0 : -1.0) - 1.0;
      return C(0.0, -num / q);  // (e^{i q pi} - 1) / (i q)
    };
    for (int j = 0; j <= m; ++j) {
      const int l = 2 * j - m;
      const double sign = ((m - j) % 2 == 0) ? 1.0 : -1.0;
      total += sign * binom * 0.5 * (exp_int(l + k) + exp_int(l - k));
      binom = binom * (m - j) / (j + 1);
    }
    C denom = std::pow(C(0.0, 2.0), m);
    return (total / denom).real();
  }

  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * cols_ + j; }

  /// Node for row i (possibly -1 or rows) and column j, crossing the pole if needed.
  std::size_t ghost(int i, int j) const {
    if (i < 0) return idx(-1 - i, (j + cols_ / 2) % cols_);
    if (i >= rows_) return idx(2 * rows_ - 1 - i, (j + cols_ / 2) % cols_);
    return idx(i, j);
  }

  /// Index on the 1-D grid after periodic wrap (circle) or reflection (axisym).
  std::size_t line_index(long j) const {
    const long N = static_cast<long>(node_count());
    if (mode_ == GridMode::circle) return static_cast<std::size_t>(((j % N) + N) % N);
    const long last = N - 1;
    if (j < 0) return static_cast<std::size_t>(-j);
    if (j > last) return static_cast<std::size_t>(2 * last - j);
    return static_cast<std::size_t>(j);
  }

  /// 4th-order first and second derivatives along the line; parity -1 makes ghosts odd.
  std::pair<double, double> line_partials(std::span<const double> f, std::size_t k, double parity) const {
    const long N = static_cast<long>(node_count());
    const long j = static_cast<long>(k);
    auto at = [&](long q) {
      const double v = f[line_index(q)];
      if (mode_ == GridMode::axisym && (q < 0 || q >= N)) return parity * v;
      return v;
    };
    const double fm2 = at(j - 2), fm1 = at(j - 1), f0 = f[k], fp1 = at(j + 1), fp2 = at(j + 2);
    const double d1 = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h_);
    // Differences about f0 keep the roundoff proportional to the local variation, not to |f|.
    const double d2 = (16.0 * ((fp1 - f0) + (fm1 - f0)) - ((fp2 - f0) + (fm2 - f0))) / (12.0 * h_ * h_);
    return {d1, d2};
  }

  /// Hessian entry along each tangential frame vector of an axially symmetric field.
  double tangential(std::size_t k, double f1, double f2) const {
    if (mode_ == GridMode::circle) return 0.0;
    if (is_pole(k)) return f2;
    return std::cos(coords_[k][0]) / std::sin(coords_[k][0]) * f1;
  }

  LatLongPartials latlong_partials(std::span<const double> f, std::size_t k, double parity) const {
    const int i = static_cast<int>(k / cols_), j = static_cast<int>(k % cols_);
    const double ht = h_, hp = 2.0 * std::numbers::pi / cols_;
    auto at = [&](int ii, int jj) {
      jj = ((jj % cols_) + cols_) % cols_;
      const double v = f[ghost(ii, jj)];
      return (ii < 0 || ii >= rows_) ? parity * v : v;
    };
    const double f0 = f[k];
    const double fu = at(i + 1, j), fd = at(i - 1, j);
    const double fr = at(i, j + 1), fl = at(i, j - 1);
    LatLongPartials p{};
    p.ft = (fu - fd) / (2.0 * ht);
    p.fp = (fr - fl) / (2.0 * hp);
    p.ftt = ((fu - f0) + (fd - f0)) / (ht * ht);
    p.fpp = ((fr - f0) + (fl - f0)) / (hp * hp);
    p.ftp = ((at(i + 1, j + 1) - at(i + 1, j - 1)) - (at(i - 1, j + 1) - at(i - 1, j - 1))) / (4.0 * ht * hp);
    return p;
  }

  GridMode mode_ = GridMode::axisym;
  int n_ = 2;
  int res_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  double h_ = 0.0;
  std::vector<std::array<double, 2>> coords_;
  std::vector<double> weights_;
  double stiff_h_ = 0.0;
};

inline SphereGrid build_grid(GridMode mode, int n, int resolution) {
  return SphereGrid::build(mode, n, resolution);
}

inline std::vector<double> gradient_sq(const SphereGrid& g, std::span<const double> f) {
  return g.gradient_sq(f);
}
inline NodeDerivatives hessian(const SphereGrid& g, std::span<const double> f) { return g.derivatives(f); }
inline std::vector<double> laplacian(const SphereGrid& g, std::span<const double> f) {
  return g.laplacian(f);
}
inline double integrate(const SphereGrid& g, std::span<const double> f) { return g.integrate(f); }

/// Node field of Lap|Df|^2 - 2|D^2 f|^2 - 2<Df, D Lap f> - 2(n-1)|Df|^2, which vanishes
/// identically for smooth f on the round sphere.
inline std::vector<double> ricci_identity_residual(const SphereGrid& g, std::span<const double> f) {
  const auto d = g.derivatives(f);
  const auto s = g.scalar_derivatives(f);
  const auto lap_grad = g.laplacian(s.grad_sq);
  const auto dlap = g.derivatives(s.lap);
  const int n = g.n();
  std::vector<double> out(g.node_count());
  for (std::size_t k = 0; k < out.size(); ++k) {
    double hess_sq = 0.0, cross = 0.0;
    for (int i = 0; i < n; ++i) {
      cross += d.g(k, i) * dlap.g(k, i);
      for (int j = 0; j < n; ++j) hess_sq += d.h(k, i, j) * d.h(k, i, j);
    }
    out[k] = lap_grad[k] - 2.0 * hess_sq - 2.0 * cross - 2.0 * (n - 1) * s.grad_sq[k];
  }
  return out;
}

}  // namespace warpflow
