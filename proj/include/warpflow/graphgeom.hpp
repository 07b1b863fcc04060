#pragma once

// Geometry of a radial graph r = r(theta) over the sphere, written in the
// variable gamma with d gamma / dr = 1 / phi. Tensors are stored per node as
// row-major n x n blocks in the sigma-orthonormal frame of the grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "warpflow/grid.hpp"
#include "warpflow/warp.hpp"

namespace warpflow {

struct GraphState {
  std::shared_ptr<const SphereGrid> grid;
  std::vector<double> gamma;
  double t = 0.0;

  const SphereGrid& g() const {
    if (!grid) throw StateError("GraphState has no grid");
    return *grid;
  }
};

/// Graph state of the slice r = const.
inline GraphState slice_state(const WarpedSpace& space, std::shared_ptr<const SphereGrid> grid, double r) {
  GraphState s;
  s.gamma.assign(grid->node_count(), space.gamma_of_r(r));
  s.grid = std::move(grid);
  return s;
}

namespace detail {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;

/// Elementary symmetric polynomials e_1..e_3 of the entries of k.
inline std::array<double, 3> elementary_symmetric(std::span<const double> k) {
  double e1 = 0.0, e2 = 0.0, e3 = 0.0;
  for (double x : k) {
    e3 += x * e2;
    e2 += x * e1;
    e1 += x;
  }
  return {e1, e2, e3};
}

/// Radii, warping values and domain checks shared by every per-node computation.
struct RadialNode {
  double r;
  PhiValues p;
};

inline RadialNode radial_node(const WarpedSpace& space, double gamma, std::size_t node) {
  if (!std::isfinite(gamma)) throw DomainEscape(node, gamma, "non-finite gamma at node " + std::to_string(node));
  if (gamma < space.gamma_lo() || gamma > space.gamma_hi()) {
    throw DomainEscape(node, gamma,
                       "graph left the working interval at node " + std::to_string(node) +
                           " (gamma = " + std::to_string(gamma) + ")");
  }
  const double r = space.r_of_gamma(gamma);
  return {r, space.eval_phi(std::clamp(r, space.r_min(), space.r_max()))};
}

}  // namespace detail

struct GeometryFields {
  int n = 0;
  std::size_t nodes = 0;
  std::vector<double> r, omega, u, grad_sq;
  std::vector<double> phi, dphi, d2phi;
  std::vector<double> lap_gamma, q_gamma;
  std::vector<double> dgamma;  // frame gradient of gamma, n per node
  std::vector<double> r_grad;  // frame components of dr = phi d gamma
  std::vector<double> g, g_inv, h, weingarten;
  std::vector<double> H, sigma2, sigma3;
  std::vector<double> kappa;  // ascending, n per node
  std::vector<double> s_min;
  std::vector<double> dmu;  // quadrature weight times phi^n omega

  double tensor(const std::vector<double>& t, std::size_t k, int i, int j) const {
    return t[(k * n + i) * n + j];
  }

  /// Surface integral over M of a node field.
  double integrate(std::span<const double> f) const {
    if (f.size() != nodes) throw ShapeError("GeometryFields::integrate: size mismatch");
    return detail::dot_fixed_order(f, dmu);
  }

  double area() const {
    detail::CompensatedSum s;
    for (double w : dmu) s.add(w);
    return s.value();
  }
};

inline GeometryFields compute_fields(const WarpedSpace& space, const GraphState& state) {
  const SphereGrid& grid = state.g();
  if (state.gamma.size() != grid.node_count()) throw ShapeError("compute_fields: gamma size mismatch");
  if (grid.n() != space.n()) throw ShapeError("compute_fields: grid and space dimensions differ");
  const int n = grid.n();
  const std::size_t N = grid.node_count();
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  GeometryFields f;
  f.n = n;
  f.nodes = N;
  for (auto* v : {&f.r, &f.omega, &f.u, &f.grad_sq, &f.phi, &f.dphi, &f.d2phi, &f.lap_gamma, &f.q_gamma,
                  &f.H, &f.sigma2, &f.sigma3, &f.s_min, &f.dmu}) {
    v->resize(N);
  }
  f.r_grad.resize(N * n);
  f.kappa.resize(N * n);
  for (auto* v : {&f.g, &f.g_inv, &f.h, &f.weingarten}) v->resize(N * nn);

  const auto d = grid.derivatives(state.gamma);
  f.dgamma = d.grad;
  const auto& w = grid.quad_weights();
  detail::SmallMatrix D(n, n), G(n, n), Gi(n, n), Hm(n, n), Root(n, n), A(n, n);
  detail::SmallVector p(n);
  Eigen::SelfAdjointEigenSolver<detail::SmallMatrix> eig(n);
  for (std::size_t k = 0; k < N; ++k) {
    const auto rn = detail::radial_node(space, state.gamma[k], k);
    const PhiValues& pv = rn.p;
    for (int i = 0; i < n; ++i) {
      p(i) = d.g(k, i);
      for (int j = 0; j < n; ++j) D(i, j) = d.h(k, i, j);
    }
    const double psq = p.squaredNorm();
    const double om = std::sqrt(1.0 + psq);
    const double u = pv.phi / om;
    const auto I = detail::SmallMatrix::Identity(n, n);
    const detail::SmallMatrix ppt = p * p.transpose();
    G = pv.phi * pv.phi * (I + ppt);
    Gi = (I - ppt / (om * om)) / (pv.phi * pv.phi);
    Hm = (pv.phi / om) * (-D + pv.dphi * ppt + pv.dphi * I);
    // g^{-1/2} = phi^{-1} (I + (1/omega - 1) p p^T / |p|^2)
    Root = I;
    if (psq > 0.0) Root += (1.0 / om - 1.0) * ppt / psq;
    Root /= pv.phi;
    A = Root * Hm * Root;
    A = 0.5 * (A + A.transpose());
    eig.compute(A, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();

    f.r[k] = rn.r;
    f.phi[k] = pv.phi;
    f.dphi[k] = pv.dphi;
    f.d2phi[k] = pv.d2phi;
    f.omega[k] = om;
    f.u[k] = u;
    f.grad_sq[k] = psq;
    double lap = 0.0, q = 0.0;
    for (int i = 0; i < n; ++i) {
      lap += D(i, i);
      for (int j = 0; j < n; ++j) q += p(i) * p(j) * D(i, j);
      f.r_grad[k * n + i] = pv.phi * p(i);
      f.kappa[k * n + i] = ev(i);
    }
    f.lap_gamma[k] = lap;
    f.q_gamma[k] = q;
    const detail::SmallMatrix W = Gi * Hm;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::size_t at = k * nn + static_cast<std::size_t>(i) * n + j;
        f.g[at] = G(i, j);
        f.g_inv[at] = Gi(i, j);
        f.h[at] = Hm(i, j);
        f.weingarten[at] = W(i, j);
      }
    const auto es = detail::elementary_symmetric(std::span<const double>(&f.kappa[k * n], n));
    f.H[k] = es[0];
    f.sigma2[k] = es[1];
    f.sigma3[k] = es[2];
    f.s_min[k] = (pv.dphi > 0.0) ? ev(0) - u * pv.d2phi / (pv.phi * pv.dphi)
                                 : std::numeric_limits<double>::quiet_NaN();
    f.dmu[k] = w[k] * std::pow(pv.phi, n) * om;
  }
  return f;
}

/// H = n phi' / (phi omega) - (Lap gamma - gamma^i gamma^k gamma_ik / omega^2) / (phi omega).
inline std::vector<double> mean_curvature_graphform(const WarpedSpace& space, const GraphState& state) {
  const SphereGrid& grid = state.g();
  const auto s = grid.scalar_derivatives(state.gamma);
  const int n = grid.n();
  std::vector<double> H(grid.node_count());
  for (std::size_t k = 0; k < H.size(); ++k) {
    const auto rn = detail::radial_node(space, state.gamma[k], k);
    const double om2 = 1.0 + s.grad_sq[k];
    const double om = std::sqrt(om2);
    H[k] = (n * rn.p.dphi - (s.lap[k] - s.q[k] / om2)) / (rn.p.phi * om);
  }
  return H;
}

/// epsilon with |D gamma|^2 <= epsilon at every node.
inline double closeness(const WarpedSpace& space, const GraphState& state) {
  (void)space;
  const auto gsq = state.g().gradient_sq(state.gamma);
  double e = 0.0;
  for (double v : gsq) e = std::max(e, v);
  return e;
}

struct ConformalResidual {
  double max_residual = 0.0;  // max over nodes and frame components of |nabla T - (phi' g - u h)|
  double trace_integral = 0.0;  // integral over M of g^{ij} nabla_j T_i, zero by the divergence theorem
  double trace_mismatch = 0.0;  // max over nodes of |g^{ij} nabla_j T_i - (n phi' - u H)|
};

/// Differentiates T_i = <phi d_r, e_i> = phi^2 gamma_i along M and compares with phi' g - u h.
inline ConformalResidual conformal_identity_residual(const WarpedSpace& space, const GraphState& state) {
  const SphereGrid& grid = state.g();
  const auto f = compute_fields(space, state);
  const int n = f.n;
  const std::size_t N = f.nodes;
  std::vector<double> T(N * n);
  for (std::size_t k = 0; k < N; ++k)
    for (int i = 0; i < n; ++i) T[k * n + i] = f.phi[k] * f.phi[k] * f.dgamma[k * n + i];
  const auto dT = grid.covariant_derivative(T);
  const auto hess = grid.derivatives(state.gamma);
  ConformalResidual out;
  std::vector<double> trace(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double phi2 = f.phi[k] * f.phi[k];
    const double om2 = f.omega[k] * f.omega[k];
    const double psq = f.grad_sq[k];
    double tr = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double gi = f.dgamma[k * n + i], gj = f.dgamma[k * n + j];
        // Difference of the induced and round connections contracted with T.
        const double ct = (phi2 * f.dphi[k] * ((2.0 + psq) * gi * gj - psq * (i == j ? 1.0 : 0.0)) +
                           phi2 * psq * hess.h(k, i, j)) / om2;
        const double nabla = dT[(k * n + j) * n + i] - ct;
        const double want = f.dphi[k] * f.tensor(f.g, k, i, j) - f.u[k] * f.tensor(f.h, k, i, j);
        out.max_residual = std::max(out.max_residual, std::abs(nabla - want));
        tr += f.tensor(f.g_inv, k, i, j) * nabla;
      }
    }
    trace[k] = tr;
    out.trace_mismatch = std::max(out.trace_mismatch, std::abs(tr - (n * f.dphi[k] - f.u[k] * f.H[k])));
  }
  out.trace_integral = f.integrate(trace);
  return out;
}

}  // namespace warpflow
