#pragma once

// Uniform 1D mesh with a conforming piecewise-linear space, the shared
// two-point Gauss rule and evaluation of state fields at quadrature points.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "phydro/assembled.hpp"
#include "phydro/errors.hpp"
#include "phydro/thermo.hpp"

namespace phydro {

class Mesh {
 public:
  Mesh(double a, double b, int n_cells, bool periodic)
      : a_(a), b_(b), n_cells_(n_cells), periodic_(periodic) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
      std::ostringstream os;
      os << "mesh requires a < b (got a = " << a << ", b = " << b << ")";
      throw ConfigError(os.str());
    }
    if (n_cells < 2) throw ConfigError("mesh requires at least two cells");
    h_ = (b - a) / n_cells;
  }

  double a() const { return a_; }
  double b() const { return b_; }
  double length() const { return b_ - a_; }
  int n_cells() const { return n_cells_; }
  bool periodic() const { return periodic_; }
  double h() const { return h_; }

  /// Number of independent nodal coefficients per scalar field.
  int n_free() const { return periodic_ ? n_cells_ : n_cells_ + 1; }
  int n_qp() const { return 2 * n_cells_; }

  /// Coordinate of mesh node i, i in [0, n_cells].
  double node(int i) const { return a_ + i * h_; }

  std::vector<double> nodes() const {
    std::vector<double> x(n_free());
    for (int i = 0; i < n_free(); ++i) x[i] = node(i);
    return x;
  }

  /// Free-node indices of the left and right vertex of cell c.
  std::array<int, 2> cell_nodes(int c) const {
    const int right = (periodic_ && c == n_cells_ - 1) ? 0 : c + 1;
    return {c, right};
  }

  /// Location of quadrature point k (0 or 1) in cell c.
  double qp_x(int c, int k) const {
    static const double offset = 0.5 / std::sqrt(3.0);
    const double mid = a_ + (c + 0.5) * h_;
    return k == 0 ? mid - offset * h_ : mid + offset * h_;
  }
  double qp_weight() const { return 0.5 * h_; }

  /// Values of the two local hat functions at quadrature point k.
  std::array<double, 2> shape(int k) const {
    static const double g = 0.5 / std::sqrt(3.0);
    const double xi = k == 0 ? 0.5 - g : 0.5 + g;  // position within the cell in [0,1]
    return {1.0 - xi, xi};
  }
  /// Derivatives of the two local hat functions (constant on a cell).
  std::array<double, 2> dshape() const { return {-1.0 / h_, 1.0 / h_}; }

 private:
  double a_, b_;
  int n_cells_;
  bool periodic_;
  double h_ = 0.0;
};

inline Mesh build_mesh(double a, double b, int n_cells, bool periodic) {
  return Mesh(a, b, n_cells, periodic);
}

enum class Field : int { rho = 0, M = 1, u = 2 };

/// Nodal coefficients of (rho, M, u), stacked as one vector of length 3N.
struct State {
  Eigen::VectorXd z;

  State() = default;
  explicit State(int n_free) : z(Eigen::VectorXd::Zero(3 * n_free)) {}
  explicit State(Eigen::VectorXd stacked) : z(std::move(stacked)) {}

  int n() const { return static_cast<int>(z.size() / 3); }
  auto field(Field f) { return z.segment(static_cast<int>(f) * n(), n()); }
  auto field(Field f) const { return z.segment(static_cast<int>(f) * n(), n()); }
  auto rho() { return field(Field::rho); }
  auto rho() const { return field(Field::rho); }
  auto M() { return field(Field::M); }
  auto M() const { return field(Field::M); }
  auto u() { return field(Field::u); }
  auto u() const { return field(Field::u); }
};

inline void check_layout(const Mesh& mesh, const State& z) {
  if (z.z.size() != 3 * mesh.n_free()) {
    std::ostringstream os;
    os << "state has " << z.z.size() << " coefficients, mesh expects " << 3 * mesh.n_free();
    throw ConfigError(os.str());
  }
}

inline void check_admissible(const Mesh& mesh, const State& z) {
  check_layout(mesh, z);
  for (int i = 0; i < z.n(); ++i) check_admissible(z.rho()[i], z.u()[i]);
}

/// Nodal interpolant of a callable on the free nodes.
template <class F>
Eigen::VectorXd interpolate(const Mesh& mesh, F&& f) {
  Eigen::VectorXd out(mesh.n_free());
  for (int i = 0; i < mesh.n_free(); ++i) out[i] = f(mesh.node(i));
  return out;
}

/// Value and slope of a P1 field at quadrature point k of cell c.
inline std::array<double, 2> eval_p1(const Mesh& mesh, const Eigen::Ref<const Eigen::VectorXd>& coef,
                                     int c, int k) {
  const auto [l, r] = mesh.cell_nodes(c);
  const auto N = mesh.shape(k);
  return {N[0] * coef[l] + N[1] * coef[r], (coef[r] - coef[l]) / mesh.h()};
}

/// Two-point Gauss quadrature of a pointwise callable.
template <class F>
double integrate(const Mesh& mesh, F&& f) {
  double sum = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c)
    for (int k = 0; k < 2; ++k) sum += mesh.qp_weight() * f(mesh.qp_x(c, k));
  return sum;
}

/// Quadrature of values already sampled at the quadrature points (index 2c + k).
inline double integrate_qp(const Mesh& mesh, const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += mesh.qp_weight() * v;
  return sum;
}

/// Consistent P1 mass matrix of one scalar field.
inline AssembledOperator mass_matrix(const Mesh& mesh) {
  const int n = mesh.n_free();
  AssembledOperator op;
  op.matrix = Eigen::MatrixXd::Zero(n, n);
  op.symmetry = SymmetryClass::symmetric_psd;
  const double h = mesh.h();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto [l, r] = mesh.cell_nodes(c);
    op.matrix(l, l) += h / 3.0;
    op.matrix(r, r) += h / 3.0;
    op.matrix(l, r) += h / 6.0;
    op.matrix(r, l) += h / 6.0;
  }
  return op;
}

/// Sparse Cholesky factorization of the scalar mass matrix, reused for every
/// field and every right-hand side.
class MassSolver {
 public:
  explicit MassSolver(const Mesh& mesh) : n_(mesh.n_free()) {
    std::vector<Eigen::Triplet<double>> trip;
    const double h = mesh.h();
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const auto [l, r] = mesh.cell_nodes(c);
      trip.emplace_back(l, l, h / 3.0);
      trip.emplace_back(r, r, h / 3.0);
      trip.emplace_back(l, r, h / 6.0);
      trip.emplace_back(r, l, h / 6.0);
    }
    Eigen::SparseMatrix<double> m(n_, n_);
    m.setFromTriplets(trip.begin(), trip.end());
    solver_.compute(m);
    if (solver_.info() != Eigen::Success) throw ConfigError("mass matrix factorization failed");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return solver_.solve(rhs); }

  /// Solves blockwise for a stacked (rho, M, u) vector.
  Eigen::VectorXd solve_stacked(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd out(rhs.size());
    for (int f = 0; f < 3; ++f) out.segment(f * n_, n_) = solver_.solve(rhs.segment(f * n_, n_).eval());
    return out;
  }

 private:
  int n_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

struct QuadPointData {
  double x = 0.0;
  double weight = 0.0;
  double rho = 0.0, M = 0.0, u = 0.0;
  double drho = 0.0, dM = 0.0, du = 0.0;
  double v = 0.0, dv = 0.0;
  ThermoPoint thermo;
  double dtheta = 0.0, dtau = 0.0, dp = 0.0, dmu = 0.0, ds = 0.0;
};

/// Interpolated state, velocity by the quotient rule and thermodynamic
/// gradients by the chain rule through the closure, at one quadrature point.
inline QuadPointData eval_with_gradients(const Mesh& mesh, const State& z, const Material& m,
                                         int c, int k) {
  QuadPointData q;
  q.x = mesh.qp_x(c, k);
  q.weight = mesh.qp_weight();
  const auto r = eval_p1(mesh, z.rho(), c, k);
  const auto mm = eval_p1(mesh, z.M(), c, k);
  const auto e = eval_p1(mesh, z.u(), c, k);
  q.rho = r[0];
  q.drho = r[1];
  q.M = mm[0];
  q.dM = mm[1];
  q.u = e[0];
  q.du = e[1];
  q.thermo = eval_eos(q.rho, q.u, m);
  q.v = q.M / q.rho;
  q.dv = (q.rho * q.dM - q.M * q.drho) / (q.rho * q.rho);
  const ThermoPartials d = eos_partials(q.thermo, m);
  q.dtheta = d.theta_rho * q.drho + d.theta_u * q.du;
  q.dtau = -q.dtheta / (q.thermo.theta * q.thermo.theta);
  q.dp = d.p_rho * q.drho + d.p_u * q.du;
  q.dmu = d.mu_rho * q.drho + d.mu_u * q.du;
  q.ds = d.s_rho * q.drho + d.s_u * q.du;
  return q;
}

/// All quadrature points, ordered 2c + k.
inline std::vector<QuadPointData> eval_all(const Mesh& mesh, const State& z, const Material& m) {
  check_layout(mesh, z);
  std::vector<QuadPointData> out;
  out.reserve(mesh.n_qp());
  for (int c = 0; c < mesh.n_cells(); ++c)
    for (int k = 0; k < 2; ++k) out.push_back(eval_with_gradients(mesh, z, m, c, k));
  return out;
}

enum class Endpoint { left, right };

struct BoundaryTrace {
  Endpoint endpoint = Endpoint::left;
  int node = 0;
  double nu = 0.0;  // outward normal, -1 or +1
  double rho = 0.0, M = 0.0, u = 0.0, v = 0.0;
  ThermoPoint thermo;
  double dtheta = 0.0, dv = 0.0;  // one-sided slopes from the end cell
  double q_nu = 0.0;              // -kappa dtheta nu
  double sigma_nu = 0.0;          // (lambda + 2 eta) dv nu
};

inline BoundaryTrace trace(const Mesh& mesh, const State& z, const Material& m, Endpoint end) {
  if (mesh.periodic()) throw TopologyError("boundary trace requested on a periodic mesh");
  check_layout(mesh, z);
  BoundaryTrace t;
  t.endpoint = end;
  const int cell = end == Endpoint::left ? 0 : mesh.n_cells() - 1;
  const auto [l, r] = mesh.cell_nodes(cell);
  t.node = end == Endpoint::left ? l : r;
  t.nu = end == Endpoint::left ? -1.0 : 1.0;
  t.rho = z.rho()[t.node];
  t.M = z.M()[t.node];
  t.u = z.u()[t.node];
  t.thermo = eval_eos(t.rho, t.u, m);
  t.v = t.M / t.rho;
  const double h = mesh.h();
  const double drho = (z.rho()[r] - z.rho()[l]) / h;
  const double dM = (z.M()[r] - z.M()[l]) / h;
  const double du = (z.u()[r] - z.u()[l]) / h;
  const ThermoPartials d = eos_partials(t.thermo, m);
  t.dtheta = d.theta_rho * drho + d.theta_u * du;
  t.dv = (t.rho * dM - t.M * drho) / (t.rho * t.rho);
  t.q_nu = -m.kappa * t.dtheta * t.nu;
  t.sigma_nu = m.longitudinal_viscosity() * t.dv * t.nu;
  return t;
}

}  // namespace phydro
