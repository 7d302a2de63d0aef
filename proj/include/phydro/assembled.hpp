#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <string>

namespace phydro {

enum class SymmetryClass { skew, symmetric_psd, general };

inline std::string to_string(SymmetryClass c) {
  switch (c) {
    case SymmetryClass::skew: return "skew";
    case SymmetryClass::symmetric_psd: return "symmetric-psd";
    case SymmetryClass::general: return "general";
  }
  return "general";
}

/// A dense matrix together with the symmetry it is supposed to carry.
/// `snapshot` is the stacked state the operator was assembled at (may be
/// empty for state-independent operators such as the mass matrix).
struct AssembledOperator {
  Eigen::MatrixXd matrix;
  SymmetryClass symmetry = SymmetryClass::general;
  Eigen::VectorXd snapshot;

  double max_abs() const { return matrix.size() == 0 ? 0.0 : matrix.cwiseAbs().maxCoeff(); }

  /// max |A + A^T| for skew operators, max |A - A^T| for symmetric ones.
  double symmetry_defect() const {
    if (matrix.size() == 0) return 0.0;
    switch (symmetry) {
      case SymmetryClass::skew: return (matrix + matrix.transpose()).cwiseAbs().maxCoeff();
      case SymmetryClass::symmetric_psd:
        return (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
      case SymmetryClass::general: return 0.0;
    }
    return 0.0;
  }

  /// Smallest eigenvalue of the symmetric part.
  double min_eigenvalue() const {
    if (matrix.size() == 0) return 0.0;
    const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// Checks the declared class: exact-zero-tolerant relative bounds.
  bool satisfies_class(double sym_tol = 1e-13, double psd_tol = 1e-10) const {
    const double scale = max_abs();
    if (symmetry == SymmetryClass::general) return true;
    if (symmetry_defect() > sym_tol * scale) return false;
    if (symmetry == SymmetryClass::symmetric_psd) return min_eigenvalue() >= -psd_tol * scale;
    return true;
  }
};

}  // namespace phydro
