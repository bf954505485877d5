#pragma once

#include <Eigen/Dense>

namespace pushpull {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

double spectral_radius(const Mat& m);
/// Largest singular value.
double norm2(const Mat& m);
double norm2(const CMat& m);
/// Largest eigenvalue of a Hermitian positive semidefinite matrix.
double hermitian_norm(const CMat& m);

/// Entrywise diag(a) * m * diag(b).
CMat scale_rows_cols(const CMat& m, const Vec& a, const Vec& b);

/// Similarity transform T = W U^H built from a complex Schur form
/// M = U Delta U^H and W = diag(1, 1/t, 1/t^2, ...). Shrinking t pushes the
/// strictly upper part of W Delta W^-1 towards zero, so ||T M T^-1||_2
/// approaches the spectral radius from above. Because min(w) = 1 and U is
/// unitary, ||T x||_2 >= ||x||_2 for every x.
struct ScaledSchur {
  CMat U;        ///< unitary Schur vectors
  Vec w;         ///< diagonal of W, w(0) = 1, nondecreasing
  CMat scaled;   ///< W Delta W^-1
  double t = 1;  ///< geometric ratio used for w
  double sigma = 0;  ///< ||W Delta W^-1||_2
  double rho = 0;    ///< max |diag(Delta)|

  CMat transform() const;          ///< W U^H
  CMat inverse_transform() const;  ///< U W^-1
  /// W U^H X U W^-1 without forming the ill-conditioned factors.
  CMat conjugate(const CMat& x) const;
};

/// Finds the largest t in (0, 1] with sigma <= target (bisection) and
/// returns the corresponding scaled Schur form. Throws std::runtime_error
/// if target < rho.
ScaledSchur scaled_schur(const CMat& m, double target);
ScaledSchur scaled_schur(const Mat& m, double target);

/// Same construction, but chooses the largest t whose strictly upper part
/// of W Delta W^-1 has 2-norm at most offdiag_target.
ScaledSchur scaled_schur_offdiag(const CMat& m, double offdiag_target);

}  // namespace pushpull
