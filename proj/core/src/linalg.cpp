#include "pushpull/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace pushpull {

double spectral_radius(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

// Largest singular value from the top eigenvalue of the smaller Gram
// matrix; relative accuracy is that of the eigensolver.
template <class M>
double top_singular_value(const M& m) {
  if (m.size() == 0) return 0.0;
  using G = Eigen::Matrix<typename M::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const G gram = m.rows() >= m.cols() ? G(m.adjoint() * m) : G(m * m.adjoint());
  Eigen::SelfAdjointEigenSolver<G> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace

double norm2(const Mat& m) { return top_singular_value(m); }

double norm2(const CMat& m) { return top_singular_value(m); }

double hermitian_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  const CMat h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

CMat scale_rows_cols(const CMat& m, const Vec& a, const Vec& b) {
  CMat out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) *= a(i) * b(j);
  }
  return out;
}

CMat ScaledSchur::transform() const {
  return scale_rows_cols(U.adjoint(), w, Vec::Ones(w.size()));
}

CMat ScaledSchur::inverse_transform() const {
  return scale_rows_cols(U, Vec::Ones(w.size()), w.cwiseInverse());
}

CMat ScaledSchur::conjugate(const CMat& x) const {
  return scale_rows_cols(U.adjoint() * x * U, w, w.cwiseInverse());
}

namespace {

// Delta_ij * t^(j-i) for the upper triangle; stays bounded as t -> 0.
CMat scaled_triangle(const CMat& delta, double t) {
  CMat out = delta;
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < delta.cols(); ++j) {
      out(i, j) *= std::pow(t, static_cast<double>(j - i));
    }
  }
  return out;
}

struct SchurParts {
  CMat U;
  CMat delta;
  double rho = 0;
};

SchurParts schur_parts(const CMat& m) {
  Eigen::ComplexSchur<CMat> schur(m);
  if (schur.info() != Eigen::Success) throw std::runtime_error("complex Schur failed");
  SchurParts parts;
  parts.U = schur.matrixU();
  parts.delta = schur.matrixT().triangularView<Eigen::Upper>();
  parts.rho = parts.delta.diagonal().cwiseAbs().maxCoeff();
  return parts;
}

// Largest t in (0, 1] with measure(t) <= target, by bisection on log t.
template <class F>
double largest_feasible_t(Eigen::Index n, double target, F measure) {
  if (measure(1.0) <= target) return 1.0;
  // Keep t^-(n-1) representable.
  const double log_floor =
      -150.0 * std::log(10.0) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  double lo = log_floor, hi = 0.0;
  if (measure(std::exp(lo)) > target) {
    throw std::runtime_error("scaled_schur: target unreachable within scaling range");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (measure(std::exp(mid)) <= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(lo);
}

ScaledSchur assemble(const SchurParts& parts, double t) {
  const Eigen::Index n = parts.delta.rows();
  ScaledSchur out;
  out.U = parts.U;
  out.rho = parts.rho;
  out.t = t;
  out.w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.w(i) = std::pow(t, -static_cast<double>(i));
  out.scaled = scaled_triangle(parts.delta, t);
  out.sigma = norm2(out.scaled);
  return out;
}

}  // namespace

ScaledSchur scaled_schur(const CMat& m, double target) {
  if (m.rows() == 0) return ScaledSchur{};
  const SchurParts parts = schur_parts(m);
  if (target < parts.rho) {
    std::ostringstream msg;
    msg << "scaled_schur: target " << target << " below spectral radius " << parts.rho;
    throw std::runtime_error(msg.str());
  }
  const double t = largest_feasible_t(m.rows(), target, [&](double s) {
    return norm2(scaled_triangle(parts.delta, s));
  });
  return assemble(parts, t);
}

ScaledSchur scaled_schur_offdiag(const CMat& m, double offdiag_target) {
  if (m.rows() == 0) return ScaledSchur{};
  const SchurParts parts = schur_parts(m);
  const CMat strict = parts.delta.triangularView<Eigen::StrictlyUpper>();
  const double t = largest_feasible_t(m.rows(), offdiag_target, [&](double s) {
    return norm2(scaled_triangle(strict, s));
  });
  return assemble(parts, t);
}

ScaledSchur scaled_schur(const Mat& m, double target) {
  return scaled_schur(CMat(m.cast<std::complex<double>>()), target);
}

}  // namespace pushpull
