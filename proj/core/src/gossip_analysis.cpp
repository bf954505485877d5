#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "pushpull/gossip.hpp"
#include "pushpull/mixing.hpp"

namespace pushpull {

std::vector<GossipOutcome> enumerate_outcomes(const Digraph& g_R, const Digraph& g_C) {
  if (g_R.size() != g_C.size()) throw std::invalid_argument("enumerate_outcomes: size mismatch");
  const std::size_t n = g_R.size();
  std::vector<GossipOutcome> out;
  for (AgentId i = 0; i < n; ++i) {
    std::vector<std::optional<AgentId>> js, ls;
    for (AgentId j : g_R.out_neighbors(i)) js.emplace_back(j);
    for (AgentId l : g_C.out_neighbors(i)) ls.emplace_back(l);
    if (js.empty()) js.emplace_back(std::nullopt);
    if (ls.empty()) ls.emplace_back(std::nullopt);
    const double p = 1.0 / (double(n) * double(js.size()) * double(ls.size()));
    for (const auto& j : js) {
      for (const auto& l : ls) out.push_back({i, j, l, p});
    }
  }
  return out;
}

namespace {

CMat to_complex(const Mat& m) { return m.cast<std::complex<double>>(); }

// Orthonormal basis of the complement of span{a}.
Mat complement_basis(const Vec& a) {
  const Eigen::Index n = a.size();
  const Mat col = a;
  Eigen::HouseholderQR<Mat> qr(col);
  const Mat q = qr.householderQ() * Mat::Identity(n, n);
  return q.rightCols(n - 1);
}

ScaledSchur near_diagonal(const Mat& k, double fraction) {
  if (k.rows() == 0) return ScaledSchur{};
  Eigen::ComplexSchur<CMat> schur(to_complex(k), false);
  const double gap = schur.matrixT().diagonal().real().cwiseAbs().minCoeff();
  if (!(gap > 0.0)) throw std::runtime_error("analyze_gossip: averaged Laplacian is singular on the complement");
  return scaled_schur_offdiag(to_complex(k), fraction * gap);
}

double smallest_singular(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

// First gamma in (0, 1] with sigma(gamma) >= 1, else 1.
template <class F>
double first_crossing(F sigma) {
  constexpr int kGrid = 1000;
  double prev = 0.0;
  for (int k = 1; k <= kGrid; ++k) {
    const double g = double(k) / kGrid;
    if (sigma(g) >= 1.0) {
      double lo = prev, hi = g;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (sigma(mid) >= 1.0 ? hi : lo) = mid;
      }
      return lo;
    }
    prev = g;
  }
  return 1.0;
}

}  // namespace

double GossipAnalysis::J_R_norm(double gamma) const {
  if (sd.N_T.rows() == 0) return 0.0;
  return norm2(CMat(CMat::Identity(sd.N_T.rows(), sd.N_T.cols()) + gamma * sd.N_T));
}

double GossipAnalysis::J_C_norm(double gamma) const {
  if (sd.N_E.rows() == 0) return 0.0;
  return norm2(CMat(CMat::Identity(sd.N_E.rows(), sd.N_E.cols()) + gamma * sd.N_E));
}

double GossipAnalysis::sigma_R(double gamma) const {
  const double j = J_R_norm(gamma);
  return j * j + gamma * gamma * VT;
}

double GossipAnalysis::sigma_C(double gamma) const {
  const double j = J_C_norm(gamma);
  return j * j + 2.0 * gamma * gamma * VE;
}

double GossipAnalysis::gamma_bar_R() const {
  return first_crossing([this](double g) { return sigma_R(g); });
}

double GossipAnalysis::gamma_bar_C() const {
  return first_crossing([this](double g) { return sigma_C(g); });
}

GossipAnalysis analyze_gossip(const Digraph& g_R, const Digraph& g_C, double offdiag_fraction) {
  if (root_set(g_R).empty() || root_set(g_C.reversed()).empty()) {
    throw std::runtime_error("analyze_gossip: a graph lacks a spanning tree");
  }
  GossipAnalysis a;
  a.offdiag_fraction = offdiag_fraction;
  a.n = g_R.size();
  const auto n = Eigen::Index(a.n);
  const double nd = double(n);
  const auto outcomes = enumerate_outcomes(g_R, g_C);

  a.T_bar = Mat::Zero(n, n);
  a.E_bar = Mat::Zero(n, n);
  a.EQ = Mat::Zero(n, n);
  std::vector<GossipMatrices> mats;
  mats.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    mats.push_back(event_matrices(GossipEvent{o.i, o.j, o.l, 0.5}, a.n));
    const auto& m = mats.back();
    a.T_bar += o.probability * m.T;
    a.E_bar += o.probability * m.E;
    a.EQ += o.probability * m.Q;
    a.EQ_norm2_sq += o.probability * std::pow(norm2(m.Q), 2);
    a.ET_norm2_sq += o.probability * std::pow(norm2(m.T), 2);
  }

  const Mat I = Mat::Identity(n, n);
  const PerronVectors pv = perron_vectors(I + 0.5 * a.T_bar, I + 0.5 * a.E_bar);
  a.u_bar = pv.u;
  a.v_bar = pv.v;
  a.eta = a.u_bar.dot(a.EQ * a.v_bar) / nd;

  a.EQuuQ = Mat::Zero(n, n);
  a.ETuuT = Mat::Zero(n, n);
  const Mat uu = a.u_bar * a.u_bar.transpose();
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    const double p = outcomes[s].probability;
    const Mat Tt = mats[s].T - a.T_bar;
    a.EQuuQ += p * mats[s].Q.transpose() * uu * mats[s].Q;
    a.ETuuT += p * Tt.transpose() * uu * Tt;
  }

  // S: first row u_bar^T, remaining rows G Z^T with G K G^-1 near diagonal.
  const Vec ones = Vec::Ones(n);
  const Mat Z = complement_basis(ones);
  const Mat Zv = complement_basis(a.v_bar);
  const ScaledSchur gT = near_diagonal(Z.transpose() * a.T_bar * Z, offdiag_fraction);
  const ScaledSchur gE = near_diagonal(Zv.transpose() * a.E_bar * Zv, offdiag_fraction);
  auto& sd = a.sd;
  sd.N_T = gT.scaled;
  sd.N_E = gE.scaled;

  sd.S = CMat::Zero(n, n);
  sd.S_inv = CMat::Zero(n, n);
  sd.S.row(0) = to_complex(Mat(a.u_bar.transpose()));
  sd.S_inv.col(0) = to_complex(Mat(ones / nd));
  sd.D = CMat::Zero(n, n);
  sd.D_inv = CMat::Zero(n, n);
  sd.D.row(0) = to_complex(Mat(ones.transpose()));
  sd.D_inv.col(0) = to_complex(Mat(a.v_bar / nd));
  if (n > 1) {
    sd.S.bottomRows(n - 1) = gT.transform() * to_complex(Mat(Z.transpose()));
    sd.S_inv.rightCols(n - 1) =
        to_complex(Mat((I - ones * a.u_bar.transpose() / nd) * Z)) * gT.inverse_transform();
    sd.D.bottomRows(n - 1) = gE.transform() * to_complex(Mat(Zv.transpose()));
    sd.D_inv.rightCols(n - 1) =
        to_complex(Mat((I - a.v_bar * ones.transpose() / nd) * Zv)) * gE.inverse_transform();
  }
  // Scalar rescaling so that ||x||_2 <= ||S x||_2; J and the variances are unchanged.
  const double sS = 1.0 / smallest_singular(sd.S);
  sd.S *= sS;
  sd.S_inv /= sS;
  const double sD = 1.0 / smallest_singular(sd.D);
  sd.D *= sD;
  sd.D_inv /= sD;

  const CMat P = to_complex(Mat(I - ones * a.u_bar.transpose() / nd));
  const CMat SP = sd.S * P;
  CMat VT = CMat::Zero(n, n), VQ = CMat::Zero(n, n), VE = CMat::Zero(n, n);
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    const double p = outcomes[s].probability;
    const CMat mT = SP * to_complex(Mat(mats[s].T - a.T_bar)) * sd.S_inv;
    const CMat mQ = SP * to_complex(mats[s].Q) * sd.S_inv;
    const CMat mE = sd.D * to_complex(Mat(mats[s].E - a.E_bar)) * sd.D_inv;
    VT += p * mT.adjoint() * mT;
    VQ += p * mQ.adjoint() * mQ;
    VE += p * mE.adjoint() * mE;
  }
  a.VT = hermitian_norm(VT);
  a.VQ = hermitian_norm(VQ);
  a.VE = hermitian_norm(VE);

  a.delta_S2 = norm2(sd.S);
  a.delta_D2 = norm2(sd.D);
  a.delta_SD = norm2(CMat(sd.S * sd.D_inv));
  a.delta_DS = norm2(CMat(sd.D * sd.S_inv));
  const CVec vc = to_complex(Mat(a.v_bar));
  a.v_norm_S = (sd.S * vc).norm();
  a.v_norm_D = (sd.D * vc).norm();
  a.v_norm_2 = a.v_bar.norm();
  a.proj_norm_D =
      norm2(CMat(sd.D * to_complex(Mat(I - a.v_bar * ones.transpose() / nd)) * sd.D_inv));
  return a;
}

}  // namespace pushpull
