#include "pushpull/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace pushpull {

double spectral_radius3(const Eigen::Matrix3d& m) {
  if (!(m.minCoeff() > 0.0)) {
    const double rho = Eigen::EigenSolver<Eigen::Matrix3d>(m, false).eigenvalues().cwiseAbs().maxCoeff();
    // Nonnegative: rho >= every diagonal entry, exactly, e.g. a zero-stepsize row.
    return m.minCoeff() >= 0.0 ? std::max(rho, m.diagonal().maxCoeff()) : rho;
  }
  // Positive matrix. Entries span many orders of magnitude, and a plain
  // eigensolve loses absolute accuracy of order eps * ||m||, which matters
  // when rho sits close to one. Balance with a diagonal similarity first,
  // then polish the Perron vector; max_i (m x)_i / x_i bounds rho from
  // above for any positive x and involves no cancellation.
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  Eigen::Matrix3d b = m;
  for (int sweep = 0; sweep < 50; ++sweep) {
    for (int i = 0; i < 3; ++i) {
      const double r = b.row(i).sum() - b(i, i), c = b.col(i).sum() - b(i, i);
      const double f = std::sqrt(c / r);
      b.row(i) *= f;
      b.col(i) /= f;
      d(i) *= f;
    }
  }
  Eigen::EigenSolver<Eigen::Matrix3d> es(b);
  Eigen::Index top = 0;
  es.eigenvalues().cwiseAbs().maxCoeff(&top);
  // m = D^-1 b D, so a right eigenvector of m is D^-1 times one of b.
  Eigen::Vector3d x = es.eigenvectors().col(top).real().cwiseAbs().cwiseQuotient(d);
  if (!(x.minCoeff() > 0.0)) x = Eigen::Vector3d::Ones();
  for (int it = 0; it < 200; ++it) {
    const Eigen::Vector3d y = m * x;
    const Eigen::Vector3d q = y.cwiseQuotient(x);
    if (q.maxCoeff() - q.minCoeff() <= 8 * std::numeric_limits<double>::epsilon() * q.maxCoeff()) {
      return q.maxCoeff();
    }
    x = y / y.maxCoeff();
  }
  // Not settled (nearly equal leading moduli): keep the balanced eigensolve.
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

nlohmann::json to_json(const Certificate& cert) {
  nlohmann::json j;
  j["kind"] = cert.kind;
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back({cert.matrix(r, 0), cert.matrix(r, 1), cert.matrix(r, 2)});
  }
  j["matrix"] = rows;
  j["rho"] = cert.rho;
  j["alpha_bound"] = cert.alpha_bound;
  if (cert.kind == "gossip") j["gamma_bound"] = cert.gamma_bound;
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [name, value] : cert.constants) {
    if (std::isfinite(value)) {
      c[name] = value;
    } else {
      c[name] = nullptr;
    }
  }
  j["constants"] = c;
  j["diagnostics"] = cert.diagnostics;
  j["provenance"] = cert.provenance;
  return j;
}

// ---- synchronous ---------------------------------------------------------

SyncConstants sync_constants(const MixingPair& pair, const NormKit& kit, const ObjectiveSet& obj) {
  SyncConstants k;
  const auto n = static_cast<Eigen::Index>(pair.size());
  k.n = double(n);
  k.mu = obj.mu;
  k.L = obj.L;
  k.sigma_R = kit.sigma_R;
  k.sigma_C = kit.sigma_C;
  k.delta_RC = kit.delta_RC;
  k.delta_C2 = kit.delta_C2;
  k.c0 = kit.c0;
  k.R_norm = norm2(pair.R);
  k.R_minus_I_norm = norm2(Mat(pair.R - Mat::Identity(n, n)));
  k.u_norm = pair.u.norm();
  k.v_norm = pair.v.norm();
  k.v_norm_R = kit.vec_norm_R(Mat(pair.v));
  k.u_dot_v = pair.u.dot(pair.v);
  return k;
}

namespace {

void put_sync_constants(Certificate& c, const SyncConstants& k) {
  c.constants["n"] = k.n;
  c.constants["mu"] = k.mu;
  c.constants["L"] = k.L;
  c.constants["sigma_R"] = k.sigma_R;
  c.constants["sigma_C"] = k.sigma_C;
  c.constants["delta_RC"] = k.delta_RC;
  c.constants["delta_C2"] = k.delta_C2;
  c.constants["c0"] = k.c0;
  c.constants["R_norm2"] = k.R_norm;
  c.constants["R_minus_I_norm2"] = k.R_minus_I_norm;
  c.constants["u_norm2"] = k.u_norm;
  c.constants["v_norm2"] = k.v_norm;
  c.constants["v_norm_R"] = k.v_norm_R;
  c.constants["u_dot_v"] = k.u_dot_v;
}

}  // namespace

Certificate build_A(const SyncConstants& k, double alpha_prime, double alpha_hat) {
  if (alpha_prime > 2.0 / (k.mu + k.L) * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "build_A: alpha' = " << alpha_prime << " exceeds 2/(mu+L) = " << 2.0 / (k.mu + k.L);
    throw std::invalid_argument(msg.str());
  }
  const double sn = std::sqrt(k.n);
  const double L = k.L;
  const double cd = k.c0 * k.delta_C2;
  Certificate c;
  c.kind = "synchronous";
  auto& A = c.matrix;
  A(0, 0) = 1.0 - alpha_prime * k.mu;
  A(0, 1) = alpha_prime * L / sn;
  A(0, 2) = alpha_hat * k.u_norm / k.n;
  A(1, 0) = alpha_hat * k.sigma_R * k.v_norm_R * L;
  A(1, 1) = k.sigma_R * (1.0 + alpha_hat * k.v_norm_R * L / sn);
  A(1, 2) = alpha_hat * k.sigma_R * k.delta_RC;
  A(2, 0) = alpha_hat * cd * k.R_norm * k.v_norm * L * L;
  A(2, 1) = cd * L * (k.R_minus_I_norm + alpha_hat * k.R_norm * k.v_norm * L / sn);
  A(2, 2) = k.sigma_C + alpha_hat * cd * k.R_norm * L;
  c.rho = spectral_radius3(A);
  c.alpha_bound = alpha_hat;
  put_sync_constants(c, k);
  c.constants["alpha_prime"] = alpha_prime;
  c.constants["alpha_hat"] = alpha_hat;
  return c;
}

Certificate build_A(const MixingPair& pair, const NormKit& kit, const ObjectiveSet& obj,
                    const StepsizeProfile& profile) {
  Certificate c = build_A(sync_constants(pair, kit, obj), profile.alpha_prime, profile.alpha_hat);
  c.constants["M"] = profile.M;
  c.constants["epsilon_R"] = kit.epsilon_R;
  c.constants["epsilon_C"] = kit.epsilon_C;
  c.diagnostics.push_back("M rule: " + profile.M_rule);
  return c;
}

Theorem1Bound alpha_bound_theorem1(const SyncConstants& k, double M) {
  if (!(M > 0.0)) throw std::logic_error("alpha_bound_theorem1: M must be positive");
  const double n = k.n, sn = std::sqrt(n), L = k.L, mu = k.mu;
  const double sR = k.sigma_R, sC = k.sigma_C;
  const double cd = k.c0 * k.delta_C2;
  Theorem1Bound b;
  b.M = M;
  b.c1 = sR * cd * k.R_norm * k.v_norm * L * L / (n * sn) *
         (M * k.delta_RC * n * (L + mu) + k.u_norm * k.v_norm_R * L);
  b.c2 = sR * cd * k.u_norm * k.v_norm_R * k.R_minus_I_norm * L * L / n +
         cd * k.R_norm * k.v_norm * k.u_norm * (1.0 - sR) * L * L / (2.0 * n) +
         M * sR * k.c0 * k.delta_RC * k.delta_C2 * k.R_minus_I_norm * mu * L +
         0.5 * M * sR * k.v_norm_R * (1.0 - sC) * L * L / sn;
  b.c3 = 0.25 * M * (1.0 - sC) * (1.0 - sR) * mu;
  for (auto [name, value] : {std::pair{"c1", b.c1}, {"c2", b.c2}, {"c3", b.c3}}) {
    if (!(value >= 0.0) || !std::isfinite(value) || (value == 0.0 && name == std::string("c3"))) {
      std::ostringstream msg;
      msg << "alpha_bound_theorem1: constant " << name << " = " << value << " is out of range";
      throw std::logic_error(msg.str());
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double den = b.c2 + std::sqrt(b.c2 * b.c2 + 4.0 * b.c1 * b.c3);
  b.strict = den > 0.0 ? 2.0 * b.c3 / den : inf;
  b.stated = (1.0 - sC) / (2.0 * sC * k.delta_C2 * k.R_norm * L);
  b.loose_R = (1.0 - sR) * sn / (2.0 * sR * k.v_norm_R * L);
  b.loose_C = (1.0 - sC) / (2.0 * cd * k.R_norm * L);
  b.descent_cap = 2.0 * n / ((mu + L) * k.u_dot_v);
  b.alpha_hat = inf;
  for (auto [name, value] : {std::pair{"strict", b.strict},
                             {"stated", b.stated},
                             {"loose_R", b.loose_R},
                             {"loose_C", b.loose_C},
                             {"descent_cap", b.descent_cap}}) {
    if (value < b.alpha_hat) {
      b.alpha_hat = value;
      b.binding = name;
    }
  }
  return b;
}

namespace {

template <class Score>
NormKit best_kit(const MixingPair& pair, Score score) {
  NormKit best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < 20; ++i) {
    const double f = 0.05 * i;
    NormKit kit;
    double value = 0.0;
    try {
      kit = build_norm_kit(pair, f * (1.0 - pair.rho_R), f * (1.0 - pair.rho_C));
      value = score(kit);
    } catch (const std::exception&) {
      continue;
    }
    if (value > best_score) {
      best_score = value;
      best = kit;
    }
  }
  if (!(best_score > -std::numeric_limits<double>::infinity())) return build_norm_kit(pair);
  return best;
}

}  // namespace

NormKit norm_kit_for_bound(const MixingPair& pair, const ObjectiveSet& obj, double M) {
  return best_kit(pair, [&](const NormKit& kit) {
    return alpha_bound_theorem1(sync_constants(pair, kit, obj), M).alpha_hat;
  });
}

NormKit norm_kit_for_profile(const MixingPair& pair, const ObjectiveSet& obj,
                             const StepsizeProfile& profile) {
  return best_kit(pair, [&](const NormKit& kit) { return -build_A(pair, kit, obj, profile).rho; });
}

// ---- gossip ----------------------------------------------------------------

GossipConstants gossip_constants(const GossipAnalysis& a, double mu, double L, double gamma) {
  GossipConstants g;
  g.n = double(a.n);
  g.mu = mu;
  g.L = L;
  g.gamma = gamma;
  g.sigma_R = a.sigma_R(gamma);
  g.sigma_C = a.sigma_C(gamma);
  if (!(g.sigma_R < 1.0) || !(g.sigma_C < 1.0)) {
    std::ostringstream msg;
    msg << "gamma too large: gamma=" << gamma << " gives sigma_R=" << g.sigma_R
        << ", sigma_C=" << g.sigma_C << " (need both < 1)";
    throw std::domain_error(msg.str());
  }
  const double n = g.n;
  g.eta = a.eta;
  g.delta_SD = a.delta_SD;
  g.delta_D2 = a.delta_D2;
  g.v_norm_2 = a.v_norm_2;
  g.v_norm_S = a.v_norm_S;
  g.v_norm_D = a.v_norm_D;
  g.proj_norm_D = a.proj_norm_D;
  g.EQ_norm2_sq = a.EQ_norm2_sq;
  g.ER_minus_I_sq = gamma * gamma * a.ET_norm2_sq;
  g.VQ = a.VQ;
  g.VE = a.VE;
  g.EQuuQ_norm = norm2(a.EQuuQ);
  g.ERuuR_norm = gamma * gamma * norm2(a.ETuuT);
  g.uEQ_norm_sq = (a.u_bar.transpose() * a.EQ).squaredNorm();

  const double rR = (1.0 + g.sigma_R) / (1.0 - g.sigma_R);
  const double rC = (1.0 + g.sigma_C) / (1.0 - g.sigma_C);
  const double dD = g.delta_D2 * g.delta_D2 * g.proj_norm_D * g.proj_norm_D;
  g.d1 = 2.0 * g.EQuuQ_norm / (n * n);
  g.d2 = 3.0 * rR * g.VQ;
  g.d3 = 4.0 * dD * rC * g.EQ_norm2_sq;
  g.d4 = (1.0 / n) * (1.0 + g.sigma_C) / g.sigma_C * g.VE * g.v_norm_D * g.v_norm_D;
  g.d5 = g.ERuuR_norm / (n * n);
  g.d6 = dD * rC * g.ER_minus_I_sq;
  g.d7 = g.uEQ_norm_sq / (n * n);
  return g;
}

Certificate build_B(const GossipConstants& g, double alpha) {
  const double n = g.n, L = g.L, L2 = L * L, mu = g.mu, a2 = alpha * alpha, gm2 = g.gamma * g.gamma;
  const double v2 = g.v_norm_2 * g.v_norm_2, vS2 = g.v_norm_S * g.v_norm_S;
  Certificate c;
  c.kind = "gossip";
  auto& B = c.matrix;
  B(0, 0) = 1.0 - alpha * g.eta * mu + 2.0 * a2 * L2 * v2 * g.d1;
  B(0, 1) = 2.0 * alpha * g.eta * L2 / (mu * n) + 2.0 * a2 * L2 * v2 * g.d1 / n + g.d5;
  B(0, 2) = 2.0 * alpha * g.d7 / (g.eta * mu) + a2 * g.d1;
  B(1, 0) = a2 * L2 * g.d2 * vS2;
  B(1, 1) = 0.5 * (1.0 + g.sigma_R) + a2 * L2 * g.d2 * vS2 / n;
  B(1, 2) = a2 * g.d2 * g.delta_SD;
  B(2, 0) = 2.0 * L2 * (n * gm2 * g.d4 + a2 * L2 * g.d3 * v2);
  B(2, 1) = 2.0 * L2 * (g.d6 + a2 * L2 * g.d3 * v2 / n + gm2 * g.d4);
  B(2, 2) = 0.5 * (1.0 + g.sigma_C) + a2 * L2 * g.d3;
  c.rho = spectral_radius3(B);
  c.alpha_bound = alpha;
  c.gamma_bound = g.gamma;

  // The same system in the simplified arrangement used for the stepsize
  // conditions; reported so the two can be compared.
  Eigen::Matrix3d Bs = B;
  Bs(2, 0) = 2.0 * L2 * (gm2 * g.d4 + a2 * L2 * g.d3 * v2);
  Bs(2, 1) = 2.0 * L2 * (g.d6 + a2 * L2 * g.d3 * v2 + gm2 * g.d4);
  c.constants["rho_simplified"] = spectral_radius3(Bs);

  for (auto [name, value] : {std::pair{"n", g.n}, {"mu", g.mu}, {"L", g.L}, {"gamma", g.gamma},
                             {"alpha", alpha}, {"sigma_R_bar", g.sigma_R},
                             {"sigma_C_bar", g.sigma_C}, {"eta", g.eta}, {"d1", g.d1},
                             {"d2", g.d2}, {"d3", g.d3}, {"d4", g.d4}, {"d5", g.d5},
                             {"d6", g.d6}, {"d7", g.d7}, {"delta_SD", g.delta_SD},
                             {"delta_D2", g.delta_D2}, {"v_norm2", g.v_norm_2},
                             {"v_norm_S", g.v_norm_S}, {"v_norm_D", g.v_norm_D},
                             {"proj_norm_D", g.proj_norm_D}, {"V_Q", g.VQ}, {"V_E", g.VE},
                             {"EQuuQ_norm", g.EQuuQ_norm}, {"EQ_norm2_sq", g.EQ_norm2_sq},
                             {"ER_minus_I_sq", g.ER_minus_I_sq}, {"ERuuR_norm", g.ERuuR_norm},
                             {"uEQ_norm_sq", g.uEQ_norm_sq}}) {
    c.constants[name] = value;
  }
  return c;
}

Theorem2Bound bounds_theorem2(const GossipAnalysis& a, double mu, double L, double gamma) {
  Theorem2Bound b;
  b.gamma = gamma;
  b.gamma_bar_R = a.gamma_bar_R();
  b.gamma_bar_C = a.gamma_bar_C();
  if (!(gamma > 0.0 && gamma < 1.0)) {
    b.diagnostic = "gamma must lie in (0,1)";
    return b;
  }
  if (!(gamma < b.gamma_bar_R && gamma < b.gamma_bar_C)) {
    std::ostringstream msg;
    msg << "gamma too large: gamma=" << gamma << " is not below gamma_bar_R=" << b.gamma_bar_R
        << " and gamma_bar_C=" << b.gamma_bar_C;
    b.diagnostic = msg.str();
    return b;
  }
  GossipConstants g;
  try {
    g = gossip_constants(a, mu, L, gamma);
  } catch (const std::domain_error& e) {
    b.diagnostic = e.what();
    return b;
  }
  const double n = g.n, L2 = L * L, L4 = L2 * L2, eta = g.eta;
  const double sR = g.sigma_R, sC = g.sigma_C, gm2 = gamma * gamma;
  const double v2 = g.v_norm_2 * g.v_norm_2, vS2 = g.v_norm_S * g.v_norm_S;
  b.gamma_coupling = g.d4 * g.d7 > 0.0
                         ? eta * mu * std::sqrt(1.0 - sC) / (8.0 * L * std::sqrt(g.d4 * g.d7))
                         : std::numeric_limits<double>::infinity();

  b.c4 = 6.0 * eta * L4 / (mu * n) * g.d2 * g.delta_SD * (g.d6 + gm2 * g.d4) +
         6.0 * L4 / (eta * mu) * g.d2 * g.d7 * vS2 * (2.0 * g.d6 + gm2 * g.d4) +
         1.5 * (1.0 - sR) * L4 * g.d3 * g.d7 / (eta * mu) * v2 +
         eta * mu * L2 * g.d2 * g.delta_SD * (2.0 * g.d6 + gm2 * g.d4) +
         0.75 * (1.0 - sC) * eta * L4 * g.d2 / (mu * n) * vS2;
  b.c5 = 2.0 * L2 * g.d2 * g.d5 * g.delta_SD * (g.d6 + gm2 * g.d4) +
         0.25 * (1.0 - sC) * L2 * g.d2 * g.d5 * vS2;
  b.c6 = eta * mu * (1.0 - sR) * (1.0 - sC) / 32.0 -
         1.5 * (1.0 - sR) * L2 * g.d4 * g.d7 / (eta * mu) * gm2;

  if (!(gamma < b.gamma_coupling)) {
    std::ostringstream msg;
    msg << "gamma too large: gamma=" << gamma << " is not below the coupling limit "
        << b.gamma_coupling;
    b.diagnostic = msg.str();
    return b;
  }
  if (!(b.c6 > 0.0)) {
    b.diagnostic = "gamma too large: c6 <= 0";
    return b;
  }
  b.gamma_ok = true;
  b.strict = 2.0 * b.c6 / (b.c5 + std::sqrt(b.c5 * b.c5 + 4.0 * b.c4 * b.c6));

  const double inf = std::numeric_limits<double>::infinity();
  auto cap = [&](double num, double den) { return den > 0.0 ? num / den : inf; };
  b.aux["b11_descent"] = cap(eta * mu, 4.0 * L2 * v2 * g.d1);
  b.aux["b22_margin"] = std::sqrt(cap((1.0 - sR) * n, 4.0 * L2 * g.d2 * vS2));
  b.aux["b33_margin"] = std::sqrt(cap(1.0 - sC, 4.0 * L2 * g.d3));
  b.aux["b12_split"] = cap(eta, 2.0 * mu * v2 * g.d1);
  b.aux["b13_split"] = cap(g.d7, eta * mu * g.d1);
  b.aux["b3_split"] = std::sqrt(cap(g.d6, L2 * g.d3 * v2));
  b.alpha_bound = b.strict;
  for (const auto& [name, value] : b.aux) b.alpha_bound = std::min(b.alpha_bound, value);
  return b;
}

double certified_gamma(const GossipAnalysis& a, double mu, double L) {
  double gamma = 0.5 * std::min(a.gamma_bar_R(), a.gamma_bar_C());
  for (int it = 0; it < 60; ++it) {
    if (bounds_theorem2(a, mu, L, gamma).gamma_ok) return gamma;
    gamma *= 0.5;
  }
  throw std::runtime_error("certified_gamma: no admissible gamma found");
}

GossipAnalysis analysis_for_bound(const Digraph& g_R, const Digraph& g_C, double mu, double L,
                                  std::optional<double> gamma) {
  std::optional<GossipAnalysis> best;
  double best_alpha = 0.0;
  for (int i = 1; i < 20; ++i) {
    try {
      auto a = analyze_gossip(g_R, g_C, 0.05 * i);
      const double g = gamma ? *gamma : certified_gamma(a, mu, L);
      const auto b = bounds_theorem2(a, mu, L, g);
      if (b.gamma_ok && b.alpha_bound > best_alpha) {
        best_alpha = b.alpha_bound;
        best = std::move(a);
      }
    } catch (const std::runtime_error&) {
    }
  }
  return best ? *best : analyze_gossip(g_R, g_C);
}

// ---- observed rates --------------------------------------------------------

RateFit fit_rate(const std::vector<double>& k, const std::vector<double>& values,
                 const FitWindow& window) {
  if (k.size() != values.size()) throw std::invalid_argument("fit_rate: size mismatch");
  std::vector<double> xs, ys;
  RateFit fit;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] < window.begin || k[i] > window.end) continue;
    if (!(values[i] > window.floor)) {
      fit.floor_reached = true;
      break;
    }
    xs.push_back(k[i]);
    ys.push_back(std::log(values[i]));
  }
  if (xs.size() < window.min_points) {
    std::ostringstream msg;
    msg << "fit_rate: window underflow, " << xs.size() << " usable points (need "
        << window.min_points << ")";
    throw std::invalid_argument(msg.str());
  }
  const double m = double(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.rate = std::exp(fit.slope);
  fit.points = xs.size();
  return fit;
}

RateFit fit_rate(const RunTrace& trace, const FitWindow& window) {
  std::vector<double> k, r;
  k.reserve(trace.records.size());
  r.reserve(trace.records.size());
  for (const auto& rec : trace.records) {
    k.push_back(double(rec.k));
    r.push_back(rec.residual);
  }
  return fit_rate(k, r, window);
}

}  // namespace pushpull
