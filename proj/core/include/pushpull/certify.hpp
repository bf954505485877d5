#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushpull/gossip.hpp"
#include "pushpull/linalg.hpp"
#include "pushpull/mixing.hpp"
#include "pushpull/objectives.hpp"
#include "pushpull/push_pull.hpp"
#include "pushpull/trace.hpp"

namespace pushpull {

/// Nonnegative 3x3 comparison matrix with the constants that built it.
struct Certificate {
  std::string kind;  ///< "synchronous" or "gossip"
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Zero();
  std::map<std::string, double> constants;
  double rho = 0;
  double alpha_bound = 0;
  double gamma_bound = 0;  ///< gossip only
  std::vector<std::string> diagnostics;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Perron root of a nonnegative 3x3 matrix.
double spectral_radius3(const Eigen::Matrix3d& m);

nlohmann::json to_json(const Certificate& cert);

// ---- synchronous ---------------------------------------------------------

struct SyncConstants {
  double n = 0;
  double mu = 0, L = 0;
  double sigma_R = 0, sigma_C = 0;
  double delta_RC = 0, delta_C2 = 0;
  double c0 = 0;
  double R_norm = 0;           ///< ||R||_2
  double R_minus_I_norm = 0;   ///< ||R - I||_2
  double u_norm = 0, v_norm = 0;
  double v_norm_R = 0;         ///< ||v||_R
  double u_dot_v = 0;
};

SyncConstants sync_constants(const MixingPair& pair, const NormKit& kit, const ObjectiveSet& obj);

/// Throws std::invalid_argument if alpha' > 2/(mu+L).
Certificate build_A(const SyncConstants& k, double alpha_prime, double alpha_hat);
Certificate build_A(const MixingPair& pair, const NormKit& kit, const ObjectiveSet& obj,
                    const StepsizeProfile& profile);

struct Theorem1Bound {
  double alpha_hat = 0;  ///< min of every term below
  double strict = 0;     ///< 2c3 / (c2 + sqrt(c2^2 + 4 c1 c3))
  double stated = 0;     ///< (1 - sigma_C) / (2 sigma_C delta_C2 ||R|| L)
  double loose_R = 0;    ///< (1 - sigma_R) sqrt(n) / (2 sigma_R ||v||_R L)
  double loose_C = 0;    ///< (1 - sigma_C) / (2 c0 delta_C2 ||R|| L)
  double descent_cap = 0;  ///< keeps alpha' <= 2/(mu+L) for any profile shape
  double c1 = 0, c2 = 0, c3 = 0;
  double M = 0;
  std::string binding;   ///< name of the smallest term
};

/// Throws std::logic_error if M <= 0, a constant is negative or c3 is zero.
/// Terms with a zero denominator (complete mixing) are infinite.
Theorem1Bound alpha_bound_theorem1(const SyncConstants& k, double M);

/// The norm slack is a free parameter of the construction: a small slack
/// keeps sigma near rho but inflates the norm-equivalence constants. These
/// pick the slack on a grid of fractions of each spectral gap, either for
/// the largest stepsize bound or for the smallest rho(A) at a given profile.
NormKit norm_kit_for_bound(const MixingPair& pair, const ObjectiveSet& obj, double M);
NormKit norm_kit_for_profile(const MixingPair& pair, const ObjectiveSet& obj,
                             const StepsizeProfile& profile);

// ---- gossip ----------------------------------------------------------------

/// gamma-dependent constants of the mean-square system.
struct GossipConstants {
  double n = 0, mu = 0, L = 0, gamma = 0;
  double sigma_R = 0, sigma_C = 0;  ///< of R-bar and C-bar in the S and D norms
  double eta = 0;
  double d1 = 0, d2 = 0, d3 = 0, d4 = 0, d5 = 0, d6 = 0, d7 = 0;
  double delta_SD = 0, delta_D2 = 0;
  double v_norm_2 = 0, v_norm_S = 0, v_norm_D = 0;
  double proj_norm_D = 0;
  double EQ_norm2_sq = 0, ER_minus_I_sq = 0;
  double VQ = 0, VE = 0;
  double EQuuQ_norm = 0, ERuuR_norm = 0, uEQ_norm_sq = 0;
};

/// Throws std::domain_error("gamma too large ...") if sigma_R or sigma_C >= 1.
GossipConstants gossip_constants(const GossipAnalysis& a, double mu, double L, double gamma);

Certificate build_B(const GossipConstants& g, double alpha);

struct Theorem2Bound {
  bool gamma_ok = false;
  double gamma = 0;
  double gamma_bar_R = 0, gamma_bar_C = 0;
  double gamma_coupling = 0;  ///< eta mu sqrt(1 - sigma_C) / (8 L sqrt(d4 d7))
  double alpha_bound = 0;     ///< min of strict and every auxiliary cap
  double strict = 0;          ///< 2c6 / (c5 + sqrt(c5^2 + 4 c4 c6))
  std::map<std::string, double> aux;
  double c4 = 0, c5 = 0, c6 = 0;
  std::string diagnostic;
};

/// Never throws for gamma in (0, 1); an invalid gamma gives gamma_ok = false
/// with the reason in diagnostic.
Theorem2Bound bounds_theorem2(const GossipAnalysis& a, double mu, double L, double gamma);

/// Starts at min(gamma_bar_R, gamma_bar_C) / 2 and halves until the gamma
/// condition holds. Throws std::runtime_error after 60 halvings.
double certified_gamma(const GossipAnalysis& a, double mu, double L);

/// The similarity transforms behind the gossip norms have the same kind of
/// free scaling (offdiag_fraction). Picks it on a grid for the largest
/// certified stepsize, at `gamma` when given and at certified_gamma
/// otherwise. Falls back to the default scaling when no grid point works.
GossipAnalysis analysis_for_bound(const Digraph& g_R, const Digraph& g_C, double mu, double L,
                                  std::optional<double> gamma = std::nullopt);

// ---- observed rates --------------------------------------------------------

struct RateFit {
  double rate = 0;   ///< exp(slope), per unit of k
  double slope = 0;
  double intercept = 0;
  std::size_t points = 0;
  bool floor_reached = false;  ///< points at or below the floor were dropped
};

struct FitWindow {
  double begin = 0;
  double end = 1e300;
  double floor = 1e-14;
  std::size_t min_points = 20;
};

/// Least squares fit of log(value) against k inside the window, stopping at
/// the first value at or below the floor. Throws std::invalid_argument when
/// fewer than min_points remain.
RateFit fit_rate(const std::vector<double>& k, const std::vector<double>& values,
                 const FitWindow& window = {});
RateFit fit_rate(const RunTrace& trace, const FitWindow& window = {});

}  // namespace pushpull
