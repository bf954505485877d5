#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pushpull/digraph.hpp"
#include "pushpull/linalg.hpp"
#include "pushpull/objectives.hpp"
#include "pushpull/push_pull.hpp"
#include "pushpull/trace.hpp"

namespace pushpull {

/// One wake-up: agent i_k, at most one G_R target j_k and one G_C target l_k.
struct GossipEvent {
  AgentId i = 0;
  std::optional<AgentId> j;
  std::optional<AgentId> l;
  double gamma = 0.5;
};

struct GossipMatrices {
  Mat R;  ///< I + gamma (e_j e_i^T - e_j e_j^T)
  Mat C;  ///< I + gamma (e_l e_i^T - e_i e_i^T)
  Mat Q;  ///< diag(e_i + e_j + e_l) clipped to 0/1
  Mat T;  ///< (R - I) / gamma
  Mat E;  ///< (C - I) / gamma
};

/// i uniform over agents, j and l uniform over the out-neighbors of i in
/// G_R and G_C (absent when there are none). Pure in (seed, k).
GossipEvent sample_event(const Digraph& g_R, const Digraph& g_C, double gamma,
                         std::uint64_t seed, std::uint64_t k);

GossipMatrices event_matrices(const GossipEvent& ev, std::size_t n);

/// x+ = R_k x - alpha Q_k y, y+ = C_k y + grad F(x+) - grad F(x).
void gossip_step(NetworkState& state, const GossipEvent& ev, double alpha,
                 const ObjectiveSet& obj);

/// Wake-up with arbitrary notified subsets, executed as the push-only
/// pseudocode with per-agent stepsizes: an agent in both subsets takes a
/// double stepsize, an agent only in the C subset takes a plain local step.
struct GeneralEvent {
  AgentId i = 0;
  std::vector<AgentId> notify_R;
  std::vector<AgentId> notify_C;
  double gamma_R = 0.5;
  double gamma_C = 0.5;
};

/// Throws std::invalid_argument when gamma_C * |notify_C| >= 1 or a gamma
/// lies outside (0, 1).
void gossip_general_step(NetworkState& state, const GeneralEvent& ev, const Vec& alphas,
                         const ObjectiveSet& obj);

/// Wakes agent i and notifies all of its out-neighbors in both graphs.
void gossip_all_step(NetworkState& state, AgentId i, const Digraph& g_R, const Digraph& g_C,
                     double gamma, const Vec& alphas, const ObjectiveSet& obj);

enum class GossipMode { restricted, general, all };

const char* to_string(GossipMode m);
GossipMode gossip_mode_from_string(const std::string& name);

struct GossipRunOptions {
  GossipMode mode = GossipMode::restricted;
  double gamma = 0.5;
  std::uint64_t seed = 0;
  std::uint64_t ticks_per_record = 5;   ///< gossip ticks per plotted iteration
  std::uint64_t budget = 1000;          ///< plotted iterations
  double tol = 0.0;
  double divergence_threshold = 1e6;
  std::optional<Mat> x0;
  Vec u;  ///< metric weights for xbar (default ones)
  Vec v;  ///< metric weights for the tracker target (default ones)
};

struct GossipEventRecord {
  std::uint64_t k = 0;
  AgentId i = 0;
  std::optional<AgentId> j;
  std::optional<AgentId> l;
};

/// Trace record k counts plotted iterations (ticks / ticks_per_record).
RunTrace run_gossip(const ObjectiveSet& obj, const Digraph& g_R, const Digraph& g_C,
                    const Vec& alphas, const GossipRunOptions& opts,
                    std::vector<GossipEventRecord>* events = nullptr,
                    NetworkState* final_state = nullptr);

/// Columns k,i_k,j_k,l_k, one-based ids, empty cell for an absent target.
void write_event_log(std::ostream& out, const std::vector<GossipEventRecord>& events);

// ---- expectations over one wake-up -------------------------------------

struct GossipOutcome {
  AgentId i = 0;
  std::optional<AgentId> j;
  std::optional<AgentId> l;
  double probability = 0;
};

/// All (i, j, l) outcomes with probability 1/(n |N_R(i)| |N_C(i)|), where an
/// empty neighbor set counts as one outcome.
std::vector<GossipOutcome> enumerate_outcomes(const Digraph& g_R, const Digraph& g_C);

/// Transforms S and D with T-bar = S^-1 J_T S and E-bar = D^-1 J_E D, first
/// rows proportional to u-bar^T and 1^T, scaled so ||x||_2 <= ||S x||_2.
struct SimilarityPair {
  CMat S, S_inv;
  CMat D, D_inv;
  CMat N_T;  ///< lower-right block of J_T (near-diagonal)
  CMat N_E;  ///< lower-right block of J_E
};

/// gamma-independent quantities. Every expectation is an exact weighted sum
/// over enumerate_outcomes.
struct GossipAnalysis {
  std::size_t n = 0;
  Mat T_bar, E_bar;
  Mat EQ;                 ///< E[Q_k]
  Mat EQuuQ;              ///< E[Q_k^T u u^T Q_k]
  Mat ETuuT;              ///< E[T~_k^T u u^T T~_k], T~_k = T_k - T_bar
  double EQ_norm2_sq = 0; ///< E[||Q_k||_2^2]
  double ET_norm2_sq = 0; ///< E[||T_k||_2^2]
  Vec u_bar, v_bar;
  double eta = 0;         ///< u_bar^T E[Q] v_bar / n
  SimilarityPair sd;
  double VT = 0, VQ = 0, VE = 0;  ///< 2-norms of the variance matrices
  double delta_S2 = 0, delta_D2 = 0, delta_SD = 0, delta_DS = 0;
  double v_norm_S = 0, v_norm_D = 0, v_norm_2 = 0;
  double proj_norm_D = 0;  ///< ||I - v_bar 1^T / n||_D
  double offdiag_fraction = 0.1;

  Mat R_bar(double gamma) const { return Mat::Identity(Eigen::Index(n), Eigen::Index(n)) + gamma * T_bar; }
  Mat C_bar(double gamma) const { return Mat::Identity(Eigen::Index(n), Eigen::Index(n)) + gamma * E_bar; }
  double J_R_norm(double gamma) const;
  double J_C_norm(double gamma) const;
  double sigma_R(double gamma) const;  ///< ||J_R||^2 + gamma^2 ||V_T||
  double sigma_C(double gamma) const;  ///< ||J_C||^2 + 2 gamma^2 ||V_E||
  double gamma_bar_R() const;          ///< first gamma with sigma_R = 1 (capped at 1)
  double gamma_bar_C() const;
};

/// Throws std::runtime_error if either graph lacks a spanning tree.
GossipAnalysis analyze_gossip(const Digraph& g_R, const Digraph& g_C,
                              double offdiag_fraction = 0.1);

}  // namespace pushpull
