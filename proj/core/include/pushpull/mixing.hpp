#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pushpull/digraph.hpp"
#include "pushpull/linalg.hpp"

namespace pushpull {

constexpr double kStochasticTol = 1e-12;

/// R_ij = 1/(|N_in(i)|+1) for j in N_in(i) and j = i.
Mat build_row_stochastic(const Digraph& g_R);
/// C_lj = 1/(|N_out(j)|+1) for l in N_out(j) and l = j.
Mat build_column_stochastic(const Digraph& g_C);

/// Graph induced by a weight matrix: edge (j, i) iff m_ij > 0, i != j.
Digraph induced_graph(const Mat& m);

bool is_row_stochastic(const Mat& m, double tol = kStochasticTol);
bool is_column_stochastic(const Mat& m, double tol = kStochasticTol);

struct PerronVectors {
  Vec u;  ///< u^T R = u^T, u^T 1 = n
  Vec v;  ///< C v = v, 1^T v = n
};

/// Solves the null-space problem on the root component of each induced
/// graph and pads with zeros. Throws std::runtime_error if either root set
/// is empty or the eigenvalue 1 is not simple there.
PerronVectors perron_vectors(const Mat& R, const Mat& C);

struct MixingPair {
  Mat R;
  Mat C;
  Vec u;
  Vec v;
  double rho_R = 0;  ///< rho(R - 1 u^T / n)
  double rho_C = 0;  ///< rho(C - v 1^T / n)

  std::size_t size() const { return static_cast<std::size_t>(R.rows()); }
  Mat R_deflated() const;
  Mat C_deflated() const;
};

/// Throws std::invalid_argument on shape or stochasticity errors and
/// std::runtime_error if the Perron vectors do not exist.
MixingPair make_mixing_pair(Mat R, Mat C);
MixingPair make_mixing_pair(const Digraph& g_R, const Digraph& g_C);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  std::vector<AgentId> roots_R;   ///< root set of G_R
  std::vector<AgentId> roots_CT;  ///< root set of G_{C^T}
  std::vector<AgentId> common_roots;

  bool ok() const;
  const ValidationCheck* find(const std::string& name) const;
};

/// Checks: "stochastic" (row/column sums and positive diagonals),
/// "spanning_trees", "root_intersection", "positive_root_stepsize",
/// "perron_overlap" (u^T v > 0) and "spectral_gap" (rho_R, rho_C < 1).
/// Never throws on invalid input; failures are carried in the report.
ValidationReport validate_assumptions(const Mat& R, const Mat& C, const Vec& alphas);
ValidationReport validate_assumptions(const MixingPair& pair, const Vec& alphas);

/// Constructed norms ||x||_R = ||T_R x||_F and ||x||_C = ||T_C x||_F.
struct NormKit {
  double epsilon_R = 0;
  double epsilon_C = 0;
  double sigma_R = 0;   ///< ||R - 1u^T/n||_R
  double sigma_C = 0;   ///< ||C - v1^T/n||_C
  double delta_CR = 0;  ///< ||x||_C <= delta_CR ||x||_R
  double delta_C2 = 0;  ///< ||x||_C <= delta_C2 ||x||_2
  double delta_RC = 0;  ///< ||x||_R <= delta_RC ||x||_C
  double delta_R2 = 0;  ///< ||x||_R <= delta_R2 ||x||_2
  double c0 = 0;        ///< ||I - v1^T/n||_C
  ScaledSchur schur_R;
  ScaledSchur schur_C;

  double vec_norm_R(const Mat& x) const;
  double vec_norm_C(const Mat& x) const;
  double mat_norm_R(const Mat& w) const;
  double mat_norm_C(const Mat& w) const;
};

/// epsilon <= 0 selects 0.1 * (1 - rho) per matrix. Throws
/// std::runtime_error if rho + epsilon >= 1.
NormKit build_norm_kit(const MixingPair& pair, double epsilon = 0.0);
NormKit build_norm_kit(const MixingPair& pair, double epsilon_R, double epsilon_C);

/// Dense CSV preceded by "# rows=n cols=n kind=<kind>".
void write_matrix_csv(std::ostream& out, const Mat& m, const std::string& kind);
Mat read_matrix_csv(std::istream& in, std::string* kind = nullptr);

}  // namespace pushpull
