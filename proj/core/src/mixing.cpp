#include "pushpull/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

namespace pushpull {

Mat build_row_stochastic(const Digraph& g_R) {
  const auto n = static_cast<Eigen::Index>(g_R.size());
  Mat R = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& in = g_R.in_neighbors(static_cast<AgentId>(i));
    const double w = 1.0 / static_cast<double>(in.size() + 1);
    R(i, i) = w;
    for (AgentId j : in) R(i, static_cast<Eigen::Index>(j)) = w;
  }
  return R;
}

Mat build_column_stochastic(const Digraph& g_C) {
  const auto n = static_cast<Eigen::Index>(g_C.size());
  Mat C = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& out = g_C.out_neighbors(static_cast<AgentId>(j));
    const double w = 1.0 / static_cast<double>(out.size() + 1);
    C(j, j) = w;
    for (AgentId l : out) C(static_cast<Eigen::Index>(l), j) = w;
  }
  return C;
}

Digraph induced_graph(const Mat& m) {
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i != j && m(i, j) > 0.0) {
        edges.emplace_back(static_cast<AgentId>(j), static_cast<AgentId>(i));
      }
    }
  }
  return Digraph(static_cast<std::size_t>(m.rows()), std::move(edges));
}

bool is_row_stochastic(const Mat& m, double tol) {
  if (m.rows() != m.cols() || (m.array() < 0.0).any()) return false;
  return ((m.rowwise().sum().array() - 1.0).abs() <= tol).all();
}

bool is_column_stochastic(const Mat& m, double tol) {
  if (m.rows() != m.cols() || (m.array() < 0.0).any()) return false;
  return ((m.colwise().sum().array() - 1.0).abs() <= tol).all();
}

namespace {

// Left eigenvector for eigenvalue 1 of a row-stochastic matrix, supported
// on the root set of its induced graph and normalized to sum n.
Vec left_perron(const Mat& M, const char* label) {
  const auto n = M.rows();
  const auto roots = root_set(induced_graph(M));
  if (roots.empty()) {
    throw std::runtime_error(std::string(label) +
                             ": induced graph has no spanning tree, eigenvalue 1 is not simple");
  }
  const auto r = static_cast<Eigen::Index>(roots.size());
  Mat block(r, r);
  for (Eigen::Index a = 0; a < r; ++a) {
    for (Eigen::Index b = 0; b < r; ++b) {
      block(a, b) = M(static_cast<Eigen::Index>(roots[a]), static_cast<Eigen::Index>(roots[b]));
    }
  }
  Vec w_root(r);
  if (r == 1) {
    w_root(0) = 1.0;
  } else {
    const Mat sys = block.transpose() - Mat::Identity(r, r);
    Eigen::JacobiSVD<Mat> svd(sys, Eigen::ComputeFullV);
    const Vec& s = svd.singularValues();
    if (s(r - 2) <= 1e-10 * std::max(1.0, s(0))) {
      throw std::runtime_error(std::string(label) + ": eigenvalue 1 is not simple");
    }
    w_root = svd.matrixV().col(r - 1);
  }
  if (w_root.sum() < 0.0) w_root = -w_root;
  const double scale = w_root.cwiseAbs().maxCoeff();
  for (Eigen::Index a = 0; a < r; ++a) {
    if (w_root(a) <= 0.0) {
      if (w_root(a) < -1e-9 * scale) {
        throw std::runtime_error(std::string(label) + ": Perron vector has mixed signs");
      }
      w_root(a) = 0.0;
    }
  }
  w_root *= static_cast<double>(n) / w_root.sum();
  Vec out = Vec::Zero(n);
  for (Eigen::Index a = 0; a < r; ++a) out(static_cast<Eigen::Index>(roots[a])) = w_root(a);
  return out;
}

void require_square_pair(const Mat& R, const Mat& C) {
  if (R.rows() != R.cols() || C.rows() != C.cols() || R.rows() != C.rows() || R.rows() == 0) {
    throw std::invalid_argument("mixing pair: R and C must be square with equal positive size");
  }
}

std::string id_list(const std::vector<AgentId>& ids) {
  std::ostringstream out;
  out << '{';
  for (std::size_t k = 0; k < ids.size(); ++k) out << (k ? "," : "") << ids[k] + 1;
  out << '}';
  return out.str();
}

}  // namespace

PerronVectors perron_vectors(const Mat& R, const Mat& C) {
  require_square_pair(R, C);
  PerronVectors pv;
  pv.u = left_perron(R, "R");
  pv.v = left_perron(C.transpose(), "C");
  return pv;
}

Mat MixingPair::R_deflated() const {
  const auto n = R.rows();
  return R - Vec::Ones(n) * u.transpose() / static_cast<double>(n);
}

Mat MixingPair::C_deflated() const {
  const auto n = C.rows();
  return C - v * Vec::Ones(n).transpose() / static_cast<double>(n);
}

MixingPair make_mixing_pair(Mat R, Mat C) {
  require_square_pair(R, C);
  if (!is_row_stochastic(R)) throw std::invalid_argument("R is not nonnegative row-stochastic");
  if (!is_column_stochastic(C)) {
    throw std::invalid_argument("C is not nonnegative column-stochastic");
  }
  MixingPair pair;
  pair.R = std::move(R);
  pair.C = std::move(C);
  auto pv = perron_vectors(pair.R, pair.C);
  pair.u = std::move(pv.u);
  pair.v = std::move(pv.v);
  pair.rho_R = spectral_radius(pair.R_deflated());
  pair.rho_C = spectral_radius(pair.C_deflated());
  return pair;
}

MixingPair make_mixing_pair(const Digraph& g_R, const Digraph& g_C) {
  if (g_R.size() != g_C.size()) throw std::invalid_argument("G_R and G_C differ in size");
  return make_mixing_pair(build_row_stochastic(g_R), build_column_stochastic(g_C));
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidationReport validate_assumptions(const Mat& R, const Mat& C, const Vec& alphas) {
  ValidationReport rep;
  auto add = [&](std::string name, bool passed, std::string detail) {
    rep.checks.push_back({std::move(name), passed, std::move(detail)});
  };

  if (R.rows() != R.cols() || C.rows() != C.cols() || R.rows() != C.rows() || R.rows() == 0) {
    add("stochastic", false, "R and C must be square with equal positive size");
    return rep;
  }
  const auto n = R.rows();
  {
    std::ostringstream why;
    bool ok = true;
    if (!is_row_stochastic(R)) {
      ok = false;
      why << "R rows do not sum to 1 or R has negative entries; ";
    }
    if (!is_column_stochastic(C)) {
      ok = false;
      why << "C columns do not sum to 1 or C has negative entries; ";
    }
    if ((R.diagonal().array() <= 0.0).any() || (C.diagonal().array() <= 0.0).any()) {
      ok = false;
      why << "nonpositive diagonal entry; ";
    }
    add("stochastic", ok, ok ? "R row-stochastic, C column-stochastic, positive diagonals"
                             : why.str());
  }

  rep.roots_R = root_set(induced_graph(R));
  rep.roots_CT = root_set(induced_graph(C.transpose()));
  std::set_intersection(rep.roots_R.begin(), rep.roots_R.end(), rep.roots_CT.begin(),
                        rep.roots_CT.end(), std::back_inserter(rep.common_roots));
  {
    const bool ok = !rep.roots_R.empty() && !rep.roots_CT.empty();
    std::string detail = "roots(G_R)=" + id_list(rep.roots_R) +
                         " roots(G_C^T)=" + id_list(rep.roots_CT);
    if (rep.roots_R.empty()) detail += "; G_R has no spanning tree";
    if (rep.roots_CT.empty()) detail += "; G_C^T has no spanning tree";
    add("spanning_trees", ok, detail);
  }
  add("root_intersection", !rep.common_roots.empty(),
      "roots(G_R) & roots(G_C^T) = " + id_list(rep.common_roots));

  {
    bool ok = alphas.size() == n && (alphas.array() >= 0.0).all();
    std::string detail;
    if (alphas.size() != n) {
      detail = "stepsize vector has length " + std::to_string(alphas.size()) + ", expected " +
               std::to_string(n);
    } else if (!ok) {
      detail = "negative stepsize";
    } else {
      std::vector<AgentId> positive;
      for (AgentId i : rep.common_roots) {
        if (alphas(static_cast<Eigen::Index>(i)) > 0.0) positive.push_back(i);
      }
      ok = !positive.empty();
      detail = ok ? "positive stepsize on common roots " + id_list(positive)
                  : "no common root has a positive stepsize";
    }
    add("positive_root_stepsize", ok, detail);
  }

  try {
    const auto pv = perron_vectors(R, C);
    const double overlap = pv.u.dot(pv.v);
    std::ostringstream detail;
    detail << "u^T v = " << overlap;
    add("perron_overlap", overlap > 0.0, detail.str());
    const double rho_R = spectral_radius(R - Vec::Ones(n) * pv.u.transpose() / double(n));
    const double rho_C = spectral_radius(C - pv.v * Vec::Ones(n).transpose() / double(n));
    std::ostringstream gap;
    gap << std::setprecision(12) << "rho_R = " << rho_R << ", rho_C = " << rho_C;
    add("spectral_gap", rho_R < 1.0 - 1e-12 && rho_C < 1.0 - 1e-12, gap.str());
  } catch (const std::exception& e) {
    add("perron_overlap", false, e.what());
    add("spectral_gap", false, "Perron vectors unavailable");
  }
  return rep;
}

ValidationReport validate_assumptions(const MixingPair& pair, const Vec& alphas) {
  return validate_assumptions(pair.R, pair.C, alphas);
}

namespace {

double transformed_frobenius(const ScaledSchur& s, const Mat& x) {
  const CMat y = s.U.adjoint() * x.cast<std::complex<double>>();
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) total += s.w(i) * s.w(i) * y.row(i).squaredNorm();
  return std::sqrt(total);
}

}  // namespace

double NormKit::vec_norm_R(const Mat& x) const { return transformed_frobenius(schur_R, x); }
double NormKit::vec_norm_C(const Mat& x) const { return transformed_frobenius(schur_C, x); }

double NormKit::mat_norm_R(const Mat& w) const {
  return norm2(schur_R.conjugate(w.cast<std::complex<double>>()));
}

double NormKit::mat_norm_C(const Mat& w) const {
  return norm2(schur_C.conjugate(w.cast<std::complex<double>>()));
}

NormKit build_norm_kit(const MixingPair& pair, double epsilon) {
  return build_norm_kit(pair, epsilon > 0.0 ? epsilon : 0.1 * (1.0 - pair.rho_R),
                        epsilon > 0.0 ? epsilon : 0.1 * (1.0 - pair.rho_C));
}

NormKit build_norm_kit(const MixingPair& pair, double epsilon_R, double epsilon_C) {
  NormKit kit;
  kit.epsilon_R = epsilon_R;
  kit.epsilon_C = epsilon_C;
  if (pair.rho_R + kit.epsilon_R >= 1.0 || pair.rho_C + kit.epsilon_C >= 1.0) {
    std::ostringstream msg;
    msg << "build_norm_kit: epsilon too large (rho_R=" << pair.rho_R << ", rho_C=" << pair.rho_C
        << ", epsilon_R=" << kit.epsilon_R << ", epsilon_C=" << kit.epsilon_C << ")";
    throw std::runtime_error(msg.str());
  }
  kit.schur_R = scaled_schur(pair.R_deflated(), pair.rho_R + kit.epsilon_R);
  kit.schur_C = scaled_schur(pair.C_deflated(), pair.rho_C + kit.epsilon_C);
  kit.sigma_R = kit.schur_R.sigma;
  kit.sigma_C = kit.schur_C.sigma;

  const auto& sR = kit.schur_R;
  const auto& sC = kit.schur_C;
  const auto n = pair.R.rows();
  const Vec ones = Vec::Ones(n);
  kit.delta_R2 = sR.w.maxCoeff();
  kit.delta_C2 = sC.w.maxCoeff();
  kit.delta_RC = norm2(scale_rows_cols(sR.U.adjoint() * sC.U, sR.w, sC.w.cwiseInverse()));
  kit.delta_CR = norm2(scale_rows_cols(sC.U.adjoint() * sR.U, sC.w, sR.w.cwiseInverse()));
  kit.c0 = kit.mat_norm_C(Mat::Identity(n, n) - pair.v * ones.transpose() / double(n));
  return kit;
}

void write_matrix_csv(std::ostream& out, const Mat& m, const std::string& kind) {
  out << "# rows=" << m.rows() << " cols=" << m.cols() << " kind=" << kind << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

Mat read_matrix_csv(std::istream& in, std::string* kind) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#", 0) != 0) {
    throw std::invalid_argument("matrix csv: missing '# rows=.. cols=.. kind=..' header");
  }
  long rows = -1, cols = -1;
  std::string found_kind;
  std::istringstream header(line.substr(1));
  std::string token;
  while (header >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    try {
      if (key == "rows") rows = std::stol(value);
      if (key == "cols") cols = std::stol(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("matrix csv: bad header value '" + token + "'");
    }
    if (key == "kind") found_kind = value;
  }
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("matrix csv: bad header '" + line + "'");
  Mat m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw std::invalid_argument("matrix csv: expected " + std::to_string(rows) + " rows");
    }
    std::istringstream row(line);
    for (long j = 0; j < cols; ++j) {
      std::string cell;
      if (!std::getline(row, cell, ',')) {
        throw std::invalid_argument("matrix csv: row " + std::to_string(i + 1) + " too short");
      }
      try {
        m(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw std::invalid_argument("matrix csv: bad number '" + cell + "'");
      }
    }
  }
  if (kind) *kind = found_kind;
  return m;
}

}  // namespace pushpull
