#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <fstream>
#include <sstream>

#include "pushpull/mixing.hpp"
#include "pushpull/rng.hpp"

using namespace pushpull;

namespace {

const std::string kFixtures = std::string(PUSHPULL_SOURCE_DIR) + "/fixtures/";

Mat load(const std::string& name) {
  std::ifstream in(kFixtures + name);
  REQUIRE(in);
  return read_matrix_csv(in);
}

Digraph star_pull() { return Digraph(4, {{0, 1}, {0, 2}, {0, 3}}); }
Digraph star_push() { return Digraph(4, {{1, 0}, {2, 0}, {3, 0}}); }

// Eigenvector of m for the eigenvalue closest to 1, scaled to sum n.
Vec dense_unit_eigenvector(const Mat& m) {
  Eigen::EigenSolver<Mat> es(m);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m.rows(); ++i) {
    if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = i;
  }
  Vec x = es.eigenvectors().col(best).real();
  return x * (double(m.rows()) / x.sum());
}

Digraph random_graph(CounterRng& rng, std::size_t n, double density) {
  std::vector<Edge> edges;
  for (AgentId a = 0; a < n; ++a) {
    for (AgentId b = 0; b < n; ++b) {
      if (a != b && rng.uniform() < density) edges.push_back({a, b});
    }
  }
  return Digraph(n, edges);
}

}  // namespace

TEST_SUITE("mixing") {
  TEST_CASE("star weights reproduce the fixture matrices exactly") {
    const Mat R = build_row_stochastic(star_pull());
    const Mat C = build_column_stochastic(star_push());
    CHECK((R - load("star_R.csv")).cwiseAbs().maxCoeff() == 0.0);
    CHECK((C - load("star_C.csv")).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("edgeless and cycle weights") {
    CHECK(build_row_stochastic(Digraph(3, {})).isIdentity(0.0));
    CHECK(build_column_stochastic(Digraph(3, {})).isIdentity(0.0));
    const Mat R = build_row_stochastic(ring_graph(3));
    const Mat C = build_column_stochastic(ring_graph(3));
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK((R.row(i).array() == 0.5).count() == 2);
      CHECK((C.col(i).array() == 0.5).count() == 2);
      CHECK(R.row(i).sum() == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(C.col(i).sum() == doctest::Approx(1.0).epsilon(1e-15));
    }
  }

  TEST_CASE("Perron vectors against a dense eigensolve") {
    SUBCASE("star pair") {
      const auto pv = perron_vectors(build_row_stochastic(star_pull()),
                                     build_column_stochastic(star_push()));
      const Vec expected = (Vec(4) << 4, 0, 0, 0).finished();
      CHECK((pv.u - expected).norm() < 1e-12);
      CHECK((pv.v - expected).norm() < 1e-12);
      const Vec u_oracle = dense_unit_eigenvector(build_row_stochastic(star_pull()).transpose());
      CHECK((pv.u - u_oracle).norm() < 1e-10);
    }
    SUBCASE("doubly stochastic and cycle") {
      const auto pv = perron_vectors(build_row_stochastic(complete_graph(4)),
                                     build_column_stochastic(complete_graph(4)));
      CHECK((pv.u - Vec::Ones(4)).norm() < 1e-12);
      CHECK((pv.v - Vec::Ones(4)).norm() < 1e-12);
      const auto cyc = perron_vectors(build_row_stochastic(ring_graph(3)),
                                      build_column_stochastic(ring_graph(3)));
      CHECK((cyc.u - Vec::Ones(3)).norm() < 1e-12);
      CHECK((cyc.v - Vec::Ones(3)).norm() < 1e-12);
    }
    SUBCASE("random strongly connected pairs") {
      for (std::uint64_t s = 0; s < 20; ++s) {
        const auto g = random_strongly_connected(7, 14, s);
        const Mat R = build_row_stochastic(g), C = build_column_stochastic(g);
        const auto pv = perron_vectors(R, C);
        CHECK((pv.u - dense_unit_eigenvector(R.transpose())).norm() < 1e-8);
        CHECK((pv.v - dense_unit_eigenvector(C)).norm() < 1e-8);
      }
    }
  }

  TEST_CASE("support of the Perron vectors equals the root sets") {
    CounterRng rng(2024);
    std::size_t checked = 0;
    while (checked < 100) {
      const std::size_t n = 2 + rng.below(8);
      const auto gR = random_graph(rng, n, 0.25);
      const auto gC = random_graph(rng, n, 0.25);
      const auto rR = root_set(gR), rC = root_set(gC.reversed());
      if (rR.empty() || rC.empty()) continue;
      ++checked;
      const auto pv = perron_vectors(build_row_stochastic(gR), build_column_stochastic(gC));
      for (AgentId i = 0; i < n; ++i) {
        const bool in_R = std::find(rR.begin(), rR.end(), i) != rR.end();
        const bool in_C = std::find(rC.begin(), rC.end(), i) != rC.end();
        CHECK((pv.u(Eigen::Index(i)) > 1e-9 * pv.u.maxCoeff()) == in_R);
        CHECK((pv.v(Eigen::Index(i)) > 1e-9 * pv.v.maxCoeff()) == in_C);
      }
    }
  }

  TEST_CASE("validation report") {
    const Mat R = build_row_stochastic(star_pull());
    const Mat C = build_column_stochastic(star_push());
    SUBCASE("star pair with a leader stepsize") {
      const auto rep = validate_assumptions(R, C, (Vec(4) << 0.1, 0, 0, 0).finished());
      CHECK(rep.ok());
      CHECK(rep.common_roots == std::vector<AgentId>{0});
    }
    SUBCASE("followers only") {
      const auto rep = validate_assumptions(R, C, (Vec(4) << 0, 0.1, 0.1, 0.1).finished());
      CHECK_FALSE(rep.ok());
      REQUIRE(rep.find("positive_root_stepsize"));
      CHECK_FALSE(rep.find("positive_root_stepsize")->passed);
    }
    SUBCASE("identity has no spanning tree") {
      const auto rep = validate_assumptions(Mat::Identity(2, 2), Mat::Identity(2, 2), Vec::Ones(2));
      REQUIRE(rep.find("spanning_trees"));
      CHECK_FALSE(rep.find("spanning_trees")->passed);
      CHECK_FALSE(rep.find("spanning_trees")->detail.empty());
    }
    SUBCASE("non-stochastic input is reported, not thrown") {
      Mat bad = R;
      bad(1, 1) = 0.7;
      const auto rep = validate_assumptions(bad, C, Vec::Ones(4));
      REQUIRE(rep.find("stochastic"));
      CHECK_FALSE(rep.find("stochastic")->passed);
    }
    SUBCASE("pull example fixture is stochastic") {
      const auto rep = validate_assumptions(load("pull4_R.csv"), load("pull4_C.csv"), Vec::Ones(4));
      REQUIRE(rep.find("stochastic"));
      CHECK(rep.find("stochastic")->passed);
    }
  }

  TEST_CASE("constructed norms") {
    SUBCASE("star pair at epsilon 0.01") {
      const auto pair = make_mixing_pair(star_pull(), star_push());
      CHECK(pair.rho_R == doctest::Approx(0.5).epsilon(1e-12));
      const auto kit = build_norm_kit(pair, 0.01);
      CHECK(kit.sigma_R >= 0.5 - 1e-12);
      CHECK(kit.sigma_R <= 0.51 + 1e-12);
    }
    SUBCASE("symmetric doubly stochastic weights") {
      std::vector<Edge> e;
      for (AgentId i = 0; i < 5; ++i) {
        e.push_back({i, (i + 1) % 5});
        e.push_back({(i + 1) % 5, i});
      }
      const Digraph g(5, e);
      const auto pair = make_mixing_pair(g, g);
      const auto kit = build_norm_kit(pair);
      CHECK(std::abs(kit.sigma_R - pair.rho_R) < 1e-12);
      CHECK(std::abs(kit.sigma_C - pair.rho_C) < 1e-12);
    }
    SUBCASE("random pairs: contraction and norm inequalities") {
      CounterRng rng(5);
      for (std::uint64_t s = 0; s < 30; ++s) {
        const auto g = random_strongly_connected(6, 6 + s % 12, s);
        const auto pair = make_mixing_pair(g, g);
        const auto kit = build_norm_kit(pair);
        CHECK(kit.sigma_R < 1.0);
        CHECK(kit.sigma_C < 1.0);
        CHECK(pair.rho_R < 1.0 - 1e-12);
        Mat W(6, 6), x(6, 3);
        for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.normal();
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        CHECK(kit.vec_norm_R(W * x) <= kit.mat_norm_R(W) * kit.vec_norm_R(x) * (1 + 1e-10));
        CHECK(kit.vec_norm_C(W * x) <= kit.mat_norm_C(W) * kit.vec_norm_C(x) * (1 + 1e-10));
        CHECK(kit.vec_norm_R(x) >= x.norm() * (1 - 1e-12));
        CHECK(kit.vec_norm_C(x) <= kit.delta_C2 * x.norm() * (1 + 1e-10));
        CHECK(kit.vec_norm_R(x) <= kit.delta_RC * kit.vec_norm_C(x) * (1 + 1e-10));
        const Vec w = W.col(0);
        const Mat row = x.row(0);
        CHECK(kit.vec_norm_R(w * row) ==
              doctest::Approx(kit.vec_norm_R(w) * row.norm()).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("matrix CSV round trip") {
    const Mat R = build_row_stochastic(random_strongly_connected(5, 9, 1));
    std::ostringstream out;
    write_matrix_csv(out, R, "row_stochastic");
    CHECK(out.str().rfind("# rows=5 cols=5 kind=row_stochastic", 0) == 0);
    std::istringstream in(out.str());
    std::string kind;
    CHECK(read_matrix_csv(in, &kind) == R);
    CHECK(kind == "row_stochastic");
  }
}
