#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <fstream>

#include "pushpull/certify.hpp"
#include "pushpull/rng.hpp"

using namespace pushpull;
using nlohmann::json;

namespace {

const std::string kGolden = std::string(PUSHPULL_SOURCE_DIR) + "/tests/golden/";

json load_golden(const std::string& name) {
  std::ifstream in(kGolden + name);
  REQUIRE(in);
  return json::parse(in);
}

struct SyncInstance {
  MixingPair pair;
  NormKit kit;
  ObjectiveSet obj;
  SyncConstants k;
};

SyncInstance sync_instance(const Digraph& g, const ObjectiveSet& obj) {
  SyncInstance s;
  s.pair = make_mixing_pair(g, g);
  s.kit = build_norm_kit(s.pair);
  s.obj = obj;
  s.k = sync_constants(s.pair, s.kit, obj);
  return s;
}

SyncConstants constants_from(const json& j) {
  SyncConstants k;
  k.n = j.at("n");
  k.mu = j.at("mu");
  k.L = j.at("L");
  k.sigma_R = j.at("sigma_R");
  k.sigma_C = j.at("sigma_C");
  k.delta_RC = j.at("delta_RC");
  k.delta_C2 = j.at("delta_C2");
  k.c0 = j.at("c0");
  k.R_norm = j.at("R_norm2");
  k.R_minus_I_norm = j.at("R_minus_I_norm2");
  k.u_norm = j.at("u_norm2");
  k.v_norm = j.at("v_norm2");
  k.v_norm_R = j.at("v_norm_R");
  k.u_dot_v = j.at("u_dot_v");
  return k;
}

}  // namespace

TEST_SUITE("certify") {
  TEST_CASE("spectral radius of 3x3 nonnegative matrices") {
    CounterRng rng(3);
    for (int t = 0; t < 50; ++t) {
      Eigen::Matrix3d m;
      for (int i = 0; i < 9; ++i) m.data()[i] = rng.uniform();
      const double oracle = Eigen::EigenSolver<Eigen::Matrix3d>(m).eigenvalues().cwiseAbs().maxCoeff();
      CHECK(spectral_radius3(m) == doctest::Approx(oracle).epsilon(1e-12));
    }
  }

  TEST_CASE("spectral radius close to one with badly scaled entries") {
    // Row sums all equal c, conjugated by powers of two: rho = c exactly.
    const double c = 1.0 - std::ldexp(1.0, -43);
    Eigen::Matrix3d p;
    p << 0.25, 0.25, 0.5, 0.5, 0.25, 0.25, 0.125, 0.375, 0.5;
    const Eigen::Vector3d d(std::ldexp(1.0, -14), 1.0, std::ldexp(1.0, 13));
    const Eigen::Matrix3d m = d.asDiagonal() * (c * p) * d.cwiseInverse().asDiagonal();
    CHECK(std::abs(spectral_radius3(m) - c) <= 1e-15);
    CHECK(spectral_radius3(m) < 1.0);
  }

  TEST_CASE("norm slack selection") {
    const auto g = random_strongly_connected(7, 11, 1051);
    const auto obj = random_quadratic_set(7, 2, 2051, 1.0, 3.0);
    const auto pair = make_mixing_pair(g, g);
    const double M = pair.u.dot(pair.v) / 7;
    const double base = alpha_bound_theorem1(sync_constants(pair, build_norm_kit(pair), obj), M).alpha_hat;
    const auto kit = norm_kit_for_bound(pair, obj, M);
    const double tuned = alpha_bound_theorem1(sync_constants(pair, kit, obj), M).alpha_hat;
    CHECK(tuned >= base);
    CHECK(kit.sigma_R < 1.0);
    CHECK(kit.sigma_C < 1.0);

    const auto prof = make_profile(Vec::Constant(7, tuned), pair.u, pair.v);
    const auto best = norm_kit_for_profile(pair, obj, prof);
    CHECK(build_A(pair, best, obj, prof).rho <= build_A(pair, kit, obj, prof).rho);
    CHECK(build_A(pair, best, obj, prof).rho < 1.0);
  }

  TEST_CASE("gossip scaling selection") {
    const auto g = random_strongly_connected(6, 9, 417);
    const auto obj = random_quadratic_set(6, 2, 517, 1.0, 2.0);
    const auto base = analyze_gossip(g, g);
    const auto tuned = analysis_for_bound(g, g, obj.mu, obj.L);
    const auto b0 = bounds_theorem2(base, obj.mu, obj.L, certified_gamma(base, obj.mu, obj.L));
    const double gamma = certified_gamma(tuned, obj.mu, obj.L);
    const auto b1 = bounds_theorem2(tuned, obj.mu, obj.L, gamma);
    REQUIRE(b1.gamma_ok);
    CHECK(b1.alpha_bound >= b0.alpha_bound);
    CHECK(build_B(gossip_constants(tuned, obj.mu, obj.L, gamma), b1.alpha_bound).rho < 1.0);
    // Same expectations, only the similarity scaling differs.
    CHECK((tuned.T_bar - base.T_bar).norm() == 0.0);
  }

  TEST_CASE("comparison matrix A matches the golden instance") {
    const json g = load_golden("cycle3_A.json");
    const auto s = sync_instance(ring_graph(3), objective_from_spec(g.at("objective")));
    // Regression on the constants themselves.
    for (const auto& [name, value] : g.at("constants").items()) {
      CAPTURE(name);
      const auto c = build_A(s.k, 0, 0).constants;
      REQUIRE(c.count(name));
      CHECK(c.at(name) == doctest::Approx(value.get<double>()).epsilon(1e-9));
    }
    const auto cert = build_A(constants_from(g.at("constants")), g.at("alpha_prime"), g.at("alpha_hat"));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(cert.matrix(i, j) == doctest::Approx(g.at("A")[i][j].get<double>()).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("comparison matrix B matches the golden instance") {
    const json g = load_golden("ring4_B.json");
    const auto a = analyze_gossip(ring_graph(4), ring_graph(4));
    const auto obj = objective_from_spec(g.at("objective"));
    const auto gc = gossip_constants(a, obj.mu, obj.L, g.at("gamma"));
    const auto cert = build_B(gc, g.at("alpha"));
    for (const auto& [name, value] : g.at("constants").items()) {
      CAPTURE(name);
      REQUIRE(cert.constants.count(name));
      CHECK(cert.constants.at(name) == doctest::Approx(value.get<double>()).epsilon(1e-8));
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CAPTURE(i);
        CAPTURE(j);
        CHECK(cert.matrix(i, j) == doctest::Approx(g.at("B")[i][j].get<double>()).epsilon(1e-8));
      }
    }
  }

  TEST_CASE("A without stepsize makes no progress") {
    const auto s = sync_instance(ring_graph(3), random_quadratic_set(3, 2, 5, 1, 2));
    const auto c = build_A(s.k, 0.0, 0.0);
    CHECK(c.matrix(0, 0) == 1.0);
    CHECK(c.rho == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(build_A(s.k, 2.0 / (s.k.mu + s.k.L) * 1.01, 1.0), std::invalid_argument);
  }

  TEST_CASE("small stepsizes behave like centralized descent") {
    const auto s = sync_instance(ring_graph(3), random_quadratic_set(3, 2, 5, 1, 2));
    const auto b = alpha_bound_theorem1(s.k, s.k.u_dot_v / s.k.n);
    const double a = b.alpha_hat / 100;
    const auto prof = make_profile(Vec::Constant(3, a), s.pair.u, s.pair.v);
    const auto c = build_A(s.pair, s.kit, s.obj, prof);
    CHECK(c.rho < 1.0);
    const double gap = prof.alpha_prime * s.k.mu;
    CHECK(std::abs((1.0 - c.rho) - gap) <= 0.1 * gap);
  }

  TEST_CASE("synchronous stepsize bound") {
    SUBCASE("certified on random instances") {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 3 + seed % 5;
        const auto s = sync_instance(random_strongly_connected(n, n + seed % n, seed),
                                     random_quadratic_set(n, 2, seed, 1, 4));
        const auto b = alpha_bound_theorem1(s.k, s.k.u_dot_v / s.k.n);
        CHECK(b.alpha_hat > 0);
        const auto prof = make_profile(Vec::Constant(Eigen::Index(n), b.alpha_hat), s.pair.u, s.pair.v);
        CHECK(build_A(s.pair, s.kit, s.obj, prof).rho < 1.0);
      }
    }
    SUBCASE("scaling the objectives scales the bound inversely") {
      const auto base = random_quadratic_set(5, 2, 1, 1, 3);
      const auto g = random_strongly_connected(5, 9, 3);
      const auto s = sync_instance(g, base);
      const double b1 = alpha_bound_theorem1(s.k, s.k.u_dot_v / s.k.n).alpha_hat;
      for (double t : {0.5, 2.0}) {
        const auto st = sync_instance(g, base.scaled(t));
        const double bt = alpha_bound_theorem1(st.k, st.k.u_dot_v / st.k.n).alpha_hat;
        CHECK(bt == doctest::Approx(b1 / t).epsilon(1e-10));
      }
    }
    SUBCASE("bound vanishes as sigma_C approaches one") {
      const auto s = sync_instance(ring_graph(4), random_quadratic_set(4, 2, 2));
      auto k = s.k;
      double last = alpha_bound_theorem1(k, 1.0).alpha_hat;
      for (double gap : {1e-2, 1e-4, 1e-6}) {
        k.sigma_C = 1.0 - gap;
        const double b = alpha_bound_theorem1(k, 1.0).alpha_hat;
        CHECK(b < last);
        last = b;
      }
      CHECK(last < 1e-6);
    }
    SUBCASE("equal stepsizes report M as u'v/n") {
      const auto s = sync_instance(random_strongly_connected(5, 9, 2), random_quadratic_set(5, 2, 2));
      const auto c = build_A(s.pair, s.kit, s.obj, make_profile(Vec::Constant(5, 1e-4), s.pair.u, s.pair.v));
      CHECK(c.constants.at("M") == doctest::Approx(s.pair.u.dot(s.pair.v) / 5));
      CHECK(c.diagnostics.front() == "M rule: u^T v / n");
    }
  }

  TEST_CASE("gossip certificate") {
    const auto a = analyze_gossip(ring_graph(4), ring_graph(4));
    const auto obj = random_quadratic_set(4, 2, 3, 1, 2);
    SUBCASE("no stepsize, no progress") {
      const auto c = build_B(gossip_constants(a, obj.mu, obj.L, 0.01), 0.0);
      CHECK(c.matrix(0, 0) == 1.0);
      CHECK(c.rho >= 1.0);
    }
    SUBCASE("certified pair contracts") {
      const double gamma = certified_gamma(a, obj.mu, obj.L);
      const auto b = bounds_theorem2(a, obj.mu, obj.L, gamma);
      REQUIRE(b.gamma_ok);
      CHECK(build_B(gossip_constants(a, obj.mu, obj.L, gamma), b.alpha_bound).rho < 1.0);
      CHECK(build_B(gossip_constants(a, obj.mu, obj.L, gamma / 4), b.alpha_bound / 2).rho >= 0.0);
    }
    SUBCASE("gamma limit of c6") {
      const double gamma = 1e-4;
      const auto b = bounds_theorem2(a, obj.mu, obj.L, gamma);
      const auto g = gossip_constants(a, obj.mu, obj.L, gamma);
      const double lead = a.eta * obj.mu * (1 - g.sigma_R) * (1 - g.sigma_C) / 32;
      CHECK(b.c6 > 0);
      CHECK(b.c6 == doctest::Approx(lead).epsilon(1e-2));
    }
    SUBCASE("gamma above the cap") {
      const auto b = bounds_theorem2(a, obj.mu, obj.L, 0.95);
      CHECK_FALSE(b.gamma_ok);
      CHECK(b.diagnostic.find("gamma too large") != std::string::npos);
      CHECK_THROWS_AS(gossip_constants(a, obj.mu, obj.L, 0.99), std::domain_error);
    }
    SUBCASE("entries change smoothly with gamma") {
      const auto b1 = build_B(gossip_constants(a, obj.mu, obj.L, 0.02), 1e-4);
      const auto b2 = build_B(gossip_constants(a, obj.mu, obj.L, 0.01), 1e-4);
      for (int i = 0; i < 9; ++i) {
        const double x = b1.matrix.data()[i], y = b2.matrix.data()[i];
        if (x == 0 && y == 0) continue;
        CHECK(y / x < 8.0);
        CHECK(y / x > 1.0 / 8.0);
      }
    }
  }

  TEST_CASE("rate fitting") {
    std::vector<double> k, v;
    for (int i = 0; i < 100; ++i) {
      k.push_back(i);
      v.push_back(3.0 * std::pow(0.93, i));
    }
    CHECK(fit_rate(k, v).rate == doctest::Approx(0.93).epsilon(1e-10));

    // Gradient descent on a two-curvature quadratic with the optimal stepsize.
    const double mu = 1.0, L = 9.0, a = 2.0 / (mu + L);
    Eigen::Vector2d x(1.0, 1.0);
    const double x0 = x.squaredNorm();
    k.clear();
    v.clear();
    for (int i = 0; i < 60; ++i) {
      k.push_back(i);
      v.push_back(x.squaredNorm() / x0);
      x = Eigen::Vector2d((1 - a * mu) * x(0), (1 - a * L) * x(1));
    }
    const double expected = std::pow((L - mu) / (L + mu), 2);
    CHECK(fit_rate(k, v).rate == doctest::Approx(expected).epsilon(1e-10));

    std::vector<double> short_k{0, 1, 2}, short_v{1, 0.5, 0.25};
    CHECK_THROWS_AS(fit_rate(short_k, short_v), std::invalid_argument);
    std::vector<double> fk, fv;
    for (int i = 0; i < 40; ++i) {
      fk.push_back(i);
      fv.push_back(i < 30 ? std::pow(0.5, i) : 0.0);
    }
    const auto f = fit_rate(fk, fv, FitWindow{0, 1e300, 1e-300, 20});
    CHECK(f.floor_reached);
    CHECK(f.points == 30);
  }

  TEST_CASE("certificate JSON") {
    const auto s = sync_instance(ring_graph(3), random_quadratic_set(3, 2, 5));
    auto c = build_A(s.k, 0.01, 0.01);
    c.constants["bad"] = std::numeric_limits<double>::infinity();
    const json j = to_json(c);
    CHECK(j.at("kind") == "synchronous");
    CHECK(j.at("constants").at("bad").is_null());
    CHECK(j.at("matrix").size() == 3);
  }
}
