#include <doctest.h>

#include "pushpull/objectives.hpp"
#include "pushpull/rng.hpp"

using namespace pushpull;

namespace {

Vec random_vec(CounterRng& rng, Eigen::Index p, double scale = 1.0) {
  Vec x(p);
  for (Eigen::Index i = 0; i < p; ++i) x(i) = scale * rng.normal();
  return x;
}

Mat column(std::initializer_list<double> v) {
  Mat a(Eigen::Index(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) a(i++, 0) = x;
  return a;
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("quadratic optimizers in closed form") {
    const auto a = quadratic_set(column({0, 3, 6}), Vec::Ones(3));
    CHECK(a.x_star(0) == doctest::Approx(3.0).epsilon(1e-12));
    const auto b = quadratic_set(column({0, 3, 0}), (Vec(3) << 1, 2, 1).finished());
    CHECK(b.x_star(0) == doctest::Approx(1.5).epsilon(1e-12));
    const auto c = quadratic_set(column({5}), Vec::Ones(1));
    CHECK(c.x_star(0) == 5.0);
    CHECK(b.mu == 1.0);
    CHECK(b.L == 2.0);
  }

  TEST_CASE("centralized solver") {
    const auto a = quadratic_set(column({0, 3, 6}), Vec::Ones(3));
    CHECK(centralized_solve(a, 1e-13)(0) == doctest::Approx(3.0).epsilon(1e-12));
    const Vec start = a.x_star;
    CHECK(centralized_solve(a, 1e-13, &start)(0) == 3.0);
    const auto h = huber_set(12, 3, 2);
    CHECK(h.gradient_sum(centralized_solve(h, 1e-11)).norm() <= 1e-11);
  }

  TEST_CASE("zero agents") {
    const auto s = quadratic_set_with_zeros(column({9, 1, 2, 3}), Vec::Ones(4), {0});
    CHECK(s.locals[0].kind == LocalObjective::Kind::zero);
    CHECK(s.x_star(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.locals[0].gradient(Vec::Constant(1, 4.0)).norm() == 0.0);
    CHECK_THROWS_AS(quadratic_set_with_zeros(column({1, 2}), Vec::Ones(2), {0, 1}),
                    std::invalid_argument);
  }

  TEST_CASE("Huber construction") {
    const auto h = huber_set(12, 2, 3);
    CHECK(h.gradient_sum(h.x_star).norm() <= 1e-9);
    for (const auto& f : h.locals) {
      CHECK(f.in_quadratic_zone(h.x_star));
      CHECK_FALSE(f.in_quadratic_zone(Vec::Zero(2)));
    }
    // Gradient magnitude is continuous across the zone boundary.
    const auto& f = h.locals[0];
    Vec dir = Vec::Ones(2).normalized();
    const Vec inside = f.center + dir * (f.delta * (1 - 1e-12));
    const Vec outside = f.center + dir * (f.delta * (1 + 1e-12));
    CHECK(f.gradient(inside).norm() == doctest::Approx(f.delta).epsilon(1e-10));
    CHECK(f.gradient(outside).norm() == doctest::Approx(f.delta).epsilon(1e-10));
    const auto single = huber_set(1, 3, 4);
    CHECK((single.x_star - single.locals[0].center).norm() < 1e-12);
    CHECK(single.locals[0].center.norm() > single.locals[0].delta);
  }

  TEST_CASE("gradients match central differences") {
    CounterRng rng(17);
    const auto q = random_quadratic_set(4, 3, 5, 0.5, 3.0);
    const auto h = huber_set(4, 3, 6);
    for (const ObjectiveSet* set : {&q, &h}) {
      for (const auto& f : set->locals) {
        for (int t = 0; t < 100; ++t) {
          const Vec x = f.center + random_vec(rng, 3, 2.0);
          const Vec g = f.gradient(x);
          const double hstep = 1e-6;
          Vec fd(3);
          for (Eigen::Index d = 0; d < 3; ++d) {
            Vec e = Vec::Zero(3);
            e(d) = hstep;
            fd(d) = (f.value(x + e) - f.value(x - e)) / (2 * hstep);
          }
          CHECK((fd - g).norm() <= 1e-6 * std::max(1.0, g.norm()));
        }
      }
    }
  }

  TEST_CASE("strong convexity and smoothness at random pairs") {
    CounterRng rng(23);
    const auto q = random_quadratic_set(5, 2, 8, 0.5, 4.0);
    const auto h = huber_set(5, 2, 8);
    for (int t = 0; t < 1000; ++t) {
      const auto& f = q.locals[std::size_t(t) % 5];
      const Vec x = random_vec(rng, 2, 3.0), y = random_vec(rng, 2, 3.0);
      const Vec dg = f.gradient(x) - f.gradient(y);
      const double d2 = (x - y).squaredNorm();
      CHECK(dg.dot(x - y) >= q.mu * d2 * (1 - 1e-12));
      CHECK(dg.norm() <= q.L * std::sqrt(d2) * (1 + 1e-12));

      // Huber: smooth everywhere, strongly convex inside the basin.
      const auto& fh = h.locals[std::size_t(t) % 5];
      const Vec hx = random_vec(rng, 2, 3.0), hy = random_vec(rng, 2, 3.0);
      CHECK((fh.gradient(hx) - fh.gradient(hy)).norm() <= h.L * (hx - hy).norm() * (1 + 1e-12));
      const Vec bx = h.x_star + random_vec(rng, 2, 0.02), by = h.x_star + random_vec(rng, 2, 0.02);
      CHECK((fh.gradient(bx) - fh.gradient(by)).dot(bx - by) >=
            h.mu * (bx - by).squaredNorm() * (1 - 1e-9));
    }
  }

  TEST_CASE("averaged gradient step contracts") {
    CounterRng rng(31);
    const auto q = random_quadratic_set(6, 3, 2, 1.0, 5.0);
    const double n = 6;
    for (int t = 0; t < 100; ++t) {
      const double ap = (0.05 + 0.95 * rng.uniform()) * 2.0 / (q.mu + q.L);
      const Vec xb = q.x_star + random_vec(rng, 3, 2.0);
      const Vec g = q.gradient_sum(xb) / n;
      CHECK((xb - ap * g - q.x_star).norm() <= (1 - ap * q.mu) * (xb - q.x_star).norm() * (1 + 1e-12));
    }
  }

  TEST_CASE("scaling") {
    const auto q = random_quadratic_set(3, 2, 1, 1.0, 2.0);
    const auto s = q.scaled(2.0);
    CHECK(s.mu == 2 * q.mu);
    CHECK(s.L == 2 * q.L);
    CHECK((s.x_star - q.x_star).norm() < 1e-14);
    CHECK_THROWS_AS(q.scaled(0.0), std::invalid_argument);
  }

  TEST_CASE("spec blocks") {
    const auto a = objective_from_spec({{"type", "random_quadratic"}, {"n", 4}, {"p", 2}, {"seed", 3}});
    const auto b = objective_from_spec(a.spec);
    CHECK((a.x_star - b.x_star).norm() == 0.0);
    CHECK(objective_from_spec({{"type", "huber"}, {"n", 4}, {"p", 2}, {"seed", 3}, {"scale", 0.5}}).L ==
          0.5);
    CHECK_THROWS_WITH_AS(objective_from_spec({{"type", "nope"}}), doctest::Contains("objective.type"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(objective_from_spec({{"type", "huber"}, {"p", 2}, {"seed", 1}}),
                         doctest::Contains("objective.n"), std::invalid_argument);
  }
}
