#include <doctest.h>

#include <map>
#include <sstream>

#include "pushpull/gossip.hpp"
#include "pushpull/mixing.hpp"
#include "pushpull/rng.hpp"

using namespace pushpull;

namespace {

double defect(const NetworkState& s) {
  return (s.y.colwise().sum() - s.grad.colwise().sum()).norm();
}

Mat random_mat(CounterRng& rng, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Digraph pull4() { return Digraph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}); }

}  // namespace

TEST_SUITE("gossip") {
  TEST_CASE("event sampling") {
    const Digraph single(1, {});
    const auto ev = sample_event(single, single, 0.5, 1, 0);
    CHECK(ev.i == 0);
    CHECK_FALSE(ev.j);
    CHECK_FALSE(ev.l);

    const auto ring = ring_graph(4);
    std::map<AgentId, std::size_t> freq;
    const std::size_t K = 100000;
    for (std::uint64_t k = 0; k < K; ++k) ++freq[sample_event(ring, ring, 0.5, 3, k).i];
    for (AgentId i = 0; i < 4; ++i) CHECK(std::abs(double(freq[i]) / K - 0.25) <= 0.01);

    const Digraph star(4, {{0, 1}, {0, 2}, {0, 3}});
    for (std::uint64_t k = 0; k < 200; ++k) {
      const auto e = sample_event(star, star, 0.5, 9, k);
      if (e.i == 1) CHECK_FALSE(e.j);
      if (e.i == 0) CHECK(e.j);
    }
    CHECK(sample_event(ring, ring, 0.5, 3, 42).i == sample_event(ring, ring, 0.5, 3, 42).i);
  }

  TEST_CASE("event matrices") {
    GossipEvent ev{0, 1, 2, 0.5};
    const auto m = event_matrices(ev, 4);
    Mat R = Mat::Identity(4, 4);
    R.row(1) << 0.5, 0.5, 0, 0;
    Mat C = Mat::Identity(4, 4);
    C.col(0) << 0.5, 0, 0.5, 0;
    CHECK(m.R == R);
    CHECK(m.C == C);
    CHECK(m.Q.diagonal() == (Vec(4) << 1, 1, 1, 0).finished());
    CHECK((m.R - Mat::Identity(4, 4) - 0.5 * m.T).norm() == 0.0);

    const auto same = event_matrices(GossipEvent{0, 3, 3, 0.3}, 4);
    CHECK((same.Q.diagonal().array() != 0).count() == 2);
    for (double g : {0.1, 0.37, 0.9}) {
      const auto e = event_matrices(GossipEvent{2, 0, 1, g}, 4);
      CHECK(is_row_stochastic(e.R, 0.0));
      CHECK(is_column_stochastic(e.C, 0.0));
    }
  }

  TEST_CASE("restricted step equals its matrix form") {
    CounterRng rng(8);
    const auto q = random_quadratic_set(4, 2, 2);
    auto s = init_state(q, random_mat(rng, 4, 2));
    const double alpha = 0.07;
    const GossipEvent ev{0, 1, 2, 0.5};
    const auto m = event_matrices(ev, 4);
    const auto before = s;
    gossip_step(s, ev, alpha, q);
    const Mat x1 = m.R * before.x - alpha * m.Q * before.y;
    const Mat y1 = m.C * before.y + q.gradients(x1) - before.grad;
    CHECK((s.x - x1).norm() < 1e-14);
    CHECK((s.y - y1).norm() < 1e-14);
    CHECK(s.x.row(3) == before.x.row(3));
    CHECK(s.y.row(3) == before.y.row(3));

    SUBCASE("no neighbors is a local step") {
      auto t = before;
      gossip_step(t, GossipEvent{2, std::nullopt, std::nullopt, 0.5}, alpha, q);
      Mat x = before.x;
      x.row(2) -= alpha * before.y.row(2);
      CHECK((t.x - x).norm() < 1e-15);
      CHECK((t.y.row(2) - (before.y.row(2) + q.gradients(x).row(2) - before.grad.row(2))).norm() < 1e-14);
    }
  }

  TEST_CASE("tracking identity over many random steps") {
    const auto g = random_strongly_connected(12, 24, 7);
    const auto h = huber_set(12, 3, 5);
    auto s = init_state(h, Mat::Zero(12, 3));
    const Vec alphas = Vec::Constant(12, 0.02);
    for (std::uint64_t k = 0; k < 10000; ++k) gossip_step(s, sample_event(g, g, 0.4, 1, k), 0.02, h);
    CHECK(defect(s) <= 1e-9);
    for (std::uint64_t k = 0; k < 2000; ++k) gossip_all_step(s, AgentId(k % 12), g, g, 0.1, alphas, h);
    CHECK(defect(s) <= 1e-9);
  }

  TEST_CASE("general step") {
    CounterRng rng(12);
    const auto q = random_quadratic_set(4, 2, 3);
    const auto base = init_state(q, random_mat(rng, 4, 2));
    const Vec alphas = Vec::Constant(4, 0.05);

    SUBCASE("single distinct targets match the restricted step") {
      auto a = base, b = base;
      gossip_step(a, GossipEvent{0, 1, 2, 0.3}, 0.05, q);
      gossip_general_step(b, GeneralEvent{0, {1}, {2}, 0.3, 0.3}, alphas, q);
      CHECK((a.x - b.x).norm() < 1e-14);
      CHECK((a.y - b.y).norm() < 1e-14);
    }
    SUBCASE("star center shares with three neighbors") {
      auto s = base;
      gossip_general_step(s, GeneralEvent{0, {1, 2, 3}, {1, 2, 3}, 0.2, 0.2}, alphas, q);
      Mat x1 = base.x;
      x1.row(0) -= 0.05 * base.y.row(0);
      for (Eigen::Index j = 1; j < 4; ++j) {
        x1.row(j) = 0.8 * base.x.row(j) + 0.2 * base.x.row(0) - 2 * 0.05 * base.y.row(j);
      }
      const Mat dg = q.gradients(x1) - base.grad;
      CHECK((s.x - x1).norm() < 1e-14);
      CHECK((s.y.row(0) - (0.4 * base.y.row(0) + dg.row(0))).norm() < 1e-14);
      CHECK((s.y.row(2) - (base.y.row(2) + 0.2 * base.y.row(0) + dg.row(2))).norm() < 1e-14);
      CHECK(defect(s) < 1e-13);
    }
    SUBCASE("guard on the push share") {
      auto s = base;
      CHECK_THROWS_AS(gossip_general_step(s, GeneralEvent{0, {1}, {1, 2, 3}, 0.5, 0.4}, alphas, q),
                      std::invalid_argument);
    }
  }

  TEST_CASE("run_gossip bookkeeping and determinism") {
    const auto g = ring_graph(4);
    const auto q = random_quadratic_set(4, 2, 3);
    GossipRunOptions o;
    o.gamma = 0.3;
    o.seed = 5;
    o.budget = 50;
    std::vector<GossipEventRecord> ev1, ev2;
    const auto t1 = run_gossip(q, g, g, Vec::Constant(4, 0.05), o, &ev1);
    const auto t2 = run_gossip(q, g, g, Vec::Constant(4, 0.05), o, &ev2);
    CHECK(t1.records.size() == 51);
    CHECK(ev1.size() == 50 * o.ticks_per_record);
    std::ostringstream a, b;
    write_trace_csv(a, t1);
    write_trace_csv(b, t2);
    CHECK(a.str() == b.str());
    std::ostringstream log;
    write_event_log(log, ev1);
    CHECK(log.str().rfind("k,i_k,j_k,l_k\n", 0) == 0);
    CHECK(gossip_mode_from_string("all") == GossipMode::all);
    o.mode = GossipMode::restricted;
    CHECK_THROWS_AS(run_gossip(q, g, g, (Vec(4) << 0.1, 0.2, 0.1, 0.1).finished(), o),
                    std::invalid_argument);
  }

  TEST_CASE("expected matrices by enumeration") {
    const auto g = pull4();
    const auto outcomes = enumerate_outcomes(g, g);
    double total = 0;
    for (const auto& o : outcomes) total += o.probability;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));

    const auto a = analyze_gossip(g, g);
    Mat T_bar = Mat::Zero(4, 4);
    for (const auto& o : outcomes) T_bar += o.probability * event_matrices(GossipEvent{o.i, o.j, o.l, 1.0}, 4).T;
    CHECK((T_bar - a.T_bar).norm() < 1e-14);
    CHECK(a.eta > 0);
    CHECK((a.u_bar.transpose() * a.T_bar).norm() < 1e-12);
    CHECK(a.u_bar.sum() == doctest::Approx(4.0));
    CHECK((a.E_bar * a.v_bar).norm() < 1e-12);
    CHECK(a.gamma_bar_R() > 0);
    CHECK(a.gamma_bar_C() <= 1.0);
    CHECK_THROWS_AS(analyze_gossip(Digraph(3, {}), Digraph(3, {})), std::runtime_error);
  }
}
