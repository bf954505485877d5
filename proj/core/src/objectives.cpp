#include "pushpull/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pushpull/rng.hpp"

namespace pushpull {

double LocalObjective::value(const Vec& x) const {
  switch (kind) {
    case Kind::quadratic:
      return 0.5 * weight * (x - center).squaredNorm();
    case Kind::huber: {
      const double r = (x - center).norm();
      return weight * (r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta));
    }
    case Kind::zero:
      break;
  }
  return 0.0;
}

Vec LocalObjective::gradient(const Vec& x) const {
  switch (kind) {
    case Kind::quadratic:
      return weight * (x - center);
    case Kind::huber: {
      const Vec d = x - center;
      const double r = d.norm();
      if (r <= delta) return weight * d;
      return (weight * delta / r) * d;
    }
    case Kind::zero:
      break;
  }
  return Vec::Zero(x.size());
}

bool LocalObjective::in_quadratic_zone(const Vec& x) const {
  if (kind != Kind::huber) return true;
  return (x - center).norm() <= delta;
}

Mat ObjectiveSet::gradients(const Mat& x) const {
  if (static_cast<std::size_t>(x.rows()) != n || static_cast<std::size_t>(x.cols()) != p) {
    throw std::invalid_argument("gradients: expected " + std::to_string(n) + "x" +
                                std::to_string(p) + " input");
  }
  Mat g(x.rows(), x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    g.row(row) = locals[i].gradient(x.row(row).transpose()).transpose();
  }
  return g;
}

Vec ObjectiveSet::gradient_sum(const Vec& x) const {
  Vec g = Vec::Zero(static_cast<Eigen::Index>(p));
  for (const auto& f : locals) g += f.gradient(x);
  return g;
}

double ObjectiveSet::value_sum(const Vec& x) const {
  double total = 0.0;
  for (const auto& f : locals) total += f.value(x);
  return total;
}

ObjectiveSet ObjectiveSet::scaled(double t) const {
  if (!(t > 0.0)) throw std::invalid_argument("ObjectiveSet::scaled: t must be positive");
  ObjectiveSet out = *this;
  for (auto& f : out.locals) f.weight *= t;
  out.mu *= t;
  out.L *= t;
  if (!out.spec.is_null()) out.spec["scale"] = out.spec.value("scale", 1.0) * t;
  return out;
}

namespace {

void finish_quadratic(ObjectiveSet& set) {
  double w_sum = 0.0;
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(set.p));
  set.mu = std::numeric_limits<double>::infinity();
  set.L = 0.0;
  for (const auto& f : set.locals) {
    if (f.kind == LocalObjective::Kind::zero) continue;
    w_sum += f.weight;
    acc += f.weight * f.center;
    set.mu = std::min(set.mu, f.weight);
    set.L = std::max(set.L, f.weight);
  }
  if (w_sum <= 0.0) throw std::invalid_argument("objective set has no non-zero agent");
  set.x_star = acc / w_sum;
}

}  // namespace

ObjectiveSet quadratic_set_with_zeros(const Mat& a, const Vec& weights,
                                      const std::vector<std::size_t>& silent) {
  if (a.rows() == 0 || a.cols() == 0) throw std::invalid_argument("quadratic_set: empty targets");
  if (weights.size() != a.rows()) {
    throw std::invalid_argument("quadratic_set: weights length does not match agent count");
  }
  ObjectiveSet set;
  set.n = static_cast<std::size_t>(a.rows());
  set.p = static_cast<std::size_t>(a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (!(weights(i) > 0.0)) {
      throw std::invalid_argument("quadratic_set: weight of agent " + std::to_string(i + 1) +
                                  " must be positive");
    }
    LocalObjective f;
    const bool quiet = std::find(silent.begin(), silent.end(), static_cast<std::size_t>(i)) !=
                       silent.end();
    f.kind = quiet ? LocalObjective::Kind::zero : LocalObjective::Kind::quadratic;
    f.center = a.row(i).transpose();
    f.weight = weights(i);
    set.locals.push_back(std::move(f));
  }
  finish_quadratic(set);
  return set;
}

ObjectiveSet quadratic_set(const Mat& a, const Vec& weights) {
  return quadratic_set_with_zeros(a, weights, {});
}

ObjectiveSet random_quadratic_set(std::size_t n, std::size_t p, std::uint64_t seed, double w_min,
                                  double w_max) {
  if (n == 0 || p == 0) throw std::invalid_argument("random_quadratic_set: n and p must be positive");
  if (!(w_min > 0.0) || w_max < w_min) {
    throw std::invalid_argument("random_quadratic_set: need 0 < w_min <= w_max");
  }
  CounterRng rng(seed, 0x71756164ULL);
  Mat a(n, p);
  Vec w(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < p; ++c) a(i, c) = rng.normal();
    w(i) = w_min + (w_max - w_min) * rng.uniform();
  }
  auto set = quadratic_set(a, w);
  set.spec = {{"type", "random_quadratic"}, {"n", n},      {"p", p},
              {"seed", seed},               {"w_min", w_min}, {"w_max", w_max}};
  return set;
}

ObjectiveSet huber_set(std::size_t n, std::size_t p, std::uint64_t seed, double delta,
                       double offset_scale) {
  if (n == 0 || p == 0) throw std::invalid_argument("huber_set: n and p must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("huber_set: delta must be positive");
  if (!(offset_scale > 1.9)) {
    throw std::invalid_argument("huber_set: offset_scale must exceed 1.9 to keep the origin "
                                "outside the quadratic zones");
  }
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    CounterRng rng(seed, hash_words(0x68756265ULL, attempt));
    Mat c(n, p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < p; ++k) c(i, k) = rng.normal();
    }
    const Vec mean = c.colwise().mean().transpose();
    if (mean.norm() < 1e-8) continue;
    const Vec target = offset_scale * delta * mean / mean.norm();
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      spread = std::max(spread, (c.row(i).transpose() - mean).norm());
    }
    if (n > 1 && spread < 1e-12) continue;

    ObjectiveSet set;
    set.n = n;
    set.p = p;
    set.mu = 1.0;
    set.L = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      LocalObjective f;
      f.kind = LocalObjective::Kind::huber;
      f.delta = delta;
      f.center = n == 1 ? target : Vec(target + 0.9 * delta * (c.row(i).transpose() - mean) / spread);
      set.locals.push_back(std::move(f));
    }
    const Vec start = target;
    set.x_star = centralized_solve(set, 1e-12, &start);

    const Vec origin = Vec::Zero(static_cast<Eigen::Index>(p));
    const bool inside = std::all_of(set.locals.begin(), set.locals.end(), [&](const auto& f) {
      return (set.x_star - f.center).norm() < delta;
    });
    const bool origin_linear = std::any_of(set.locals.begin(), set.locals.end(),
                                           [&](const auto& f) { return !f.in_quadratic_zone(origin); });
    if (!inside || !origin_linear) continue;
    set.spec = {{"type", "huber"},   {"n", n},         {"p", p},
                {"seed", seed},      {"delta", delta}, {"offset_scale", offset_scale}};
    return set;
  }
  throw std::runtime_error("huber_set: zone conditions not met in 100 attempts");
}

Vec centralized_solve(const ObjectiveSet& obj, double tol, const Vec* start, std::size_t max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("centralized_solve: tol must be positive");
  Vec x = start ? *start : (obj.x_star.size() ? obj.x_star : Vec::Zero(Eigen::Index(obj.p)));
  const double step = 2.0 / (obj.mu + obj.L);
  const double n = static_cast<double>(obj.n);
  for (std::size_t it = 0; it <= max_iter; ++it) {
    const Vec g = obj.gradient_sum(x);
    if (g.norm() <= tol) return x;
    x -= step * g / n;
  }
  std::ostringstream msg;
  msg << "centralized_solve: no convergence to tol " << tol << " in " << max_iter << " iterations";
  throw std::runtime_error(msg.str());
}

namespace {

template <class T>
T spec_get(const nlohmann::json& spec, const char* key) {
  if (!spec.contains(key)) throw std::invalid_argument(std::string("objective.") + key + ": missing");
  try {
    return spec.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("objective.") + key + ": wrong type");
  }
}

template <class T>
T spec_get(const nlohmann::json& spec, const char* key, T fallback) {
  return spec.contains(key) ? spec_get<T>(spec, key) : fallback;
}

}  // namespace

ObjectiveSet objective_from_spec(const nlohmann::json& spec) {
  if (!spec.is_object()) throw std::invalid_argument("objective: must be an object");
  const auto type = spec_get<std::string>(spec, "type");
  ObjectiveSet set;
  if (type == "huber") {
    set = huber_set(spec_get<std::size_t>(spec, "n"), spec_get<std::size_t>(spec, "p"),
                    spec_get<std::uint64_t>(spec, "seed"), spec_get<double>(spec, "delta", 1.0),
                    spec_get<double>(spec, "offset_scale", 5.0));
  } else if (type == "random_quadratic") {
    set = random_quadratic_set(spec_get<std::size_t>(spec, "n"), spec_get<std::size_t>(spec, "p"),
                               spec_get<std::uint64_t>(spec, "seed"),
                               spec_get<double>(spec, "w_min", 1.0),
                               spec_get<double>(spec, "w_max", 1.0));
  } else if (type == "quadratic") {
    const auto targets = spec_get<std::vector<std::vector<double>>>(spec, "targets");
    if (targets.empty() || targets.front().empty()) {
      throw std::invalid_argument("objective.targets: must be a nonempty n x p array");
    }
    Mat a(targets.size(), targets.front().size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i].size() != targets.front().size()) {
        throw std::invalid_argument("objective.targets: rows have different lengths");
      }
      for (std::size_t k = 0; k < targets[i].size(); ++k) a(i, k) = targets[i][k];
    }
    Vec w = Vec::Ones(a.rows());
    if (spec.contains("weights")) {
      const auto ws = spec_get<std::vector<double>>(spec, "weights");
      if (ws.size() != targets.size()) {
        throw std::invalid_argument("objective.weights: length must equal number of targets");
      }
      for (std::size_t i = 0; i < ws.size(); ++i) w(i) = ws[i];
    }
    std::vector<std::size_t> silent;
    for (auto id : spec_get<std::vector<std::size_t>>(spec, "zero_agents", {})) {
      if (id < 1 || id > targets.size()) {
        throw std::invalid_argument("objective.zero_agents: id out of range");
      }
      silent.push_back(id - 1);
    }
    try {
      set = quadratic_set_with_zeros(a, w, silent);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("objective.weights: ") + e.what());
    }
  } else {
    throw std::invalid_argument("objective.type: unknown type '" + type + "'");
  }
  if (spec.contains("n") && spec_get<std::size_t>(spec, "n") != set.n) {
    throw std::invalid_argument("objective.n: does not match targets");
  }
  set.spec = spec;
  if (spec.contains("scale")) set = set.scaled(spec_get<double>(spec, "scale"));
  set.spec = spec;
  return set;
}

}  // namespace pushpull
