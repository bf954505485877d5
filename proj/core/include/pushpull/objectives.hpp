#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushpull/linalg.hpp"

namespace pushpull {

/// One agent's objective. Gradients are pure and reentrant.
struct LocalObjective {
  enum class Kind { quadratic, huber, zero };

  Kind kind = Kind::zero;
  Vec center;          ///< a_i
  double weight = 1;   ///< quadratic curvature w_i
  double delta = 1;    ///< Huber transition radius

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  /// True when x lies in the region where the function is quadratic.
  bool in_quadratic_zone(const Vec& x) const;
};

struct ObjectiveSet {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<LocalObjective> locals;
  double mu = 0;  ///< strong convexity of the non-zero locals (quadratic zone for Huber)
  double L = 0;
  Vec x_star;
  nlohmann::json spec;  ///< reproducible description, empty for ad hoc sets

  /// Row i of the result is grad f_i(x.row(i)).
  Mat gradients(const Mat& x) const;
  /// sum_i grad f_i(x), x a single point.
  Vec gradient_sum(const Vec& x) const;
  double value_sum(const Vec& x) const;

  /// Returns a copy with all objectives scaled by t (mu, L, x_star follow).
  ObjectiveSet scaled(double t) const;
};

/// f_i(x) = w_i ||x - a_i||^2 / 2. a is n x p. Throws std::invalid_argument
/// on nonpositive weights or shape mismatch.
ObjectiveSet quadratic_set(const Mat& a, const Vec& weights);

/// Random quadratic targets from a unit Gaussian, weights uniform in
/// [w_min, w_max].
ObjectiveSet random_quadratic_set(std::size_t n, std::size_t p, std::uint64_t seed,
                                  double w_min = 1.0, double w_max = 1.0);

/// Quadratic set with agents in `silent` replaced by the zero function.
/// Throws std::invalid_argument if every agent is silent.
ObjectiveSet quadratic_set_with_zeros(const Mat& a, const Vec& weights,
                                      const std::vector<std::size_t>& silent);

/// f_i(x) = H_delta(||x - a_i||). Centers are a Gaussian cloud shifted by
/// offset_scale * delta along its mean direction and shrunk so the optimizer
/// sits within 0.9 delta of every center; the origin then lies in the linear
/// zone of every local term when offset_scale > 1.9. Throws
/// std::runtime_error if no valid draw is found within 100 attempts.
ObjectiveSet huber_set(std::size_t n, std::size_t p, std::uint64_t seed, double delta = 1.0,
                       double offset_scale = 5.0);

/// Gradient descent on sum_i f_i / n with stepsize 2/(mu+L) until
/// ||sum_i grad f_i|| <= tol. Throws std::runtime_error past max_iter.
Vec centralized_solve(const ObjectiveSet& obj, double tol, const Vec* start = nullptr,
                      std::size_t max_iter = 1000000);

/// Builds a set from its spec block ({"type", "n", "p", "seed", ...}).
ObjectiveSet objective_from_spec(const nlohmann::json& spec);

}  // namespace pushpull
