#pragma once

// Row-selection algorithms for vector (one mode) and Kronecker-structured
// (several modes) sampling problems. Every sampler is deterministic given its
// inputs and seed; ties are broken towards the smallest (mode, row) index.

#include <cstdint>
#include <optional>
#include <vector>

#include "kronsampler/linalg.hpp"
#include "kronsampler/problem.hpp"

namespace kronsampler {

/// Keeps the `budget` rows with the smallest ffw_scores.
Selection ffw_vector(const FactorMatrix& factor, std::size_t budget);

/// Pools the per-mode normalized scores. The K_r best rows of every mode are
/// taken first so the floors hold; the rest of the budget goes to the smallest
/// leftover scores across all modes.
Selection ffw_tensor(const ProblemInstance& instance);

/// FrameSense: starting from every row, repeatedly drops the row whose removal
/// leaves the smallest frame potential until `budget` rows remain.
Selection frame_sense(const FactorMatrix& factor, std::size_t budget);

struct RemovalStep {
  std::size_t mode;
  std::size_t row;  // 0-based
  /// Product frame potential right after this removal.
  double fp_after;
};

/// Greedy FP over several modes: repeatedly drops the single row, from any
/// mode still above its floor, that minimizes the product frame potential.
/// `trace`, when given, receives every removal in order.
Selection greedy_fp_tensor(const ProblemInstance& instance, std::vector<RemovalStep>* trace = nullptr);

/// Uniformly random feasible selection: every selection with Σ|L_r| = L and
/// |L_r| ≥ K_r is equally likely. Reproducible from `seed`.
Selection random_selection(const ProblemInstance& instance, std::uint64_t seed);

enum class Objective { fp, mse };

inline constexpr std::uint64_t kDefaultEnumerationGuard = 10'000'000;

/// Number of subset evaluations `exhaustive_optimum` performs. Both
/// objectives are products of per-mode terms, so each mode and size is
/// enumerated once rather than the full cross product.
std::uint64_t exhaustive_work(const ProblemInstance& instance);

/// Global minimizer of the objective over all feasible selections, ties broken
/// towards the lexicographically smallest per-mode index lists. For `mse`,
/// rank-deficient subsets count as +infinity. Throws ResourceError when the
/// work exceeds `guard`; use `best_of_random` instead.
Selection exhaustive_optimum(const ProblemInstance& instance, Objective objective,
                             std::uint64_t guard = kDefaultEnumerationGuard);

/// Best of `draws` random selections (seeds seed, seed+1, ...). Stand-in for
/// the optimum when enumeration is out of reach.
Selection best_of_random(const ProblemInstance& instance, Objective objective, std::size_t draws,
                         std::uint64_t seed);

/// `value` of a selection under `objective`; +infinity for rank-deficient mse.
double objective_value(const ProblemInstance& instance, const Selection& sel, Objective objective);

}  // namespace kronsampler
