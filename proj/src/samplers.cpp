#include "kronsampler/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "kronsampler/errors.hpp"
#include "kronsampler/frame_potential.hpp"

namespace kronsampler {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_vector_budget(const FactorMatrix& factor, std::size_t budget) {
  if (budget < factor.cols() || budget > factor.rows()) {
    throw ValidationError("budget " + std::to_string(budget) + " outside [" +
                          std::to_string(factor.cols()) + ", " + std::to_string(factor.rows()) + "]");
  }
}

/// Indices of `scores` ordered by (score, index).
std::vector<std::size_t> ascending_order(const Vector& scores) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });
  return order;
}

IndexSet sorted_set(std::vector<std::size_t> idx, std::size_t universe) {
  std::sort(idx.begin(), idx.end());
  return IndexSet(std::move(idx), universe);
}

// State of one mode during greedy worst-out removal. `quad[n]` tracks
// u_n T u_nᵀ for the current Gram T of the kept rows, so dropping row n changes
// the mode's frame potential to fp − 2·quad[n] + ‖u_n‖⁴.
struct RemovalMode {
  const Matrix* rows;
  Matrix t;
  double fp;
  Vector quad;
  Vector norm4;
  std::vector<char> kept;
  std::size_t count;
  std::size_t floor;
};

Selection greedy_removal(std::span<const FactorMatrix> factors, std::size_t budget,
                         std::vector<RemovalStep>* trace) {
  std::vector<RemovalMode> modes;
  std::size_t total = 0;
  for (const auto& f : factors) {
    RemovalMode m;
    m.rows = &f.matrix();
    m.t = f.gram();
    m.fp = f.full_fp();
    m.quad = ffw_scores(f);
    m.norm4 = f.matrix().rowwise().squaredNorm().array().square();
    m.kept.assign(f.rows(), 1);
    m.count = f.rows();
    m.floor = f.cols();
    total += m.count;
    modes.push_back(std::move(m));
  }

  const std::size_t r_count = modes.size();
  std::vector<double> others(r_count);
  while (total > budget) {
    for (std::size_t r = 0; r < r_count; ++r) {
      others[r] = 1.0;
      for (std::size_t a = 0; a < r_count; ++a) {
        if (a != r) others[r] *= modes[a].fp;
      }
    }

    double best = kInf;
    std::size_t best_mode = r_count;
    std::size_t best_row = 0;
    for (std::size_t r = 0; r < r_count; ++r) {
      const auto& m = modes[r];
      if (m.count <= m.floor) continue;
      for (std::size_t n = 0; n < m.kept.size(); ++n) {
        if (!m.kept[n]) continue;
        const auto i = static_cast<Eigen::Index>(n);
        const double value = (m.fp - 2.0 * m.quad(i) + m.norm4(i)) * others[r];
        if (value < best || best_mode == r_count) {
          best = value;
          best_mode = r;
          best_row = n;
        }
      }
    }
    if (best_mode == r_count) throw ValidationError("no removable row left above the floors");

    auto& m = modes[best_mode];
    const auto v = m.rows->row(static_cast<Eigen::Index>(best_row));
    m.kept[best_row] = 0;
    --m.count;
    --total;
    m.t.noalias() -= v.transpose() * v;
    m.fp = m.t.squaredNorm();
    const Vector inner = (*m.rows) * v.transpose();
    m.quad.array() -= inner.array().square();

    if (trace) {
      double fp = 1.0;
      for (const auto& mm : modes) fp *= mm.fp;
      trace->push_back({best_mode, best_row, fp});
    }
  }

  Selection sel;
  for (const auto& m : modes) {
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < m.kept.size(); ++n) {
      if (m.kept[n]) idx.push_back(n);
    }
    sel.modes.emplace_back(std::move(idx), m.kept.size());
  }
  return sel;
}

double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

Selection random_selection_impl(const ProblemInstance& instance, std::mt19937_64& rng) {
  const std::size_t r_count = instance.modes();
  const std::size_t budget = instance.budget();

  // log_ways[r][l]: log of the number of ways modes r..R-1 can hold l sensors.
  std::vector<std::vector<double>> log_ways(r_count + 1, std::vector<double>(budget + 1, -kInf));
  log_ways[r_count][0] = 0.0;
  for (std::size_t r = r_count; r-- > 0;) {
    const auto& f = instance.factor(r);
    for (std::size_t l = 0; l <= budget; ++l) {
      double acc = -kInf;
      for (std::size_t a = f.cols(); a <= std::min(f.rows(), l); ++a) {
        if (log_ways[r + 1][l - a] == -kInf) continue;
        acc = log_add(acc, log_binomial(f.rows(), a) + log_ways[r + 1][l - a]);
      }
      log_ways[r][l] = acc;
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Selection sel;
  std::size_t remaining = budget;
  for (std::size_t r = 0; r < r_count; ++r) {
    const auto& f = instance.factor(r);
    const double u = unit(rng);
    double cumulative = 0.0;
    // rounding can leave u above the final cumulative sum; the last size wins then
    std::size_t size = 0;
    for (std::size_t a = f.cols(); a <= std::min(f.rows(), remaining); ++a) {
      if (log_ways[r + 1][remaining - a] == -kInf) continue;
      size = a;
      cumulative +=
          std::exp(log_binomial(f.rows(), a) + log_ways[r + 1][remaining - a] - log_ways[r][remaining]);
      if (u < cumulative) break;
    }
    remaining -= size;

    std::vector<std::size_t> pool(f.rows());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(size);
    sel.modes.push_back(sorted_set(std::move(pool), f.rows()));
  }
  return sel;
}

double mode_objective(const Matrix& m, const IndexSet& set, Objective objective) {
  return objective == Objective::fp ? frame_potential(m, set) : mode_trace_inverse(m, set);
}

struct SizeRange {
  std::size_t lo;
  std::size_t hi;
};

std::vector<SizeRange> feasible_sizes(const ProblemInstance& instance) {
  const std::size_t budget = instance.budget();
  const std::size_t n_total = instance.total_rows();
  const std::size_t k_total = instance.total_floor();
  std::vector<SizeRange> out;
  for (std::size_t r = 0; r < instance.modes(); ++r) {
    const auto& f = instance.factor(r);
    const std::size_t n_other = n_total - f.rows();
    const std::size_t k_other = k_total - f.cols();
    const std::size_t lo = std::max<std::size_t>(f.cols(), budget > n_other ? budget - n_other : 0);
    const std::size_t hi = std::min<std::size_t>(f.rows(), budget - k_other);
    out.push_back({lo, hi});
  }
  return out;
}

bool lex_less(const std::vector<IndexSet>& a, const std::vector<IndexSet>& b) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].indices() != b[r].indices()) {
      return std::lexicographical_compare(a[r].begin(), a[r].end(), b[r].begin(), b[r].end());
    }
  }
  return false;
}

struct ModeBest {
  double value = kInf;
  IndexSet set;
};

/// Lexicographically first minimizer over all `size`-subsets of the rows.
ModeBest best_subset(const Matrix& m, std::size_t size, Objective objective) {
  const auto n = static_cast<std::size_t>(m.rows());
  ModeBest best;
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    IndexSet set(idx, n);
    const double value = mode_objective(m, set, objective);
    if (value < best.value || (best.set.universe() == 0 && value == best.value)) {
      best.value = value;
      best.set = std::move(set);
    }
    // next combination in lexicographic order
    std::size_t i = size;
    while (i > 0 && idx[i - 1] == n - size + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < size; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

}  // namespace

Selection ffw_vector(const FactorMatrix& factor, std::size_t budget) {
  require_vector_budget(factor, budget);
  auto order = ascending_order(ffw_scores(factor));
  order.resize(budget);
  Selection sel;
  sel.algorithm = "ffw";
  sel.modes.push_back(sorted_set(std::move(order), factor.rows()));
  return sel;
}

Selection ffw_tensor(const ProblemInstance& instance) {
  const std::size_t r_count = instance.modes();
  std::vector<std::vector<std::size_t>> chosen(r_count);
  // (score, mode, row) of every row not consumed by a floor
  std::vector<std::tuple<double, std::size_t, std::size_t>> pool;
  for (std::size_t r = 0; r < r_count; ++r) {
    const auto& f = instance.factor(r);
    const Vector scores = ffw_scores_normalized(f);
    const auto order = ascending_order(scores);
    chosen[r].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(f.cols()));
    for (std::size_t i = f.cols(); i < order.size(); ++i) {
      pool.emplace_back(scores(static_cast<Eigen::Index>(order[i])), r, order[i]);
    }
  }
  std::sort(pool.begin(), pool.end());
  const std::size_t extra = instance.budget() - instance.total_floor();
  for (std::size_t i = 0; i < extra; ++i) chosen[std::get<1>(pool[i])].push_back(std::get<2>(pool[i]));

  Selection sel;
  sel.algorithm = "ffw";
  for (std::size_t r = 0; r < r_count; ++r) {
    sel.modes.push_back(sorted_set(std::move(chosen[r]), instance.factor(r).rows()));
  }
  return sel;
}

Selection frame_sense(const FactorMatrix& factor, std::size_t budget) {
  require_vector_budget(factor, budget);
  Selection sel = greedy_removal(std::span<const FactorMatrix>(&factor, 1), budget, nullptr);
  sel.algorithm = "framesense";
  return sel;
}

Selection greedy_fp_tensor(const ProblemInstance& instance, std::vector<RemovalStep>* trace) {
  Selection sel = greedy_removal(instance.factors(), instance.budget(), trace);
  sel.algorithm = "greedyfp";
  sel.note = "cross-mode allocation interleaved with removal: each step drops the single row "
             "(any mode above its floor) that minimizes the product frame potential";
  return sel;
}

Selection random_selection(const ProblemInstance& instance, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Selection sel = random_selection_impl(instance, rng);
  sel.algorithm = "random";
  sel.seed = seed;
  return sel;
}

std::uint64_t exhaustive_work(const ProblemInstance& instance) {
  const auto ranges = feasible_sizes(instance);
  double work = 0.0;
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    for (std::size_t l = ranges[r].lo; l <= ranges[r].hi; ++l) {
      work += std::exp(log_binomial(instance.factor(r).rows(), l));
    }
  }
  if (work > 1.8e19) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(std::llround(work));
}

Selection exhaustive_optimum(const ProblemInstance& instance, Objective objective, std::uint64_t guard) {
  const std::uint64_t work = exhaustive_work(instance);
  if (work > guard) {
    throw ResourceError("exhaustive search needs " + std::to_string(work) +
                        " subset evaluations (guard " + std::to_string(guard) +
                        "); use a best-of-random surrogate instead");
  }
  const auto ranges = feasible_sizes(instance);
  const std::size_t r_count = instance.modes();

  std::vector<std::vector<ModeBest>> per_mode(r_count);
  for (std::size_t r = 0; r < r_count; ++r) {
    per_mode[r].resize(ranges[r].hi + 1);
    for (std::size_t l = ranges[r].lo; l <= ranges[r].hi; ++l) {
      per_mode[r][l] = best_subset(instance.factor(r).matrix(), l, objective);
    }
  }

  double best_value = kInf;
  std::vector<IndexSet> best;
  std::vector<std::size_t> sizes(r_count);
  // Walk every size vector with Σ = budget.
  auto visit = [&](auto&& self, std::size_t r, std::size_t remaining) -> void {
    if (r == r_count) {
      if (remaining != 0) return;
      double value = 1.0;
      std::vector<IndexSet> sets;
      for (std::size_t a = 0; a < r_count; ++a) {
        const auto& mb = per_mode[a][sizes[a]];
        value *= mb.value;
        sets.push_back(mb.set);
      }
      if (value == kInf || std::isnan(value)) return;
      if (best.empty() || value < best_value || (value == best_value && lex_less(sets, best))) {
        best_value = value;
        best = std::move(sets);
      }
      return;
    }
    for (std::size_t l = ranges[r].lo; l <= std::min(ranges[r].hi, remaining); ++l) {
      sizes[r] = l;
      self(self, r + 1, remaining - l);
    }
  };
  visit(visit, 0, instance.budget());

  if (best.empty()) {
    throw NumericalError("no feasible selection has a finite objective (every subset is rank deficient)");
  }
  Selection sel;
  sel.algorithm = "exhaustive";
  sel.modes = std::move(best);
  return sel;
}

double objective_value(const ProblemInstance& instance, const Selection& sel, Objective objective) {
  if (objective == Objective::fp) return frame_potential_product(instance, sel);
  double total = 1.0;
  for (std::size_t r = 0; r < instance.modes(); ++r) {
    total *= mode_trace_inverse(instance.factor(r).matrix(), sel.modes[r]);
  }
  return total;
}

Selection best_of_random(const ProblemInstance& instance, Objective objective, std::size_t draws,
                         std::uint64_t seed) {
  if (draws == 0) throw ValidationError("best_of_random needs at least one draw");
  Selection best;
  double best_value = kInf;
  for (std::size_t i = 0; i < draws; ++i) {
    Selection cand = random_selection(instance, seed + i);
    const double value = objective_value(instance, cand, objective);
    if (best.modes.empty() || value < best_value) {
      best_value = value;
      best = std::move(cand);
    }
  }
  best.algorithm = "random-best";
  best.seed = seed;
  best.note = "best of " + std::to_string(draws) + " random selections";
  return best;
}

}  // namespace kronsampler
