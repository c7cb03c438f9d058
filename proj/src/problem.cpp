#include "kronsampler/problem.hpp"

#include <numeric>

#include "kronsampler/errors.hpp"

namespace kronsampler {

ProblemInstance::ProblemInstance(std::vector<FactorMatrix> factors, std::size_t budget)
    : factors_(std::move(factors)), budget_(budget) {
  if (factors_.empty()) throw ValidationError("problem instance needs at least one factor");
  for (std::size_t r = 0; r < factors_.size(); ++r) {
    const auto& f = factors_[r];
    if (f.rows() < f.cols()) {
      throw ValidationError("mode " + std::to_string(r + 1) + " has " + std::to_string(f.rows()) +
                            " rows, fewer than its " + std::to_string(f.cols()) + " columns");
    }
  }
  if (budget_ < total_floor() || budget_ > total_rows()) {
    throw ValidationError("budget " + std::to_string(budget_) + " outside feasible range [" +
                          std::to_string(total_floor()) + ", " + std::to_string(total_rows()) + "]");
  }
}

std::size_t ProblemInstance::total_rows() const {
  std::size_t n = 0;
  for (const auto& f : factors_) n += f.rows();
  return n;
}

std::size_t ProblemInstance::total_floor() const {
  std::size_t k = 0;
  for (const auto& f : factors_) k += f.cols();
  return k;
}

std::string ProblemInstance::shape_string() const {
  std::string s;
  for (std::size_t r = 0; r < factors_.size(); ++r) {
    if (r) s += ';';
    s += std::to_string(factors_[r].rows()) + "x" + std::to_string(factors_[r].cols());
  }
  return s;
}

std::size_t Selection::size() const {
  std::size_t n = 0;
  for (const auto& m : modes) n += m.size();
  return n;
}

std::vector<std::size_t> Selection::mode_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& m : modes) out.push_back(m.size());
  return out;
}

void validate_selection(const ProblemInstance& instance, const Selection& sel) {
  if (sel.modes.size() != instance.modes()) {
    throw ValidationError("selection has " + std::to_string(sel.modes.size()) +
                          " modes, instance has " + std::to_string(instance.modes()));
  }
  for (std::size_t r = 0; r < instance.modes(); ++r) {
    const auto& f = instance.factor(r);
    if (sel.modes[r].universe() != f.rows()) {
      throw ValidationError("mode " + std::to_string(r + 1) + " selection indexes " +
                            std::to_string(sel.modes[r].universe()) + " rows, factor has " +
                            std::to_string(f.rows()));
    }
    if (sel.modes[r].size() < f.cols()) {
      throw ValidationError("mode " + std::to_string(r + 1) + " selects " +
                            std::to_string(sel.modes[r].size()) + " rows, below its floor " +
                            std::to_string(f.cols()));
    }
  }
  if (sel.size() != instance.budget()) {
    throw ValidationError("selection uses " + std::to_string(sel.size()) + " sensors, budget is " +
                          std::to_string(instance.budget()));
  }
}

nlohmann::json selection_to_json(const Selection& sel) {
  nlohmann::json j;
  j["algorithm"] = sel.algorithm;
  j["seed"] = sel.seed ? nlohmann::json(*sel.seed) : nlohmann::json(nullptr);
  j["budget"] = sel.size();
  auto modes = nlohmann::json::array();
  for (const auto& m : sel.modes) {
    modes.push_back({{"n", m.universe()}, {"indices", m.one_based()}});
  }
  j["modes"] = std::move(modes);
  if (!sel.note.empty()) j["note"] = sel.note;
  return j;
}

Selection selection_from_json(const nlohmann::json& j) {
  try {
    Selection sel;
    sel.algorithm = j.at("algorithm").get<std::string>();
    if (j.contains("seed") && !j.at("seed").is_null()) sel.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("note")) sel.note = j.at("note").get<std::string>();
    for (const auto& m : j.at("modes")) {
      const auto n = m.at("n").get<std::size_t>();
      const auto idx = m.at("indices").get<std::vector<long long>>();
      sel.modes.push_back(IndexSet::from_one_based(idx, n));
    }
    const auto budget = j.at("budget").get<std::size_t>();
    if (budget != sel.size()) {
      throw ValidationError("selection JSON budget " + std::to_string(budget) +
                            " disagrees with its " + std::to_string(sel.size()) + " indices");
    }
    return sel;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("selection JSON: ") + e.what());
  }
}

}  // namespace kronsampler
