#pragma once

// Domain types shared by the samplers, the certificates and the CLI: a
// sampling problem (factor matrices plus sensor budget) and a per-mode
// selection of rows.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kronsampler/linalg.hpp"

namespace kronsampler {

/// Factor matrices Ψ_1..Ψ_R with a total budget L = Σ|L_r|.
///
/// Each mode needs N_r ≥ K_r ≥ 1 and the budget must satisfy
/// Σ K_r ≤ L ≤ Σ N_r.
class ProblemInstance {
 public:
  ProblemInstance(std::vector<FactorMatrix> factors, std::size_t budget);

  std::size_t modes() const { return factors_.size(); }
  const FactorMatrix& factor(std::size_t r) const { return factors_[r]; }
  const std::vector<FactorMatrix>& factors() const { return factors_; }
  std::size_t budget() const { return budget_; }

  std::size_t total_rows() const;
  std::size_t total_floor() const;
  /// "NxK" per mode joined by semicolons, e.g. "50x10;60x20".
  std::string shape_string() const;

  ProblemInstance with_budget(std::size_t budget) const { return {factors_, budget}; }

 private:
  std::vector<FactorMatrix> factors_;
  std::size_t budget_;
};

struct Selection {
  std::vector<IndexSet> modes;
  std::string algorithm;
  std::optional<std::uint64_t> seed;
  /// Free-form provenance shown with the selection, e.g. a description of a
  /// reimplementation choice.
  std::string note;

  std::size_t size() const;
  std::vector<std::size_t> mode_sizes() const;
};

/// Throws ValidationError unless `sel` has one index set per mode with the
/// right universes, meets every floor |L_r| ≥ K_r and uses the whole budget.
void validate_selection(const ProblemInstance& instance, const Selection& sel);

/// {"algorithm", "seed", "budget", "modes": [{"n", "indices" (1-based)}]}
nlohmann::json selection_to_json(const Selection& sel);
Selection selection_from_json(const nlohmann::json& j);

}  // namespace kronsampler
