#pragma once

// Approximation certificates for FFW selections: the vector γ factor, the
// G-ratio lower bound and the exponential tensor factor, each checked against
// an exhaustive or best-of-random reference optimum.

#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "kronsampler/problem.hpp"

namespace kronsampler {

enum class BoundKind { vector_g_ratio, vector_gamma, tensor_exponential };

std::string_view to_string(BoundKind kind);

struct BoundReport {
  BoundKind kind;
  /// γ for vector-gamma, M for tensor-exponential, N/(N+L) for vector-G-ratio.
  double parameter = 0.0;
  double bound_value = 0.0;
  double achieved_value = 0.0;
  double reference_value = 0.0;
  bool surrogate = false;
  bool satisfied = false;
  /// Tensor only: whether M fell inside (0, 2R) as the theorem hypotheses
  /// predict. False flags a sign-condition violation or an empty complement.
  bool parameter_in_range = true;
};

/// Relative slack allowed on the upper-bound checks.
inline constexpr double kBoundSlack = 1e-9;

/// γ = (F(N)·K·L / L_min² + N) / (N + L) where L_min is the sum of the L
/// smallest squared row norms. Throws DegenerateInputError when L_min = 0.
double gamma_vector(const FactorMatrix& factor, std::size_t budget);

/// FP(ffw_vector) ≤ γ·FP(optimum).
BoundReport check_gamma(const FactorMatrix& factor, std::size_t budget, const Selection& optimum,
                        bool surrogate = false);

/// G(S′) > N/(N+L)·G(S*) with G(S) = F(N) − F(N \ S) and S the complement of
/// a selection. achieved_value = G(S′), reference_value = G(S*) and
/// bound_value = N/(N+L)·G(S*); satisfied requires the strict inequality,
/// except that G(S′) = G(S*) = 0 (nothing left out) counts as satisfied.
BoundReport g_ratio_check(const FactorMatrix& factor, std::size_t budget, const Selection& optimum,
                          bool surrogate = false);

struct TensorExponent {
  double m = 0.0;
  double factor = 1.0;  // exp(M − M²/(2R))
  bool in_range = false;
};

/// M = 2 Σ_r Σ_ij m^r_ij Σ_{t∈S′_r} p_ti p_tj / F_r(N), S′_r the rows left out.
/// Higher-order terms of the expansion are dropped.
TensorExponent tensor_bound_exponent(const ProblemInstance& instance, const Selection& sel);
/// Same quantity for arbitrary per-mode selections (no floor or budget check),
/// so the degenerate endpoints S′ = ∅ and S′ = everything can be evaluated.
TensorExponent tensor_bound_exponent(std::span<const FactorMatrix> factors, std::span<const IndexSet> selected);

/// FP(sel) ≤ exp(M − M²/(2R))·FP(optimum), M evaluated at `sel`.
BoundReport check_tensor_bound(const ProblemInstance& instance, const Selection& sel,
                               const Selection& optimum, bool surrogate = false);

nlohmann::json bound_report_to_json(const BoundReport& report);
/// kind,M_or_gamma,bound,achieved,reference,surrogate,satisfied
std::string bound_report_csv_header();
std::string bound_report_to_csv(const BoundReport& report);

}  // namespace kronsampler
