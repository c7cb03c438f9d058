#pragma once

// Frame potential, least-squares MSE and the closed-form relaxation of the
// product frame potential used to score rows.

#include <span>
#include <vector>

#include "kronsampler/linalg.hpp"
#include "kronsampler/problem.hpp"

namespace kronsampler {

/// Per-row scores, one entry per row of a factor.
using ScoreVector = Vector;

/// One vector per mode with entries in [0, 1].
using FractionalPoint = std::vector<Vector>;

/// ‖Ψ(sel)ᵀΨ(sel)‖²_F.
double frame_potential(const Matrix& factor, const IndexSet& sel);
double frame_potential(const FactorMatrix& factor, const IndexSet& sel);

/// Π_r FP(Ψ_r(L_r)).
double frame_potential_product(std::span<const FactorMatrix> factors, std::span<const IndexSet> sel);
double frame_potential_product(const ProblemInstance& instance, const Selection& sel);

/// tr{(Ψ(sel)ᵀΨ(sel))⁻¹} for one mode, or +infinity when the restriction is
/// rank deficient. `rank` receives the numerical rank if non-null.
double mode_trace_inverse(const Matrix& factor, const IndexSet& sel, std::size_t* rank = nullptr);

/// tr{T⁻¹(L)} for the Kronecker-structured Fisher information
/// T(L) = ⊗_r Ψ_r(L_r)ᵀΨ_r(L_r). Throws SingularityError naming the first
/// mode whose restriction is rank deficient.
double mse(std::span<const FactorMatrix> factors, std::span<const IndexSet> sel);
double mse(const ProblemInstance& instance, const Selection& sel);

/// Σ_ij [Σ_n x_n p_ni p_nj]² for a single mode.
double mode_extension_value(const FactorMatrix& factor, const Vector& x);

/// Product over modes of `mode_extension_value`. Equals the product frame
/// potential at every 0/1 point.
double extension_value(std::span<const FactorMatrix> factors, const FractionalPoint& x);

/// Exact gradient of `extension_value` at `x`, laid out like `x`.
FractionalPoint extension_gradient(std::span<const FactorMatrix> factors, const FractionalPoint& x);

/// d_n = u_n M u_nᵀ with M the Gram of all rows. O(NK²).
ScoreVector ffw_scores(const FactorMatrix& factor);

/// ffw_scores divided by the full frame potential. Throws
/// DegenerateInputError for a zero factor.
ScoreVector ffw_scores_normalized(const FactorMatrix& factor);

/// True if every row has all of its non-zero entries of one sign.
bool rows_share_sign(const Matrix& m);

/// Sign condition of the approximation theorems: every row single-signed and
/// the Gram matrix has a non-zero off-diagonal entry (trivially true for K=1).
bool satisfies_sign_condition(const FactorMatrix& factor);

}  // namespace kronsampler
