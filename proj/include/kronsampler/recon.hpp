#pragma once

// Forward model, Kronecker-grid sampling with Gaussian noise and
// least-squares recovery of the core.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kronsampler/linalg.hpp"
#include "kronsampler/problem.hpp"

namespace kronsampler {

/// f = (U_1 ⊗ … ⊗ U_R) g.
struct SignalModel {
  std::vector<Matrix> bases;
  Vector core;

  std::size_t signal_size() const;
};

struct Measurement {
  Vector values;  // length Π|L_r|, row-major over the selected grid
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

Vector synthesize(const SignalModel& model);
Vector synthesize(std::span<const Matrix> bases, const Vector& core);

/// Restricts every basis to its selected rows.
std::vector<Matrix> restrict_bases(std::span<const Matrix> bases, std::span<const IndexSet> sel);

/// Entries of a full signal on the selected Kronecker grid.
Vector restrict_signal(const Vector& f, std::span<const std::size_t> mode_sizes,
                       std::span<const IndexSet> sel);

/// v = Φ(L) f + noise, with i.i.d. N(0, noise_sigma²) noise drawn from `seed`.
Measurement sample(const SignalModel& model, std::span<const IndexSet> sel, double noise_sigma,
                   std::uint64_t seed);

struct Reconstruction {
  Vector core;
  Vector signal;
};

/// ĝ = (Ψ_1† ⊗ … ⊗ Ψ_R†) v applied mode by mode, then f̂ from the full bases.
/// Throws SingularityError for a rank-deficient restricted basis.
Reconstruction reconstruct(std::span<const Matrix> restricted, const Vector& values,
                           std::span<const Matrix> bases_full);

struct ErrorMetrics {
  double mse = 0.0;
  /// ‖f − f̂‖/‖f‖; empty when ‖f‖ = 0.
  std::optional<double> relative_error;
  /// 10·log10(range²/mse) with range = max(f) − min(f); +infinity when
  /// mse = 0.
  double psnr = 0.0;
};

ErrorMetrics error_metrics(const Vector& f, const Vector& f_hat);

}  // namespace kronsampler
