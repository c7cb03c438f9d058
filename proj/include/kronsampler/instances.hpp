#pragma once

// Random factor ensembles for the experiments and the conversion of a
// grayscale image into a two-mode sampling instance.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "kronsampler/linalg.hpp"

namespace kronsampler {

enum class EnsembleKind { gaussian, sign_condition };

struct ModeShape {
  std::size_t rows;
  std::size_t cols;
};

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::gaussian;
  std::vector<ModeShape> shapes;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
};

/// Throws ValidationError unless every mode is tall (N_r > K_r ≥ 1) and
/// trials ≥ 1.
void validate_spec(const EnsembleSpec& spec);

/// i.i.d. N(0,1) factors for one trial. Trials are independent streams.
std::vector<Matrix> gen_gaussian(const EnsembleSpec& spec, std::size_t trial);

/// |N(0,1)| entries with one random sign per row, redrawn until the Gram has a
/// non-zero off-diagonal entry.
std::vector<Matrix> gen_sign_condition(const EnsembleSpec& spec, std::size_t trial);

/// Dispatches on spec.kind.
std::vector<Matrix> generate(const EnsembleSpec& spec, std::size_t trial);

nlohmann::json ensemble_spec_to_json(const EnsembleSpec& spec);
EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j);

struct ImageInstance {
  Matrix pixels;
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  Matrix u1;    // H×k1
  Matrix u2;    // W×k2
  Matrix core;  // k1×k2, ones on the leading diagonal
  std::size_t numerical_rank = 0;
  /// True when k1 or k2 was lowered to the numerical rank of the image.
  bool ranks_reduced = false;

  /// U₁ G U₂ᵀ.
  Matrix approximation() const;
};

/// Truncated SVD pixels ≈ AΣBᵀ split as U₁ = A_k1·Σ^{1/2}, U₂ = B_k2·Σ^{1/2}.
ImageInstance image_to_instance(const Matrix& pixels, std::size_t k1, std::size_t k2);

/// Reads P2 or P5 files with maxval ≤ 255.
Matrix read_pgm(const std::filesystem::path& path);
/// Writes a binary P5 file, clamping to [0, 255] and rounding.
void write_pgm(const std::filesystem::path& path, const Matrix& pixels);

/// Deterministic smooth grayscale scene (blobs, shaded discs, a soft gradient
/// and mild texture) in [0, 255], used as a stand-in natural image.
Matrix synthetic_test_image(std::size_t height, std::size_t width, std::uint64_t seed);

}  // namespace kronsampler
