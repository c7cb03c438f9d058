#include "kronsampler/recon.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "kronsampler/errors.hpp"

namespace kronsampler {

std::size_t SignalModel::signal_size() const {
  std::size_t n = 1;
  for (const auto& b : bases) n *= static_cast<std::size_t>(b.rows());
  return n;
}

Vector synthesize(std::span<const Matrix> bases, const Vector& core) { return kron_apply(bases, core); }

Vector synthesize(const SignalModel& model) { return synthesize(model.bases, model.core); }

std::vector<Matrix> restrict_bases(std::span<const Matrix> bases, std::span<const IndexSet> sel) {
  if (bases.size() != sel.size()) {
    throw ValidationError("selection has " + std::to_string(sel.size()) + " modes, model has " +
                          std::to_string(bases.size()));
  }
  std::vector<Matrix> out;
  out.reserve(bases.size());
  for (std::size_t r = 0; r < bases.size(); ++r) out.push_back(restrict_rows(bases[r], sel[r]));
  return out;
}

Vector restrict_signal(const Vector& f, std::span<const std::size_t> mode_sizes,
                       std::span<const IndexSet> sel) {
  if (mode_sizes.size() != sel.size()) throw ValidationError("mode count mismatch in restrict_signal");
  std::size_t total = 1;
  std::size_t grid = 1;
  for (std::size_t r = 0; r < sel.size(); ++r) {
    if (sel[r].universe() != mode_sizes[r]) throw ValidationError("selection universe mismatch");
    total *= mode_sizes[r];
    grid *= sel[r].size();
  }
  if (static_cast<std::size_t>(f.size()) != total) throw ValidationError("signal length mismatch");

  Vector v(static_cast<Eigen::Index>(grid));
  std::vector<std::size_t> pos(sel.size(), 0);
  for (std::size_t out = 0; out < grid; ++out) {
    std::size_t flat = 0;
    for (std::size_t r = 0; r < sel.size(); ++r) flat = flat * mode_sizes[r] + sel[r][pos[r]];
    v(static_cast<Eigen::Index>(out)) = f(static_cast<Eigen::Index>(flat));
    for (std::size_t r = sel.size(); r-- > 0;) {
      if (++pos[r] < sel[r].size()) break;
      pos[r] = 0;
    }
  }
  return v;
}

Measurement sample(const SignalModel& model, std::span<const IndexSet> sel, double noise_sigma,
                   std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be non-negative");
  Measurement m;
  m.values = kron_apply(restrict_bases(model.bases, sel), model.core);
  m.noise_sigma = noise_sigma;
  m.seed = seed;
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values(i) += noise(rng);
  }
  return m;
}

Reconstruction reconstruct(std::span<const Matrix> restricted, const Vector& values,
                           std::span<const Matrix> bases_full) {
  if (restricted.size() != bases_full.size()) {
    throw ValidationError("restricted and full basis lists differ in length");
  }
  std::vector<Matrix> inverses;
  inverses.reserve(restricted.size());
  for (std::size_t r = 0; r < restricted.size(); ++r) {
    if (restricted[r].cols() != bases_full[r].cols()) {
      throw ValidationError("mode " + std::to_string(r + 1) + " restricted basis has the wrong width");
    }
    auto p = pinv(restricted[r]);
    if (p.rank < static_cast<std::size_t>(restricted[r].cols())) {
      throw SingularityError("mode " + std::to_string(r + 1) + " restricted basis has rank " +
                                 std::to_string(p.rank) + " < " + std::to_string(restricted[r].cols()),
                             r, p.rank);
    }
    inverses.push_back(std::move(p.matrix));
  }
  Reconstruction out;
  out.core = kron_apply(inverses, values);
  out.signal = kron_apply(bases_full, out.core);
  return out;
}

ErrorMetrics error_metrics(const Vector& f, const Vector& f_hat) {
  if (f.size() != f_hat.size()) throw ValidationError("error_metrics: length mismatch");
  if (f.size() == 0) throw ValidationError("error_metrics: empty signal");
  ErrorMetrics m;
  const double sq = (f - f_hat).squaredNorm();
  m.mse = sq / static_cast<double>(f.size());
  const double ref = f.norm();
  if (ref > 0.0) m.relative_error = std::sqrt(sq) / ref;
  const double range = f.maxCoeff() - f.minCoeff();
  m.psnr = m.mse == 0.0 ? std::numeric_limits<double>::infinity()
                        : 10.0 * std::log10(range * range / m.mse);
  return m;
}

}  // namespace kronsampler
