#include "kronsampler/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <iomanip>
#include <vector>

#include "kronsampler/errors.hpp"
#include "kronsampler/frame_potential.hpp"
#include "kronsampler/samplers.hpp"

namespace kronsampler {

namespace {

bool within_upper(double achieved, double bound) {
  return achieved <= bound + kBoundSlack * std::abs(bound);
}

void require_single_mode(const Selection& sel) {
  if (sel.modes.size() != 1) throw ValidationError("vector bound needs a single-mode selection");
}

}  // namespace

std::string_view to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::vector_g_ratio: return "vector-G-ratio";
    case BoundKind::vector_gamma: return "vector-gamma";
    case BoundKind::tensor_exponential: return "tensor-exponential";
  }
  return "unknown";
}

double gamma_vector(const FactorMatrix& factor, std::size_t budget) {
  if (budget < factor.cols() || budget > factor.rows()) {
    throw ValidationError("budget " + std::to_string(budget) + " outside [" +
                          std::to_string(factor.cols()) + ", " + std::to_string(factor.rows()) + "]");
  }
  Vector norms = factor.matrix().rowwise().squaredNorm();
  std::vector<double> sorted(norms.data(), norms.data() + norms.size());
  std::sort(sorted.begin(), sorted.end());
  double l_min = 0.0;
  for (std::size_t i = 0; i < budget; ++i) l_min += sorted[i];
  if (!(l_min > 0.0)) {
    throw DegenerateInputError("the " + std::to_string(budget) +
                               " smallest rows all have zero norm; γ is undefined");
  }
  const double n = static_cast<double>(factor.rows());
  const double k = static_cast<double>(factor.cols());
  const double l = static_cast<double>(budget);
  return (factor.full_fp() * k * l / (l_min * l_min) + n) / (n + l);
}

BoundReport check_gamma(const FactorMatrix& factor, std::size_t budget, const Selection& optimum,
                        bool surrogate) {
  require_single_mode(optimum);
  const double gamma = gamma_vector(factor, budget);
  const Selection ffw = ffw_vector(factor, budget);
  BoundReport r{BoundKind::vector_gamma};
  r.parameter = gamma;
  r.achieved_value = frame_potential(factor, ffw.modes[0]);
  r.reference_value = frame_potential(factor, optimum.modes[0]);
  r.bound_value = gamma * r.reference_value;
  r.surrogate = surrogate;
  r.satisfied = within_upper(r.achieved_value, r.bound_value);
  return r;
}

BoundReport g_ratio_check(const FactorMatrix& factor, std::size_t budget, const Selection& optimum,
                          bool surrogate) {
  require_single_mode(optimum);
  const Selection ffw = ffw_vector(factor, budget);
  const double full = factor.full_fp();
  const double n = static_cast<double>(factor.rows());
  const double ratio = n / (n + static_cast<double>(budget));
  BoundReport r{BoundKind::vector_g_ratio};
  r.parameter = ratio;
  r.achieved_value = full - frame_potential(factor, ffw.modes[0]);
  r.reference_value = full - frame_potential(factor, optimum.modes[0]);
  r.bound_value = ratio * r.reference_value;
  r.surrogate = surrogate;
  r.satisfied = r.achieved_value > r.bound_value ||
                (r.achieved_value == 0.0 && r.reference_value == 0.0);
  return r;
}

TensorExponent tensor_bound_exponent(std::span<const FactorMatrix> factors, std::span<const IndexSet> selected) {
  if (factors.empty() || factors.size() != selected.size()) {
    throw ValidationError("tensor exponent needs one index set per mode");
  }
  TensorExponent out;
  double m = 0.0;
  for (std::size_t r = 0; r < factors.size(); ++r) {
    const auto& f = factors[r];
    if (!(f.full_fp() > 0.0)) throw DegenerateInputError("mode " + std::to_string(r + 1) + " is a zero matrix");
    // Σ_{t∈S′} p_ti p_tj is the Gram of the left-out rows, so the inner double
    // sum is the Frobenius product ⟨M_r, T_r(S′)⟩.
    const Matrix left_out = gram(restrict_rows(f.matrix(), selected[r].complement()));
    m += f.gram().cwiseProduct(left_out).sum() / f.full_fp();
  }
  m *= 2.0;
  const double modes = static_cast<double>(factors.size());
  out.m = m;
  out.factor = std::exp(m - m * m / (2.0 * modes));
  out.in_range = m > 0.0 && m < 2.0 * modes;
  return out;
}

TensorExponent tensor_bound_exponent(const ProblemInstance& instance, const Selection& sel) {
  validate_selection(instance, sel);
  return tensor_bound_exponent(instance.factors(), sel.modes);
}

BoundReport check_tensor_bound(const ProblemInstance& instance, const Selection& sel,
                               const Selection& optimum, bool surrogate) {
  validate_selection(instance, optimum);
  const TensorExponent e = tensor_bound_exponent(instance, sel);
  BoundReport r{BoundKind::tensor_exponential};
  r.parameter = e.m;
  r.parameter_in_range = e.in_range;
  r.achieved_value = frame_potential_product(instance, sel);
  r.reference_value = frame_potential_product(instance, optimum);
  r.bound_value = e.factor * r.reference_value;
  r.surrogate = surrogate;
  r.satisfied = within_upper(r.achieved_value, r.bound_value);
  return r;
}

nlohmann::json bound_report_to_json(const BoundReport& report) {
  nlohmann::json j{
      {"kind", std::string(to_string(report.kind))},
      {report.kind == BoundKind::tensor_exponential ? "M"
       : report.kind == BoundKind::vector_gamma     ? "gamma"
                                                    : "ratio",
       report.parameter},
      {"bound", report.bound_value},
      {"achieved", report.achieved_value},
      {"reference", report.reference_value},
      {"surrogate", report.surrogate},
      {"satisfied", report.satisfied},
  };
  if (report.kind == BoundKind::tensor_exponential) {
    j["M_in_range"] = report.parameter_in_range;
    j["diagnostic"] = true;
  }
  return j;
}

std::string bound_report_csv_header() {
  return "kind,M_or_gamma,bound,achieved,reference,surrogate,satisfied";
}

std::string bound_report_to_csv(const BoundReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << to_string(report.kind) << ',' << report.parameter << ','
     << report.bound_value << ',' << report.achieved_value << ',' << report.reference_value << ','
     << (report.surrogate ? "true" : "false") << ',' << (report.satisfied ? "true" : "false");
  return os.str();
}

}  // namespace kronsampler
