#include "kronsampler/frame_potential.hpp"

#include <limits>
#include <string>

#include "kronsampler/errors.hpp"

namespace kronsampler {

namespace {

void require_same_mode_count(std::size_t factors, std::size_t other, const char* what) {
  if (factors != other) {
    throw ValidationError(std::string(what) + " has " + std::to_string(other) +
                          " modes, expected " + std::to_string(factors));
  }
}

Matrix weighted_gram(const Matrix& p, const Vector& x) {
  // Pᵀ diag(x) P
  return p.transpose() * x.asDiagonal() * p;
}

}  // namespace

double frame_potential(const Matrix& factor, const IndexSet& sel) {
  return gram(restrict_rows(factor, sel)).squaredNorm();
}

double frame_potential(const FactorMatrix& factor, const IndexSet& sel) {
  return frame_potential(factor.matrix(), sel);
}

double frame_potential_product(std::span<const FactorMatrix> factors, std::span<const IndexSet> sel) {
  require_same_mode_count(factors.size(), sel.size(), "selection");
  double fp = 1.0;
  for (std::size_t r = 0; r < factors.size(); ++r) fp *= frame_potential(factors[r], sel[r]);
  return fp;
}

double frame_potential_product(const ProblemInstance& instance, const Selection& sel) {
  return frame_potential_product(instance.factors(), sel.modes);
}

double mode_trace_inverse(const Matrix& factor, const IndexSet& sel, std::size_t* rank_out) {
  const Matrix restricted = restrict_rows(factor, sel);
  std::size_t rank = 0;
  double trace_inv = 0.0;
  if (restricted.rows() > 0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(restricted)};
    const Vector& s = svd.singularValues();
    const double tol = static_cast<double>(std::max(restricted.rows(), restricted.cols())) *
                       std::numeric_limits<double>::epsilon() * s(0);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) > tol) {
        ++rank;
        trace_inv += 1.0 / (s(i) * s(i));
      }
    }
  }
  if (rank_out) *rank_out = rank;
  if (rank < static_cast<std::size_t>(factor.cols())) return std::numeric_limits<double>::infinity();
  return trace_inv;
}

double mse(std::span<const FactorMatrix> factors, std::span<const IndexSet> sel) {
  require_same_mode_count(factors.size(), sel.size(), "selection");
  // The eigenvalues of ⊗T_r are all products of per-mode eigenvalues, so the
  // reciprocal sum factors into a product of per-mode traces tr{T_r⁻¹}.
  double total = 1.0;
  for (std::size_t r = 0; r < factors.size(); ++r) {
    std::size_t rank = 0;
    const double t = mode_trace_inverse(factors[r].matrix(), sel[r], &rank);
    if (rank < factors[r].cols()) {
      throw SingularityError("mode " + std::to_string(r + 1) + " restriction has rank " +
                                 std::to_string(rank) + " < " + std::to_string(factors[r].cols()),
                             r, rank);
    }
    total *= t;
  }
  return total;
}

double mse(const ProblemInstance& instance, const Selection& sel) {
  return mse(instance.factors(), sel.modes);
}

double mode_extension_value(const FactorMatrix& factor, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != factor.rows()) {
    throw ValidationError("fractional point has length " + std::to_string(x.size()) +
                          ", factor has " + std::to_string(factor.rows()) + " rows");
  }
  return weighted_gram(factor.matrix(), x).squaredNorm();
}

double extension_value(std::span<const FactorMatrix> factors, const FractionalPoint& x) {
  require_same_mode_count(factors.size(), x.size(), "fractional point");
  double value = 1.0;
  for (std::size_t r = 0; r < factors.size(); ++r) value *= mode_extension_value(factors[r], x[r]);
  return value;
}

FractionalPoint extension_gradient(std::span<const FactorMatrix> factors, const FractionalPoint& x) {
  require_same_mode_count(factors.size(), x.size(), "fractional point");
  std::vector<double> mode_values;
  for (std::size_t r = 0; r < factors.size(); ++r) {
    mode_values.push_back(mode_extension_value(factors[r], x[r]));
  }
  FractionalPoint grad;
  for (std::size_t r = 0; r < factors.size(); ++r) {
    double others = 1.0;
    for (std::size_t a = 0; a < factors.size(); ++a) {
      if (a != r) others *= mode_values[a];
    }
    const Matrix& p = factors[r].matrix();
    const Matrix t = weighted_gram(p, x[r]);
    // ∂/∂x_n Σ_ij T_ij² = 2 Σ_ij T_ij p_ni p_nj = 2 u_n T u_nᵀ
    const Vector quad = ((p * t).array() * p.array()).rowwise().sum();
    grad.push_back(2.0 * others * quad);
  }
  return grad;
}

ScoreVector ffw_scores(const FactorMatrix& factor) {
  const Matrix& p = factor.matrix();
  return ((p * factor.gram()).array() * p.array()).rowwise().sum();
}

ScoreVector ffw_scores_normalized(const FactorMatrix& factor) {
  if (!(factor.full_fp() > 0.0)) {
    throw DegenerateInputError("normalized scores need a non-zero factor matrix");
  }
  return ffw_scores(factor) / factor.full_fp();
}

bool rows_share_sign(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    bool pos = false;
    bool neg = false;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      pos = pos || m(i, j) > 0.0;
      neg = neg || m(i, j) < 0.0;
    }
    if (pos && neg) return false;
  }
  return true;
}

bool satisfies_sign_condition(const FactorMatrix& factor) {
  if (!rows_share_sign(factor.matrix())) return false;
  const Matrix& g = factor.gram();
  if (g.rows() == 1) return true;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (i != j && g(i, j) != 0.0) return true;
    }
  }
  return false;
}

}  // namespace kronsampler
