#pragma once

// Reference implementations used only by the tests. Everything here is written
// from the definitions with plain loops so it shares no code path with the
// library routines it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kronsampler/linalg.hpp"

namespace oracle {

using kronsampler::Matrix;
using kronsampler::Vector;
using Rows = std::vector<std::size_t>;  // 0-based row indices

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  return random_matrix(n, 1, seed).col(0);
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

template <typename A, typename B>
double rel_diff(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

/// (a⊗b)(i, j) = a(i / p, j / q)·b(i % p, j % q).
inline Matrix kron_by_index(const Matrix& a, const Matrix& b) {
  const Eigen::Index p = b.rows();
  const Eigen::Index q = b.cols();
  Matrix out(a.rows() * p, a.cols() * q);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = a(i / p, j / q) * b(i % p, j % q);
  return out;
}

inline Matrix kron_all(const std::vector<Matrix>& factors) {
  Matrix out = factors.front();
  for (std::size_t r = 1; r < factors.size(); ++r) out = kron_by_index(out, factors[r]);
  return out;
}

inline Matrix take_rows(const Matrix& m, const Rows& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(static_cast<Eigen::Index>(i), j) = m(static_cast<Eigen::Index>(rows[i]), j);
  return out;
}

inline double dot_rows(const Matrix& m, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) s += m(static_cast<Eigen::Index>(a), j) * m(static_cast<Eigen::Index>(b), j);
  return s;
}

/// Σ_{i,j∈rows} ⟨u_i, u_j⟩².
inline double pairwise_fp(const Matrix& m, const Rows& rows) {
  double fp = 0.0;
  for (std::size_t i : rows)
    for (std::size_t j : rows) {
      const double d = dot_rows(m, i, j);
      fp += d * d;
    }
  return fp;
}

/// Σ_i,j (Σ_n∈rows p_ni p_nj)² with the Gram accumulated as outer products.
inline Matrix outer_product_gram(const Matrix& m, const Rows& rows) {
  Matrix g = Matrix::Zero(m.cols(), m.cols());
  for (std::size_t n : rows)
    for (Eigen::Index i = 0; i < m.cols(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) g(i, j) += m(static_cast<Eigen::Index>(n), i) * m(static_cast<Eigen::Index>(n), j);
  return g;
}

/// d_n = Σ_ij m_ij p_ni p_nj by the literal double sum.
inline std::vector<double> double_sum_scores(const Matrix& p) {
  const Matrix mgram = outer_product_gram(p, [&] {
    Rows all(static_cast<std::size_t>(p.rows()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }());
  std::vector<double> d(static_cast<std::size_t>(p.rows()), 0.0);
  for (Eigen::Index n = 0; n < p.rows(); ++n)
    for (Eigen::Index i = 0; i < p.cols(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) d[static_cast<std::size_t>(n)] += mgram(i, j) * p(n, i) * p(n, j);
  return d;
}

/// d_n = Σ_s ⟨u_n, u_s⟩².
inline std::vector<double> pairwise_scores(const Matrix& p) {
  std::vector<double> d(static_cast<std::size_t>(p.rows()), 0.0);
  for (Eigen::Index n = 0; n < p.rows(); ++n)
    for (Eigen::Index s = 0; s < p.rows(); ++s) {
      const double v = dot_rows(p, static_cast<std::size_t>(n), static_cast<std::size_t>(s));
      d[static_cast<std::size_t>(n)] += v * v;
    }
  return d;
}

/// Rows of the explicit Kronecker product that the per-mode selections pick.
inline Matrix kron_restriction(const std::vector<Matrix>& factors, const std::vector<Rows>& sel) {
  std::vector<Matrix> restricted;
  for (std::size_t r = 0; r < factors.size(); ++r) restricted.push_back(take_rows(factors[r], sel[r]));
  return kron_all(restricted);
}

/// tr{(ΨᵀΨ)⁻¹} with the explicit Kronecker matrix and an explicit inverse.
inline double explicit_mse(const std::vector<Matrix>& factors, const std::vector<Rows>& sel) {
  const Matrix psi = kron_restriction(factors, sel);
  const Eigen::MatrixXd t = psi.transpose() * psi;
  return t.inverse().trace();
}

/// Calls `visit` for every subset of {0..n-1} of the given size, in
/// lexicographic order.
inline void for_each_subset(std::size_t n, std::size_t size, const std::function<void(const Rows&)>& visit) {
  Rows idx;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (idx.size() == size) {
      visit(idx);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      idx.push_back(i);
      rec(i + 1);
      idx.pop_back();
    }
  };
  rec(0);
}

/// Every subset of {0..n-1} in bitmask order.
inline std::vector<Rows> all_subsets(std::size_t n) {
  std::vector<Rows> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    Rows r;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) r.push_back(i);
    out.push_back(r);
  }
  return out;
}

inline double binomial(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

/// Brute-force global minimum of a selection objective over the full cross
/// product of per-mode subsets (no separability shortcut).
struct BruteResult {
  double value = std::numeric_limits<double>::infinity();
  std::vector<Rows> sel;
};

inline BruteResult brute_force_min(const std::vector<Matrix>& factors, std::size_t budget,
                                   const std::function<double(const std::vector<Rows>&)>& objective) {
  BruteResult best;
  std::vector<Rows> cur(factors.size());
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t r, std::size_t remaining) {
    if (r == factors.size()) {
      if (remaining != 0) return;
      const double v = objective(cur);
      if (v < best.value) {
        best.value = v;
        best.sel = cur;
      }
      return;
    }
    const auto n = static_cast<std::size_t>(factors[r].rows());
    const auto k = static_cast<std::size_t>(factors[r].cols());
    for (std::size_t l = k; l <= std::min(n, remaining); ++l) {
      for_each_subset(n, l, [&](const Rows& rows) {
        cur[r] = rows;
        rec(r + 1, remaining - l);
      });
    }
  };
  rec(0, budget);
  return best;
}

}  // namespace oracle
