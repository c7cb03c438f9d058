#pragma once

// Dense linear algebra shared by every module: row-major matrices, row index
// sets, Gram and Kronecker utilities, the pseudoinverse and the matrix CSV
// format.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace kronsampler {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Default cap on the number of entries an explicit Kronecker product may have.
inline constexpr std::size_t kDefaultKronEntryCap = 100'000'000;

/// Strictly increasing set of row indices into a universe of `universe` rows.
///
/// Stored 0-based; the 1-based view is what every file format and the CLI
/// expose.
class IndexSet {
 public:
  IndexSet() = default;
  /// Throws ValidationError unless `indices` is strictly increasing and every
  /// entry is below `universe`.
  IndexSet(std::vector<std::size_t> indices, std::size_t universe);

  static IndexSet all(std::size_t universe);
  /// Accepts 1-based indices in any order; duplicates are rejected.
  static IndexSet from_one_based(std::span<const long long> indices, std::size_t universe);

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::size_t universe() const { return universe_; }
  std::size_t operator[](std::size_t i) const { return indices_[i]; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }
  const std::vector<std::size_t>& indices() const { return indices_; }

  std::vector<long long> one_based() const;
  IndexSet complement() const;
  bool contains(std::size_t index) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<std::size_t> indices_;
  std::size_t universe_ = 0;
};

/// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

/// Rows of `m` listed in `rows`, in set order.
Matrix restrict_rows(const Matrix& m, const IndexSet& rows);

/// mᵀm.
Matrix gram(const Matrix& m);

Matrix kron(const Matrix& a, const Matrix& b, std::size_t entry_cap = kDefaultKronEntryCap);
Matrix kron(std::span<const Matrix> factors, std::size_t entry_cap = kDefaultKronEntryCap);

/// (A_1 ⊗ … ⊗ A_R) x without forming the product. The vector index runs
/// row-major over the mode multi-index (last mode fastest), matching the
/// block layout of `kron`.
Vector kron_apply(std::span<const Matrix> factors, const Vector& x);

struct Pseudoinverse {
  Matrix matrix;
  std::size_t rank = 0;
};

/// Moore-Penrose pseudoinverse through a thin SVD. Singular values at or below
/// max(rows, cols)·eps·σ_max are treated as zero.
Pseudoinverse pinv(const Matrix& m);

/// Lightweight tall factor matrix with its Gram matrix and full frame
/// potential cached.
class FactorMatrix {
 public:
  FactorMatrix() = default;
  explicit FactorMatrix(Matrix m);

  const Matrix& matrix() const { return matrix_; }
  std::size_t rows() const { return static_cast<std::size_t>(matrix_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(matrix_.cols()); }
  const Matrix& gram() const { return gram_; }
  /// Σ_ij m_ij² over the Gram of all rows.
  double full_fp() const { return full_fp_; }

 private:
  Matrix matrix_;
  Matrix gram_;
  double full_fp_ = 0.0;
};

// Matrix CSV: a `rows,cols` header line then one line per row, written with 17
// significant digits.
Matrix read_matrix_csv(std::istream& in);
Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

Vector read_vector_csv(const std::filesystem::path& path);
void write_vector_csv(const std::filesystem::path& path, const Vector& v);

}  // namespace kronsampler
