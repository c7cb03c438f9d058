#include "kronsampler/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "kronsampler/errors.hpp"

namespace kronsampler {

IndexSet::IndexSet(std::vector<std::size_t> indices, std::size_t universe)
    : indices_(std::move(indices)), universe_(universe) {
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] >= universe_) {
      throw ValidationError("index " + std::to_string(indices_[i] + 1) + " outside [1, " +
                            std::to_string(universe_) + "]");
    }
    if (i > 0 && indices_[i] <= indices_[i - 1]) {
      throw ValidationError("index set must be strictly increasing");
    }
  }
}

IndexSet IndexSet::all(std::size_t universe) {
  std::vector<std::size_t> idx(universe);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return IndexSet(std::move(idx), universe);
}

IndexSet IndexSet::from_one_based(std::span<const long long> indices, std::size_t universe) {
  std::vector<std::size_t> idx;
  idx.reserve(indices.size());
  for (long long i : indices) {
    if (i < 1 || static_cast<unsigned long long>(i) > universe) {
      throw ValidationError("index " + std::to_string(i) + " outside [1, " +
                            std::to_string(universe) + "]");
    }
    idx.push_back(static_cast<std::size_t>(i - 1));
  }
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
    throw ValidationError("duplicate index in selection");
  }
  return IndexSet(std::move(idx), universe);
}

std::vector<long long> IndexSet::one_based() const {
  std::vector<long long> out;
  out.reserve(indices_.size());
  for (std::size_t i : indices_) out.push_back(static_cast<long long>(i) + 1);
  return out;
}

IndexSet IndexSet::complement() const {
  std::vector<std::size_t> rest;
  rest.reserve(universe_ - indices_.size());
  auto it = indices_.begin();
  for (std::size_t i = 0; i < universe_; ++i) {
    if (it != indices_.end() && *it == i) {
      ++it;
    } else {
      rest.push_back(i);
    }
  }
  return IndexSet(std::move(rest), universe_);
}

bool IndexSet::contains(std::size_t index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw ValidationError(std::string(what) + " contains non-finite entries");
  }
}

Matrix restrict_rows(const Matrix& m, const IndexSet& rows) {
  if (rows.universe() != static_cast<std::size_t>(m.rows())) {
    throw ValidationError("index set universe " + std::to_string(rows.universe()) +
                          " does not match matrix with " + std::to_string(m.rows()) + " rows");
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Matrix gram(const Matrix& m) {
  Matrix g = Matrix::Zero(m.cols(), m.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

Matrix kron(const Matrix& a, const Matrix& b, std::size_t entry_cap) {
  const double entries = static_cast<double>(a.rows()) * static_cast<double>(b.rows()) *
                         static_cast<double>(a.cols()) * static_cast<double>(b.cols());
  if (entries > static_cast<double>(entry_cap)) {
    throw ResourceError("Kronecker product would have " + std::to_string(entries) +
                        " entries (cap " + std::to_string(entry_cap) + ")");
  }
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix kron(std::span<const Matrix> factors, std::size_t entry_cap) {
  if (factors.empty()) throw ValidationError("kron of an empty factor list");
  Matrix out = factors.front();
  for (std::size_t r = 1; r < factors.size(); ++r) out = kron(out, factors[r], entry_cap);
  return out;
}

Vector kron_apply(std::span<const Matrix> factors, const Vector& x) {
  if (factors.empty()) throw ValidationError("kron_apply of an empty factor list");
  std::vector<Eigen::Index> dims;
  dims.reserve(factors.size());
  Eigen::Index expected = 1;
  for (const auto& f : factors) {
    dims.push_back(f.cols());
    expected *= f.cols();
  }
  if (expected != x.size()) {
    throw ValidationError("kron_apply: vector length " + std::to_string(x.size()) +
                          " does not match product of factor columns " + std::to_string(expected));
  }

  // Mode-r product on the row-major tensor: view the data as `left` stacked
  // (K_r × right) blocks and replace each block by U_r·block.
  Vector cur = x;
  for (std::size_t r = 0; r < factors.size(); ++r) {
    const Matrix& u = factors[r];
    Eigen::Index left = 1;
    for (std::size_t a = 0; a < r; ++a) left *= dims[a];
    Eigen::Index right = 1;
    for (std::size_t a = r + 1; a < dims.size(); ++a) right *= dims[a];

    using Block = Eigen::Map<const Matrix>;
    using OutBlock = Eigen::Map<Matrix>;
    Vector next(left * u.rows() * right);
    for (Eigen::Index l = 0; l < left; ++l) {
      Block in(cur.data() + l * u.cols() * right, u.cols(), right);
      OutBlock out(next.data() + l * u.rows() * right, u.rows(), right);
      out.noalias() = u * in;
    }
    dims[r] = u.rows();
    cur = std::move(next);
  }
  return cur;
}

Pseudoinverse pinv(const Matrix& m) {
  Pseudoinverse result;
  if (m.size() == 0) {
    result.matrix = Matrix::Zero(m.cols(), m.rows());
    return result;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() * (s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) {
      inv(i) = 1.0 / s(i);
      ++result.rank;
    }
  }
  result.matrix = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return result;
}

FactorMatrix::FactorMatrix(Matrix m) : matrix_(std::move(m)) {
  if (matrix_.rows() < 1 || matrix_.cols() < 1) {
    throw ValidationError("factor matrix must have at least one row and one column");
  }
  require_finite(matrix_, "factor matrix");
  gram_ = kronsampler::gram(matrix_);
  full_fp_ = gram_.squaredNorm();
}

namespace {

[[noreturn]] void csv_error(const std::string& what) {
  throw ValidationError("matrix CSV: " + what);
}

std::vector<double> parse_row(const std::string& line) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
    if (end == begin || (end && *end != '\0')) csv_error("cannot parse value '" + cell + "'");
    values.push_back(v);
  }
  return values;
}

}  // namespace

Matrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) csv_error("missing header");
  const auto header = parse_row(line);
  if (header.size() != 2 || header[0] < 1 || header[1] < 1 || header[0] != std::floor(header[0]) ||
      header[1] != std::floor(header[1])) {
    csv_error("header must be 'rows,cols' with positive integers");
  }
  const auto rows = static_cast<Eigen::Index>(header[0]);
  const auto cols = static_cast<Eigen::Index>(header[1]);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) csv_error("expected " + std::to_string(rows) + " rows");
    const auto vals = parse_row(line);
    if (static_cast<Eigen::Index>(vals.size()) != cols) {
      csv_error("row " + std::to_string(i + 1) + " has " + std::to_string(vals.size()) +
                " values, expected " + std::to_string(cols));
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = vals[static_cast<std::size_t>(j)];
  }
  require_finite(m, "matrix CSV");
  return m;
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_matrix_csv(in);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  out << m.rows() << ',' << m.cols() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_matrix_csv(out, m);
  if (!out) throw ValidationError("write failed for " + path.string());
}

Vector read_vector_csv(const std::filesystem::path& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != 1) throw ValidationError("vector CSV must have exactly one column");
  return m.col(0);
}

void write_vector_csv(const std::filesystem::path& path, const Vector& v) {
  write_matrix_csv(path, Matrix(v));
}

}  // namespace kronsampler
