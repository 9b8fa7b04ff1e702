#include "meltgraph/sparse.hpp"

#include <algorithm>

#include "meltgraph/error.hpp"

namespace meltgraph {

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw DimensionError("CsrMatrix: triplet index out of range");
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  for (const auto& t : triplets) {
    m.col_idx.push_back(t.col);
    m.values.push_back(t.value);
    ++m.row_ptr[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];

  // Merge duplicates in place.
  CsrMatrix merged;
  merged.rows = rows;
  merged.cols = cols;
  merged.row_ptr.assign(rows + 1, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      if (merged.col_idx.size() > merged.row_ptr[r] && merged.col_idx.back() == m.col_idx[k]) {
        merged.values.back() += m.values[k];
      } else {
        merged.col_idx.push_back(m.col_idx[k]);
        merged.values.push_back(m.values[k]);
      }
    }
    merged.row_ptr[r + 1] = merged.col_idx.size();
  }
  return merged;
}

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  if (x.size() != cols) throw DimensionError("CsrMatrix::multiply: vector length mismatch");
  std::vector<double> y(rows, 0.0);
  multiply_dense(x, 1, y);
  return y;
}

void CsrMatrix::multiply_dense(std::span<const double> x, std::size_t width, std::span<double> out) const {
  if (x.size() != cols * width || out.size() != rows * width) {
    throw DimensionError("CsrMatrix::multiply_dense: dimension mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = out.data() + r * width;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const double a = values[k];
      const double* xr = x.data() + static_cast<std::size_t>(col_idx[k]) * width;
      for (std::size_t c = 0; c < width; ++c) y[c] += a * xr[c];
    }
  }
}

void CsrMatrix::transpose_multiply_add(std::span<const double> x, std::size_t width, std::span<double> out) const {
  if (x.size() != rows * width || out.size() != cols * width) {
    throw DimensionError("CsrMatrix::transpose_multiply_add: dimension mismatch");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * width;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const double a = values[k];
      double* y = out.data() + static_cast<std::size_t>(col_idx[k]) * width;
      for (std::size_t c = 0; c < width; ++c) y[c] += a * xr[c];
    }
  }
}

std::vector<double> CsrMatrix::to_dense() const {
  std::vector<double> dense(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) dense[r * cols + col_idx[k]] += values[k];
  }
  return dense;
}

}  // namespace meltgraph
