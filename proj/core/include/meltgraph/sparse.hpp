#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace meltgraph {

/// Compressed sparse row matrix. Column indices are sorted within each row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // rows + 1 entries
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  struct Triplet {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };

  /// Duplicate (row, col) entries are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

  std::size_t nnz() const { return values.size(); }

  /// Entry lookup by binary search; zero when absent.
  double at(std::size_t r, std::size_t c) const;

  /// y = M x for a vector x.
  std::vector<double> multiply(std::span<const double> x) const;

  /// Y = M X for a row-major X with `width` columns.
  void multiply_dense(std::span<const double> x, std::size_t width, std::span<double> out) const;

  /// Y += Mᵀ X for a row-major X with `width` columns.
  void transpose_multiply_add(std::span<const double> x, std::size_t width, std::span<double> out) const;

  std::vector<double> to_dense() const;
};

}  // namespace meltgraph
