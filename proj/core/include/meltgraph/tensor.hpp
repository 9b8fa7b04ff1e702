#pragma once

// Dense 64-bit tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same values and gradient
// buffers. Every op takes the Tape it records onto; a Tape constructed with
// recording=false evaluates forward only. Backward closures run in exact
// reverse execution order and accumulate into gradient buffers, so a tensor
// used by several ops receives the sum of its branch gradients.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "meltgraph/matrix.hpp"
#include "meltgraph/sparse.hpp"

namespace meltgraph {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(storage_); }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t size() const { return storage_->values.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return storage_->values; }
  std::span<double> mutable_values() { return storage_->values; }
  double operator[](std::size_t i) const { return storage_->values[i]; }
  double at(std::size_t r, std::size_t c) const { return storage_->values[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return storage_ && storage_->requires_grad; }
  void set_requires_grad(bool value) { storage_->requires_grad = value; }

  bool has_grad() const { return !storage_->grad.empty(); }
  /// Gradient buffer; empty until something flows into it.
  std::span<const double> grad() const { return storage_->grad; }
  /// Gradient buffer, zero-allocated on first use.
  std::span<double> mutable_grad() const;
  void zero_grad() { storage_->grad.clear(); }

  Matrix to_matrix() const;
  /// Deep copy without gradient.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return entries_.size(); }

  /// True when an op over these inputs must record a backward closure.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  void record(std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  /// The tape is cleared afterwards.
  void backward(Tensor& loss);

  void clear() { entries_.clear(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> entries_;
};

// Linear algebra and elementwise ops. `b` broadcasts when its shape equals a
// trailing suffix of `a`'s shape.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
/// a * s for a one-element tensor s.
Tensor mul_scalar(Tape& tape, const Tensor& a, const Tensor& s);
Tensor relu(Tape& tape, const Tensor& a);
Tensor leaky_relu(Tape& tape, const Tensor& a, double slope);

/// Column-wise concatenation of 2-D tensors with equal row counts.
Tensor concat(Tape& tape, std::span<const Tensor> parts);
/// Columns [begin, end) of a 2-D tensor.
Tensor slice_cols(Tape& tape, const Tensor& a, std::size_t begin, std::size_t end);

/// Rows of a 2-D tensor selected by index (repeats allowed).
Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::uint32_t> index);

/// Sums rows of `values` (E x d, or E) into n_segments rows by segment id.
Tensor segment_sum(Tape& tape, const Tensor& values, std::span<const std::uint32_t> segment_of,
                   std::size_t n_segments);

/// Softmax of logits within each segment, independently per column for an
/// E x m input. Max-subtracted per segment.
Tensor segment_softmax(Tape& tape, const Tensor& logits, std::span<const std::uint32_t> segment_of,
                       std::size_t n_segments);

/// N x (b*w) -> N x b: sums each contiguous block of w columns.
Tensor sum_blocks(Tape& tape, const Tensor& a, std::size_t n_blocks);
/// N x b -> N x (b*w): repeats each column w times.
Tensor repeat_blocks(Tape& tape, const Tensor& a, std::size_t width);

/// S X for a constant sparse S.
Tensor spmm(Tape& tape, const CsrMatrix& s, const Tensor& x);

Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences with step h. Relative error uses
/// max(|analytic|, |numeric|, 1e-3) as denominator.
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs, double step = 1e-5);

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x, double step = 1e-5);

}  // namespace meltgraph
