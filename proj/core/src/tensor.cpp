#include "meltgraph/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "meltgraph/error.hpp"

namespace meltgraph {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutableMap = Eigen::Map<RowMatrix>;

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void dimension_error(const char* op, const Shape& a, const Shape& b) {
  std::ostringstream msg;
  msg << op << ": incompatible shapes " << shape_string(a) << " and " << shape_string(b);
  throw DimensionError(msg.str());
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    std::ostringstream msg;
    msg << op << ": expected a 2-D tensor, got " << shape_string(t.shape());
    throw DimensionError(msg.str());
  }
}

void check_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sb.size() > sa.size() || !std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) dimension_error(op, sa, sb);
}

void check_segments(const char* op, std::size_t rows, std::span<const std::uint32_t> segment_of,
                    std::size_t n_segments) {
  if (segment_of.size() != rows) {
    std::ostringstream msg;
    msg << op << ": " << segment_of.size() << " segment ids for " << rows << " rows";
    throw DimensionError(msg.str());
  }
  for (auto s : segment_of) {
    if (s >= n_segments) throw InvalidArgument(std::string(op) + ": segment id out of range");
  }
}

// Row count and row width of a rank-1 or rank-2 tensor.
std::pair<std::size_t, std::size_t> rows_width(const char* op, const Tensor& t) {
  if (t.rank() == 1) return {t.shape()[0], 1};
  if (t.rank() == 2) return {t.shape()[0], t.shape()[1]};
  std::ostringstream msg;
  msg << op << ": expected a 1-D or 2-D tensor, got " << shape_string(t.shape());
  throw DimensionError(msg.str());
}

Shape with_rows(const Tensor& like, std::size_t rows) {
  Shape s = like.shape();
  s[0] = rows;
  return s;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_product(shape);
  return from_values(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_product(shape) != values.size()) {
    std::ostringstream msg;
    msg << "Tensor: shape " << shape_string(shape) << " needs " << shape_product(shape) << " values, got "
        << values.size();
    throw DimensionError(msg.str());
  }
  Tensor t;
  t.storage_ = std::make_shared<Storage>();
  t.storage_->shape = std::move(shape);
  t.storage_->values = std::move(values);
  t.storage_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  return from_values({m.rows, m.cols}, m.data, requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_values({}, {value}, requires_grad); }

std::size_t Tensor::rows() const { return rank() == 0 ? 1 : shape()[0]; }
std::size_t Tensor::cols() const { return rank() == 2 ? shape()[1] : 1; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("Tensor::item: tensor has " + std::to_string(size()) + " elements");
  return storage_->values[0];
}

std::span<double> Tensor::mutable_grad() const {
  if (storage_->grad.empty()) storage_->grad.assign(storage_->values.size(), 0.0);
  return storage_->grad;
}

Matrix Tensor::to_matrix() const {
  Matrix m;
  m.rows = rows();
  m.cols = cols();
  m.data = storage_->values;
  return m;
}

Tensor Tensor::clone() const { return from_values(shape(), storage_->values, requires_grad()); }

// ---------------------------------------------------------------------------
// Tape

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(std::function<void()> backward) { entries_.push_back(std::move(backward)); }

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) throw DimensionError("Tape::backward: loss must be a scalar, got " + shape_string(loss.shape()));
  if (loss.requires_grad()) {
    loss.mutable_grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }
  entries_.clear();
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) dimension_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  MutableMap(out.data(), m, n).noalias() = ConstMap(a.values().data(), m, k) * ConstMap(b.values().data(), k, n);
  Tensor result = Tensor::from_values({m, n}, std::move(out), tape.tracks({&a, &b}));
  if (result.requires_grad()) {
    tape.record([a, b, result, m, k, n]() mutable {
      if (!result.has_grad()) return;
      ConstMap g(result.grad().data(), m, n);
      if (a.requires_grad()) {
        MutableMap(a.mutable_grad().data(), m, k).noalias() += g * ConstMap(b.values().data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        MutableMap(b.mutable_grad().data(), k, n).noalias() += ConstMap(a.values().data(), m, k).transpose() * g;
      }
    });
  }
  return result;
}

namespace {

enum class Binary { kAdd, kSub, kMul };

// Calls f(start) for every nb-sized block of an n-element buffer.
template <typename F>
void for_blocks(std::size_t n, std::size_t nb, F f) {
  for (std::size_t base = 0; base < n; base += nb) f(base);
}

Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  check_broadcast(name, a, b);
  const std::size_t n = a.size();
  const std::size_t nb = b.size();
  const double* av = a.values().data();
  const double* bv = b.values().data();
  std::vector<double> out(n);
  double* o = out.data();
  switch (kind) {
    case Binary::kAdd:
      for_blocks(n, nb, [&](std::size_t s) { for (std::size_t j = 0; j < nb; ++j) o[s + j] = av[s + j] + bv[j]; });
      break;
    case Binary::kSub:
      for_blocks(n, nb, [&](std::size_t s) { for (std::size_t j = 0; j < nb; ++j) o[s + j] = av[s + j] - bv[j]; });
      break;
    case Binary::kMul:
      for_blocks(n, nb, [&](std::size_t s) { for (std::size_t j = 0; j < nb; ++j) o[s + j] = av[s + j] * bv[j]; });
      break;
  }
  Tensor result = Tensor::from_values(a.shape(), std::move(out), tape.tracks({&a, &b}));
  if (result.requires_grad()) {
    tape.record([a, b, result, kind, n, nb]() {
      if (!result.has_grad()) return;
      const double* g = result.grad().data();
      if (a.requires_grad()) {
        double* ga = a.mutable_grad().data();
        if (kind == Binary::kMul) {
          const double* bv = b.values().data();
          for_blocks(n, nb, [&](std::size_t s) { for (std::size_t j = 0; j < nb; ++j) ga[s + j] += g[s + j] * bv[j]; });
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
        }
      }
      if (b.requires_grad()) {
        double* gb = b.mutable_grad().data();
        const double* av = a.values().data();
        switch (kind) {
          case Binary::kAdd:
            for_blocks(n, nb, [&](std::size_t s) { for (std::size_t j = 0; j < nb; ++j) gb[j] += g[s + j]; });
            break;
          case Binary::kSub:
            for_blocks(n, nb, [&](std::size_t s) { for (std::size_t j = 0; j < nb; ++j) gb[j] -= g[s + j]; });
            break;
          case Binary::kMul:
            for_blocks(n, nb, [&](std::size_t s) { for (std::size_t j = 0; j < nb; ++j) gb[j] += g[s + j] * av[s + j]; });
            break;
        }
      }
    });
  }
  return result;
}

template <typename Fwd, typename Deriv>
Tensor unary_op(Tape& tape, const Tensor& a, Fwd fwd, Deriv deriv) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  Tensor result = Tensor::from_values(a.shape(), std::move(out), tape.tracks({&a}));
  if (result.requires_grad()) {
    tape.record([a, result, deriv]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto ga = a.mutable_grad();
      auto av = a.values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(av[i]);
    });
  }
  return result;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, Binary::kAdd, "add"); }
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, Binary::kSub, "sub"); }
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, Binary::kMul, "mul"); }

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  return unary_op(
      tape, a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Tensor mul_scalar(Tape& tape, const Tensor& a, const Tensor& s) {
  if (s.size() != 1) dimension_error("mul_scalar", a.shape(), s.shape());
  const double factor = s[0];
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  Tensor result = Tensor::from_values(a.shape(), std::move(out), tape.tracks({&a, &s}));
  if (result.requires_grad()) {
    tape.record([a, s, result]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto av = a.values();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        const double factor = s[0];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
      }
      if (s.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
        s.mutable_grad()[0] += acc;
      }
    });
  }
  return result;
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary_op(
      tape, a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(Tape& tape, const Tensor& a, double slope) {
  return unary_op(
      tape, a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

Tensor concat(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw InvalidArgument("concat: no tensors");
  const std::size_t rows = parts[0].rows();
  std::size_t width = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    require_rank2("concat", p);
    if (p.rows() != rows) dimension_error("concat", parts[0].shape(), p.shape());
    width += p.cols();
    tracked = tracked || tape.tracks({&p});
  }
  std::vector<double> out(rows * width);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * w, w, out.data() + r * width + offset);
    }
    offset += w;
  }
  Tensor result = Tensor::from_values({rows, width}, std::move(out), tracked);
  if (result.requires_grad()) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape.record([inputs, result, rows, width]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * width + offset + c];
          }
        }
        offset += w;
      }
    });
  }
  return result;
}

Tensor slice_cols(Tape& tape, const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2("slice_cols", a);
  if (begin >= end || end > a.cols()) {
    std::ostringstream msg;
    msg << "slice_cols: columns [" << begin << ", " << end << ") out of range for " << shape_string(a.shape());
    throw DimensionError(msg.str());
  }
  const std::size_t rows = a.rows(), width = a.cols(), w = end - begin;
  std::vector<double> out(rows * w);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(av.data() + r * width + begin, w, out.data() + r * w);
  Tensor result = Tensor::from_values({rows, w}, std::move(out), tape.tracks({&a}));
  if (result.requires_grad()) {
    tape.record([a, result, rows, width, begin, w]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < w; ++c) ga[r * width + begin + c] += g[r * w + c];
      }
    });
  }
  return result;
}

Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::uint32_t> index) {
  const auto [rows, width] = rows_width("gather_rows", a);
  for (auto i : index) {
    if (i >= rows) throw InvalidArgument("gather_rows: row index out of range");
  }
  const std::size_t e = index.size();
  std::vector<double> out(e * width);
  auto av = a.values();
  for (std::size_t r = 0; r < e; ++r) {
    std::copy_n(av.data() + static_cast<std::size_t>(index[r]) * width, width, out.data() + r * width);
  }
  Tensor result = Tensor::from_values(with_rows(a, e), std::move(out), tape.tracks({&a}));
  if (result.requires_grad()) {
    std::vector<std::uint32_t> idx(index.begin(), index.end());
    tape.record([a, result, idx = std::move(idx), width]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        double* dst = ga.data() + static_cast<std::size_t>(idx[r]) * width;
        const double* src = g.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    });
  }
  return result;
}

Tensor segment_sum(Tape& tape, const Tensor& values, std::span<const std::uint32_t> segment_of,
                   std::size_t n_segments) {
  const auto [rows, width] = rows_width("segment_sum", values);
  check_segments("segment_sum", rows, segment_of, n_segments);
  std::vector<double> out(n_segments * width, 0.0);
  auto vv = values.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + static_cast<std::size_t>(segment_of[r]) * width;
    const double* src = vv.data() + r * width;
    for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
  }
  Tensor result = Tensor::from_values(with_rows(values, n_segments), std::move(out), tape.tracks({&values}));
  if (result.requires_grad()) {
    std::vector<std::uint32_t> seg(segment_of.begin(), segment_of.end());
    tape.record([values, result, seg = std::move(seg), width]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto gv = values.mutable_grad();
      for (std::size_t r = 0; r < seg.size(); ++r) {
        const double* src = g.data() + static_cast<std::size_t>(seg[r]) * width;
        double* dst = gv.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    });
  }
  return result;
}

Tensor segment_softmax(Tape& tape, const Tensor& logits, std::span<const std::uint32_t> segment_of,
                       std::size_t n_segments) {
  const auto [rows, width] = rows_width("segment_softmax", logits);
  check_segments("segment_softmax", rows, segment_of, n_segments);
  auto lv = logits.values();
  std::vector<double> seg_max(n_segments * width, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < rows; ++r) {
    double* m = seg_max.data() + static_cast<std::size_t>(segment_of[r]) * width;
    for (std::size_t c = 0; c < width; ++c) m[c] = std::max(m[c], lv[r * width + c]);
  }
  std::vector<double> out(rows * width);
  std::vector<double> seg_sum(n_segments * width, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t s = static_cast<std::size_t>(segment_of[r]) * width;
    for (std::size_t c = 0; c < width; ++c) {
      out[r * width + c] = std::exp(lv[r * width + c] - seg_max[s + c]);
      seg_sum[s + c] += out[r * width + c];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t s = static_cast<std::size_t>(segment_of[r]) * width;
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] /= seg_sum[s + c];
  }
  Tensor result = Tensor::from_values(logits.shape(), std::move(out), tape.tracks({&logits}));
  if (result.requires_grad()) {
    std::vector<std::uint32_t> seg(segment_of.begin(), segment_of.end());
    tape.record([logits, result, seg = std::move(seg), width, n_segments]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto y = result.values();
      std::vector<double> dot(n_segments * width, 0.0);
      for (std::size_t r = 0; r < seg.size(); ++r) {
        const std::size_t s = static_cast<std::size_t>(seg[r]) * width;
        for (std::size_t c = 0; c < width; ++c) dot[s + c] += g[r * width + c] * y[r * width + c];
      }
      auto gl = logits.mutable_grad();
      for (std::size_t r = 0; r < seg.size(); ++r) {
        const std::size_t s = static_cast<std::size_t>(seg[r]) * width;
        for (std::size_t c = 0; c < width; ++c) {
          const std::size_t i = r * width + c;
          gl[i] += y[i] * (g[i] - dot[s + c]);
        }
      }
    });
  }
  return result;
}

Tensor sum_blocks(Tape& tape, const Tensor& a, std::size_t n_blocks) {
  require_rank2("sum_blocks", a);
  if (n_blocks == 0 || a.cols() % n_blocks != 0) {
    throw DimensionError("sum_blocks: " + std::to_string(n_blocks) + " blocks do not divide " + shape_string(a.shape()));
  }
  const std::size_t rows = a.rows(), width = a.cols(), w = width / n_blocks;
  std::vector<double> out(rows * n_blocks, 0.0);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < n_blocks; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < w; ++c) acc += av[r * width + b * w + c];
      out[r * n_blocks + b] = acc;
    }
  }
  Tensor result = Tensor::from_values({rows, n_blocks}, std::move(out), tape.tracks({&a}));
  if (result.requires_grad()) {
    tape.record([a, result, rows, width, n_blocks, w]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
          const double gb = g[r * n_blocks + b];
          for (std::size_t c = 0; c < w; ++c) ga[r * width + b * w + c] += gb;
        }
      }
    });
  }
  return result;
}

Tensor repeat_blocks(Tape& tape, const Tensor& a, std::size_t width) {
  require_rank2("repeat_blocks", a);
  if (width == 0) throw DimensionError("repeat_blocks: zero width");
  const std::size_t rows = a.rows(), blocks = a.cols(), out_width = blocks * width;
  std::vector<double> out(rows * out_width);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < blocks; ++b) {
      std::fill_n(out.data() + r * out_width + b * width, width, av[r * blocks + b]);
    }
  }
  Tensor result = Tensor::from_values({rows, out_width}, std::move(out), tape.tracks({&a}));
  if (result.requires_grad()) {
    tape.record([a, result, rows, blocks, width, out_width]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t b = 0; b < blocks; ++b) {
          double acc = 0.0;
          for (std::size_t c = 0; c < width; ++c) acc += g[r * out_width + b * width + c];
          ga[r * blocks + b] += acc;
        }
      }
    });
  }
  return result;
}

Tensor spmm(Tape& tape, const CsrMatrix& s, const Tensor& x) {
  const auto [rows, width] = rows_width("spmm", x);
  if (rows != s.cols) {
    std::ostringstream msg;
    msg << "spmm: operator is " << s.rows << "x" << s.cols << ", input is " << shape_string(x.shape());
    throw DimensionError(msg.str());
  }
  std::vector<double> out(s.rows * width);
  s.multiply_dense(x.values(), width, out);
  Tensor result = Tensor::from_values(with_rows(x, s.rows), std::move(out), tape.tracks({&x}));
  if (result.requires_grad()) {
    // The operator outlives the tape: it belongs to the graph being processed.
    const CsrMatrix* op = &s;
    tape.record([op, x, result, width]() mutable {
      if (!result.has_grad()) return;
      op->transpose_multiply_add(result.grad(), width, x.mutable_grad());
    });
  }
  return result;
}

Tensor sum(Tape& tape, const Tensor& a) {
  auto av = a.values();
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  Tensor result = Tensor::from_values({}, {total}, tape.tracks({&a}));
  if (result.requires_grad()) {
    tape.record([a, result]() mutable {
      if (!result.has_grad()) return;
      const double g = result.grad()[0];
      for (auto& v : a.mutable_grad()) v += g;
    });
  }
  return result;
}

Tensor mean(Tape& tape, const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs, double step) {
  std::vector<bool> previous(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    previous[i] = inputs[i].requires_grad();
    inputs[i].set_requires_grad(true);
    inputs[i].zero_grad();
  }
  {
    Tape tape;
    Tensor y = f(tape);
    tape.backward(y);
  }
  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> analytic(inputs[i].size(), 0.0);
    if (inputs[i].has_grad()) std::copy(inputs[i].grad().begin(), inputs[i].grad().end(), analytic.begin());
    auto values = inputs[i].mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + step;
      Tape plus_tape(false);
      const double plus = f(plus_tape).item();
      values[j] = saved - step;
      Tape minus_tape(false);
      const double minus = f(minus_tape).item();
      values[j] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), 1e-3});
      const double rel = std::abs(analytic[j] - numeric) / denom;
      if (rel > result.max_rel_error || !std::isfinite(rel)) {
        result = {rel, i, j, analytic[j], numeric};
      }
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].zero_grad();
    inputs[i].set_requires_grad(previous[i]);
  }
  return result;
}

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x, double step) {
  std::vector<Tensor> inputs{x};
  return grad_check([&](Tape& tape) { return f(tape, inputs[0]); }, inputs, step).max_rel_error;
}

}  // namespace meltgraph
