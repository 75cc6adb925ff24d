#include "mpath/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace mpath {

std::size_t shape_size(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
void Tape<T>::backward(const Variable<T>& loss) {
  require(static_cast<bool>(loss), ErrorKind::contract, "backward on null loss");
  require(loss.size() == 1, ErrorKind::contract,
          "backward requires a scalar loss, got shape " +
              shape_str(loss.shape()));
  require(loss.requires_grad(), ErrorKind::contract,
          "loss does not depend on any recorded variable");
  loss.grad()[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

template <typename T>
void accumulate_grad(const Variable<T>& v, std::span<const std::type_identity_t<T>> src) {
  if (!v.requires_grad()) return;
  auto& g = v.grad();
  T* dst = g.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  const Eigen::Index em = static_cast<Eigen::Index>(m);
  const Eigen::Index en = static_cast<Eigen::Index>(n);
  const Eigen::Index ek = static_cast<Eigen::Index>(k);
  Eigen::Map<Mat> cm(c, em, en);
  if (!accumulate) cm.setZero();
  if (m == 0 || n == 0 || k == 0) return;
  if (!trans_a && !trans_b) {
    cm.noalias() += CMap(a, em, ek) * CMap(b, ek, en);
  } else if (trans_a && !trans_b) {
    cm.noalias() += CMap(a, ek, em).transpose() * CMap(b, ek, en);
  } else if (!trans_a && trans_b) {
    cm.noalias() += CMap(a, em, ek) * CMap(b, en, ek).transpose();
  } else {
    cm.noalias() += CMap(a, ek, em).transpose() * CMap(b, en, ek).transpose();
  }
}

namespace ops {
namespace {

template <typename T>
void check_same_shape(const Variable<T>& a, const Variable<T>& b,
                      const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorKind::dimension, std::string(op) + ": shapes " +
                                   shape_str(a.shape()) + " and " +
                                   shape_str(b.shape()) + " differ");
}

template <typename T>
void check_finite(const Tensor<T>& x, const char* op) {
  for (T v : x.values())
    if (!std::isfinite(v))
      fail(ErrorKind::numeric, std::string(op) + ": non-finite input");
}

template <typename T>
std::size_t last_dim(const Variable<T>& x, const char* op) {
  if (x.value().rank() == 0)
    fail(ErrorKind::dimension, std::string(op) + ": rank-0 input");
  return x.shape().back();
}

}  // namespace

template <typename T>
Variable<T> matmul(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    fail(ErrorKind::dimension,
         "matmul: cannot multiply " + shape_str(sa) + " by " + shape_str(sb));
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor<T> out({m, n});
  gemm<T>(false, false, m, n, k, a.value().data(), b.value().data(), out.data(),
          false);
  Variable<T> y(std::move(out), tape.tracks({&a, &b}));
  if (y.requires_grad()) {
    tape.record([a, b, y, m, n, k] {
      if (!y.has_grad()) return;
      const T* dc = y.grad().data();
      if (a.requires_grad())
        gemm<T>(false, true, m, k, n, dc, b.value().data(), a.grad().data(),
                true);
      if (b.requires_grad())
        gemm<T>(true, false, k, n, m, a.value().data(), dc, b.grad().data(),
                true);
    });
  }
  return y;
}

template <typename T>
Variable<T> add(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b) {
  check_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  const T* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  Variable<T> y(std::move(out), tape.tracks({&a, &b}));
  if (y.requires_grad()) {
    tape.record([a, b, y] {
      if (!y.has_grad()) return;
      accumulate_grad(a, y.grad().values());
      accumulate_grad(b, y.grad().values());
    });
  }
  return y;
}

template <typename T>
Variable<T> sub(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const T* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
  Variable<T> y(std::move(out), tape.tracks({&a, &b}));
  if (y.requires_grad()) {
    tape.record([a, b, y] {
      if (!y.has_grad()) return;
      accumulate_grad(a, y.grad().values());
      if (b.requires_grad()) {
        T* gb = b.grad().data();
        const T* g = y.grad().data();
        for (std::size_t i = 0; i < y.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> mul(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b) {
  check_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const T* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  Variable<T> y(std::move(out), tape.tracks({&a, &b}));
  if (y.requires_grad()) {
    tape.record([a, b, y] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      const std::size_t n = y.size();
      if (a.requires_grad()) {
        T* ga = a.grad().data();
        const T* vb = b.value().data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
      }
      if (b.requires_grad()) {
        T* gb = b.grad().data();
        const T* va = a.value().data();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> mul_const(Tape<T>& tape, const Variable<T>& a,
                      const Tensor<T>& mask) {
  if (a.shape() != mask.shape())
    fail(ErrorKind::dimension, "mul_const: shapes " + shape_str(a.shape()) +
                                   " and " + shape_str(mask.shape()) +
                                   " differ");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  Variable<T> y(std::move(out), tape.tracks({&a}));
  if (y.requires_grad()) {
    tape.record([a, y, mask] {
      if (!y.has_grad()) return;
      T* ga = a.grad().data();
      const T* g = y.grad().data();
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * mask[i];
    });
  }
  return y;
}

template <typename T>
Variable<T> affine(Tape<T>& tape, const Variable<T>& a, T alpha, T beta) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = alpha * v + beta;
  Variable<T> y(std::move(out), tape.tracks({&a}));
  if (y.requires_grad()) {
    tape.record([a, y, alpha] {
      if (!y.has_grad()) return;
      T* ga = a.grad().data();
      const T* g = y.grad().data();
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += alpha * g[i];
    });
  }
  return y;
}

template <typename T>
Variable<T> add_bias(Tape<T>& tape, const Variable<T>& x,
                     const Variable<T>& b) {
  const std::size_t n = last_dim(x, "add_bias");
  if (b.value().rank() != 1 || b.shape()[0] != n)
    fail(ErrorKind::dimension, "add_bias: bias " + shape_str(b.shape()) +
                                   " does not match " + shape_str(x.shape()));
  Tensor<T> out = x.value();
  const T* pb = b.value().data();
  const std::size_t rows = out.size() / std::max<std::size_t>(n, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += pb[j];
  }
  Variable<T> y(std::move(out), tape.tracks({&x, &b}));
  if (y.requires_grad()) {
    tape.record([x, b, y, n, rows] {
      if (!y.has_grad()) return;
      accumulate_grad(x, y.grad().values());
      if (b.requires_grad()) {
        T* gb = b.grad().data();
        const T* g = y.grad().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> scale_columns(Tape<T>& tape, const Variable<T>& x,
                          const Variable<T>& s) {
  const std::size_t n = last_dim(x, "scale_columns");
  if (s.value().rank() != 1 || s.shape()[0] != n)
    fail(ErrorKind::dimension, "scale_columns: scale " + shape_str(s.shape()) +
                                   " does not match " + shape_str(x.shape()));
  Tensor<T> out = x.value();
  const T* ps = s.value().data();
  const std::size_t rows = out.size() / std::max<std::size_t>(n, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) row[j] *= ps[j];
  }
  Variable<T> y(std::move(out), tape.tracks({&x, &s}));
  if (y.requires_grad()) {
    tape.record([x, s, y, n, rows] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      if (x.requires_grad()) {
        T* gx = x.grad().data();
        const T* ps = s.value().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j)
            gx[r * n + j] += g[r * n + j] * ps[j];
      }
      if (s.requires_grad()) {
        T* gs = s.grad().data();
        const T* px = x.value().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j)
            gs[j] += g[r * n + j] * px[r * n + j];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> sigmoid(Tape<T>& tape, const Variable<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y] {
      if (!y.has_grad()) return;
      T* gx = x.grad().data();
      const T* g = y.grad().data();
      const T* s = y.value().data();
      for (std::size_t i = 0; i < y.size(); ++i)
        gx[i] += g[i] * s[i] * (T(1) - s[i]);
    });
  }
  return y;
}

template <typename T>
Variable<T> tanh(Tape<T>& tape, const Variable<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y] {
      if (!y.has_grad()) return;
      T* gx = x.grad().data();
      const T* g = y.grad().data();
      const T* t = y.value().data();
      for (std::size_t i = 0; i < y.size(); ++i)
        gx[i] += g[i] * (T(1) - t[i] * t[i]);
    });
  }
  return y;
}

template <typename T>
Variable<T> softmax(Tape<T>& tape, const Variable<T>& x) {
  const std::size_t c = last_dim(x, "softmax");
  if (c == 0) fail(ErrorKind::dimension, "softmax: empty class axis");
  check_finite(x.value(), "softmax");
  Tensor<T> out = x.value();
  const std::size_t rows = out.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * c;
    const T mx = *std::max_element(row, row + c);
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= total;
  }
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y, rows, c] {
      if (!y.has_grad()) return;
      T* gx = x.grad().data();
      const T* g = y.grad().data();
      const T* p = y.value().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * c;
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += g[o + j] * p[o + j];
        for (std::size_t j = 0; j < c; ++j)
          gx[o + j] += p[o + j] * (g[o + j] - dot);
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> masked_softmax(Tape<T>& tape, const Variable<T>& x,
                           const std::vector<std::uint8_t>& mask) {
  if (x.value().rank() != 2 || mask.size() != x.size())
    fail(ErrorKind::dimension, "masked_softmax: input " + shape_str(x.shape()) +
                                   " with mask of length " +
                                   std::to_string(mask.size()));
  check_finite(x.value(), "masked_softmax");
  const std::size_t rows = x.shape()[0], c = x.shape()[1];
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.value().data() + r * c;
    const std::uint8_t* m = mask.data() + r * c;
    T* row = out.data() + r * c;
    bool any = false;
    T mx = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (!m[j]) continue;
      mx = any ? std::max(mx, in[j]) : in[j];
      any = true;
    }
    if (!any)
      fail(ErrorKind::degenerate,
           "masked_softmax: row " + std::to_string(r) + " is fully masked");
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = m[j] ? std::exp(in[j] - mx) : T(0);
      total += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= total;
  }
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y, rows, c] {
      if (!y.has_grad()) return;
      T* gx = x.grad().data();
      const T* g = y.grad().data();
      const T* p = y.value().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * c;
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += g[o + j] * p[o + j];
        for (std::size_t j = 0; j < c; ++j)
          gx[o + j] += p[o + j] * (g[o + j] - dot);
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> gather_rows(Tape<T>& tape, const Variable<T>& table,
                        std::span<const std::int32_t> indices) {
  if (table.value().rank() != 2)
    fail(ErrorKind::dimension,
         "gather_rows: table must be rank 2, got " + shape_str(table.shape()));
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  for (auto idx : indices)
    if (idx < 0 || static_cast<std::size_t>(idx) >= v)
      fail(ErrorKind::index, "gather_rows: index " + std::to_string(idx) +
                                 " outside [0, " + std::to_string(v) + ")");
  Tensor<T> out({indices.size(), d});
  const T* src = table.value().data();
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(src + static_cast<std::size_t>(indices[i]) * d, d,
                out.data() + i * d);
  Variable<T> y(std::move(out), tape.tracks({&table}));
  if (y.requires_grad()) {
    std::vector<std::int32_t> idx(indices.begin(), indices.end());
    tape.record([table, y, idx = std::move(idx), d] {
      if (!y.has_grad()) return;
      T* gt = table.grad().data();
      const T* g = y.grad().data();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        T* row = gt + static_cast<std::size_t>(idx[i]) * d;
        const T* gi = g + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += gi[j];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> concat_last(Tape<T>& tape, const Variable<T>& a,
                        const Variable<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.empty() || sa.size() != sb.size() ||
      !std::equal(sa.begin(), sa.end() - 1, sb.begin()))
    fail(ErrorKind::dimension, "concat_last: leading shapes of " +
                                   shape_str(sa) + " and " + shape_str(sb) +
                                   " differ");
  const std::size_t p = sa.back(), q = sb.back();
  const std::size_t rows = shape_size(Shape(sa.begin(), sa.end() - 1));
  Shape so = sa;
  so.back() = p + q;
  Tensor<T> out(so);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(b.value().data() + r * q, q, out.data() + r * (p + q) + p);
  }
  Variable<T> y(std::move(out), tape.tracks({&a, &b}));
  if (y.requires_grad()) {
    tape.record([a, b, y, rows, p, q] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      if (a.requires_grad()) {
        T* ga = a.grad().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < p; ++j) ga[r * p + j] += g[r * (p + q) + j];
      }
      if (b.requires_grad()) {
        T* gb = b.grad().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < q; ++j)
            gb[r * q + j] += g[r * (p + q) + p + j];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> reshape(Tape<T>& tape, const Variable<T>& x, Shape shape) {
  Tensor<T> out = x.value();
  out.reshape(std::move(shape));
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y] {
      if (!y.has_grad()) return;
      accumulate_grad(x, y.grad().values());
    });
  }
  return y;
}

template <typename T>
Variable<T> slice_time(Tape<T>& tape, const Variable<T>& x, std::size_t t) {
  const auto& s = x.shape();
  if (s.size() != 3 || t >= s[1])
    fail(ErrorKind::dimension, "slice_time: step " + std::to_string(t) +
                                   " of " + shape_str(s));
  const std::size_t batch = s[0], steps = s[1], d = s[2];
  Tensor<T> out({batch, d});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(x.value().data() + (b * steps + t) * d, d, out.data() + b * d);
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y, batch, steps, d, t] {
      if (!y.has_grad()) return;
      T* gx = x.grad().data();
      const T* g = y.grad().data();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < d; ++j)
          gx[(b * steps + t) * d + j] += g[b * d + j];
    });
  }
  return y;
}

template <typename T>
Variable<T> stack_time(Tape<T>& tape, const std::vector<Variable<T>>& steps) {
  if (steps.empty()) fail(ErrorKind::contract, "stack_time: no steps");
  const Shape s0 = steps.front().shape();
  if (s0.size() != 2) fail(ErrorKind::dimension, "stack_time: steps must be rank 2");
  for (const auto& st : steps)
    if (st.shape() != s0)
      fail(ErrorKind::dimension, "stack_time: step shapes " + shape_str(s0) +
                                     " and " + shape_str(st.shape()) +
                                     " differ");
  const std::size_t batch = s0[0], d = s0[1], n = steps.size();
  Tensor<T> out({batch, n, d});
  bool track = false;
  for (std::size_t t = 0; t < n; ++t) {
    track = track || (tape.recording() && steps[t].requires_grad());
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(steps[t].value().data() + b * d, d,
                  out.data() + (b * n + t) * d);
  }
  Variable<T> y(std::move(out), track);
  if (track) {
    tape.record([steps, y, batch, n, d] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      for (std::size_t t = 0; t < n; ++t) {
        if (!steps[t].requires_grad()) continue;
        T* gs = steps[t].grad().data();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t j = 0; j < d; ++j)
            gs[b * d + j] += g[(b * n + t) * d + j];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> where_rows(Tape<T>& tape, const std::vector<std::uint8_t>& keep,
                       const Variable<T>& a, const Variable<T>& fallback) {
  check_same_shape(a, fallback, "where_rows");
  if (a.value().rank() != 2 || keep.size() != a.shape()[0])
    fail(ErrorKind::dimension, "where_rows: " + std::to_string(keep.size()) +
                                   " flags for " + shape_str(a.shape()));
  const std::size_t rows = a.shape()[0], d = a.shape()[1];
  Tensor<T> out(a.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = (keep[r] ? a.value().data() : fallback.value().data()) + r * d;
    std::copy_n(src, d, out.data() + r * d);
  }
  Variable<T> y(std::move(out), tape.tracks({&a, &fallback}));
  if (y.requires_grad()) {
    tape.record([keep, a, fallback, y, rows, d] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const Variable<T>& dst = keep[r] ? a : fallback;
        if (!dst.requires_grad()) continue;
        T* gd = dst.grad().data() + r * d;
        for (std::size_t j = 0; j < d; ++j) gd[j] += g[r * d + j];
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> weighted_sum_time(Tape<T>& tape, const Variable<T>& weights,
                              const Variable<T>& states) {
  const auto& ss = states.shape();
  const auto& sw = weights.shape();
  if (ss.size() != 3 || sw.size() != 2 || sw[0] != ss[0] || sw[1] != ss[1])
    fail(ErrorKind::dimension, "weighted_sum_time: weights " + shape_str(sw) +
                                   " vs states " + shape_str(ss));
  const std::size_t batch = ss[0], steps = ss[1], d = ss[2];
  Tensor<T> out({batch, d});
  const T* w = weights.value().data();
  const T* h = states.value().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < steps; ++t) {
      const T wt = w[b * steps + t];
      const T* ht = h + (b * steps + t) * d;
      T* o = out.data() + b * d;
      for (std::size_t j = 0; j < d; ++j) o[j] += wt * ht[j];
    }
  Variable<T> y(std::move(out), tape.tracks({&weights, &states}));
  if (y.requires_grad()) {
    tape.record([weights, states, y, batch, steps, d] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      const T* w = weights.value().data();
      const T* h = states.value().data();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t) {
          const T* gb = g + b * d;
          const T* ht = h + (b * steps + t) * d;
          if (weights.requires_grad()) {
            T acc = 0;
            for (std::size_t j = 0; j < d; ++j) acc += gb[j] * ht[j];
            weights.grad().data()[b * steps + t] += acc;
          }
          if (states.requires_grad()) {
            T* gh = states.grad().data() + (b * steps + t) * d;
            const T wt = w[b * steps + t];
            for (std::size_t j = 0; j < d; ++j) gh[j] += wt * gb[j];
          }
        }
    });
  }
  return y;
}

template <typename T>
Variable<T> sum(Tape<T>& tape, const Variable<T>& x) {
  T total = 0;
  for (T v : x.value().values()) total += v;
  Variable<T> y(Tensor<T>::scalar(total), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y] {
      if (!y.has_grad()) return;
      const T g = y.grad()[0];
      for (auto& v : x.grad().values()) v += g;
    });
  }
  return y;
}

template <typename T>
Variable<T> mean(Tape<T>& tape, const Variable<T>& x) {
  if (x.size() == 0) fail(ErrorKind::contract, "mean of empty tensor");
  const T inv = T(1) / static_cast<T>(x.size());
  return affine(tape, sum(tape, x), inv, T(0));
}

template <typename T>
Variable<T> batch_normalize(Tape<T>& tape, const Variable<T>& x, T eps,
                            BatchMoments* moments) {
  if (x.value().rank() != 2)
    fail(ErrorKind::dimension,
         "batch_normalize: expected [batch x features], got " +
             shape_str(x.shape()));
  const std::size_t batch = x.shape()[0], f = x.shape()[1];
  if (batch < 2)
    fail(ErrorKind::contract, "batch_normalize: training mode needs batch >= 2");
  std::vector<T> mu(f, T(0)), var(f, T(0)), inv_std(f);
  const T* px = x.value().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < f; ++j) mu[j] += px[b * f + j];
  for (auto& m : mu) m /= static_cast<T>(batch);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < f; ++j) {
      const T dv = px[b * f + j] - mu[j];
      var[j] += dv * dv;
    }
  for (auto& v : var) v /= static_cast<T>(batch);
  for (std::size_t j = 0; j < f; ++j) inv_std[j] = T(1) / std::sqrt(var[j] + eps);
  if (moments) {
    moments->mean.assign(mu.begin(), mu.end());
    moments->var.assign(var.begin(), var.end());
  }
  Tensor<T> out(x.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < f; ++j)
      out[b * f + j] = (px[b * f + j] - mu[j]) * inv_std[j];
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y, inv_std = std::move(inv_std), batch, f] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      const T* xh = y.value().data();
      T* gx = x.grad().data();
      const T n = static_cast<T>(batch);
      for (std::size_t j = 0; j < f; ++j) {
        T sg = 0, sgx = 0;
        for (std::size_t b = 0; b < batch; ++b) {
          sg += g[b * f + j];
          sgx += g[b * f + j] * xh[b * f + j];
        }
        for (std::size_t b = 0; b < batch; ++b)
          gx[b * f + j] +=
              inv_std[j] / n * (n * g[b * f + j] - sg - xh[b * f + j] * sgx);
      }
    });
  }
  return y;
}

template <typename T>
Variable<T> normalize_fixed(Tape<T>& tape, const Variable<T>& x,
                            const Tensor<T>& mean, const Tensor<T>& var,
                            T eps) {
  const std::size_t f = last_dim(x, "normalize_fixed");
  if (mean.size() != f || var.size() != f)
    fail(ErrorKind::dimension, "normalize_fixed: statistics of length " +
                                   std::to_string(mean.size()) + " for " +
                                   shape_str(x.shape()));
  std::vector<T> inv_std(f);
  for (std::size_t j = 0; j < f; ++j) inv_std[j] = T(1) / std::sqrt(var[j] + eps);
  Tensor<T> out = x.value();
  const std::size_t rows = out.size() / std::max<std::size_t>(f, 1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < f; ++j)
      out[r * f + j] = (out[r * f + j] - mean[j]) * inv_std[j];
  Variable<T> y(std::move(out), tape.tracks({&x}));
  if (y.requires_grad()) {
    tape.record([x, y, inv_std = std::move(inv_std), rows, f] {
      if (!y.has_grad()) return;
      const T* g = y.grad().data();
      T* gx = x.grad().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < f; ++j)
          gx[r * f + j] += g[r * f + j] * inv_std[j];
    });
  }
  return y;
}

#define MPATH_INSTANTIATE_OPS(T)                                              \
  template Variable<T> matmul(Tape<T>&, const Variable<T>&,                   \
                              const Variable<T>&);                            \
  template Variable<T> add(Tape<T>&, const Variable<T>&, const Variable<T>&); \
  template Variable<T> sub(Tape<T>&, const Variable<T>&, const Variable<T>&); \
  template Variable<T> mul(Tape<T>&, const Variable<T>&, const Variable<T>&); \
  template Variable<T> mul_const(Tape<T>&, const Variable<T>&,                \
                                 const Tensor<T>&);                           \
  template Variable<T> affine(Tape<T>&, const Variable<T>&, T, T);            \
  template Variable<T> add_bias(Tape<T>&, const Variable<T>&,                 \
                                const Variable<T>&);                          \
  template Variable<T> scale_columns(Tape<T>&, const Variable<T>&,            \
                                     const Variable<T>&);                     \
  template Variable<T> sigmoid(Tape<T>&, const Variable<T>&);                 \
  template Variable<T> tanh(Tape<T>&, const Variable<T>&);                    \
  template Variable<T> softmax(Tape<T>&, const Variable<T>&);                 \
  template Variable<T> masked_softmax(Tape<T>&, const Variable<T>&,           \
                                      const std::vector<std::uint8_t>&);      \
  template Variable<T> gather_rows(Tape<T>&, const Variable<T>&,              \
                                   std::span<const std::int32_t>);            \
  template Variable<T> concat_last(Tape<T>&, const Variable<T>&,              \
                                   const Variable<T>&);                       \
  template Variable<T> reshape(Tape<T>&, const Variable<T>&, Shape);          \
  template Variable<T> slice_time(Tape<T>&, const Variable<T>&, std::size_t); \
  template Variable<T> stack_time(Tape<T>&, const std::vector<Variable<T>>&); \
  template Variable<T> where_rows(Tape<T>&, const std::vector<std::uint8_t>&, \
                                  const Variable<T>&, const Variable<T>&);    \
  template Variable<T> weighted_sum_time(Tape<T>&, const Variable<T>&,        \
                                         const Variable<T>&);                 \
  template Variable<T> sum(Tape<T>&, const Variable<T>&);                     \
  template Variable<T> mean(Tape<T>&, const Variable<T>&);                    \
  template Variable<T> batch_normalize(Tape<T>&, const Variable<T>&, T,       \
                                       BatchMoments*);                        \
  template Variable<T> normalize_fixed(Tape<T>&, const Variable<T>&,          \
                                       const Tensor<T>&, const Tensor<T>&, T);

MPATH_INSTANTIATE_OPS(float)
MPATH_INSTANTIATE_OPS(double)
#undef MPATH_INSTANTIATE_OPS

}  // namespace ops

GradCheckResult grad_check(
    const std::function<Variable<double>(Tape<double>&)>& forward,
    const std::vector<GradCheckTarget>& params, double eps,
    std::size_t max_entries_per_param, std::uint64_t seed) {
  require(eps > 0.0, ErrorKind::contract, "grad_check: eps must be positive");
  for (const auto& p : params) p.var.zero_grad();

  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    auto loss = forward(tape);
    if (!std::isfinite(loss.value().item()))
      fail(ErrorKind::numeric, "grad_check: non-finite loss");
    tape.backward(loss);
    for (const auto& p : params) analytic.push_back(p.var.grad());
  }

  auto eval = [&]() {
    Tape<double> tape(false);
    const double v = forward(tape).value().item();
    if (!std::isfinite(v))
      fail(ErrorKind::numeric, "grad_check: non-finite perturbed loss");
    return v;
  };

  GradCheckResult result;
  std::mt19937_64 rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto var = params[pi].var;
    const std::size_t n = var.size();
    std::vector<std::size_t> entries(n);
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (max_entries_per_param > 0 && n > max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(max_entries_per_param);
    }
    for (auto i : entries) {
      double& slot = var.mutable_value()[i];
      const double orig = slot;
      slot = orig + eps;
      const double plus = eval();
      slot = orig - eps;
      const double minus = eval();
      slot = orig;
      const double fd = (plus - minus) / (2.0 * eps);
      const double a = analytic[pi][i];
      if (!std::isfinite(a))
        fail(ErrorKind::numeric, "grad_check: non-finite analytic gradient");
      const double err =
          std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      ++result.entries_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = params[pi].name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

template class Tape<float>;
template class Tape<double>;
template void accumulate_grad(const Variable<float>&, std::span<const float>);
template void accumulate_grad(const Variable<double>&, std::span<const double>);
template void gemm(bool, bool, std::size_t, std::size_t, std::size_t,
                   const float*, const float*, float*, bool);
template void gemm(bool, bool, std::size_t, std::size_t, std::size_t,
                   const double*, const double*, double*, bool);

}  // namespace mpath
