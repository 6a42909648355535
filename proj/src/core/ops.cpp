// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stt/core/autograd.hpp"
#include "stt/simd/kernels.hpp"

namespace stt {
namespace {

using autograd::make_result;
using autograd::parent;
using autograd::parent_grad;

int normalize_axis(int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return a;
}

// (outer, extent, inner) split of a shape around `axis`.
struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t extent = 1;
  std::int64_t inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

template <typename T>
Tensor<T> unary(const Tensor<T>& x, const char* op, auto&& fwd, auto&& dfdx) {
  std::vector<T> out(x.data().size());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xs[i]);
  return make_result<T>(x.shape(), std::move(out), {x}, op,
                        [dfdx](TensorNode<T>& o) {
                          auto gx = parent_grad(o, 0);
                          if (gx.empty()) return;
                          const auto& xv = parent(o, 0).data;
                          for (std::size_t i = 0; i < gx.size(); ++i) {
                            gx[i] += o.grad[i] * dfdx(xv[i], o.data[i]);
                          }
                        });
}

}  // namespace

// ---------------------------------------------------------------------------
// matmul

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::int64_t m = a.dim(-2), k = a.dim(-1);
  const std::int64_t kb = b.dim(-2), n = b.dim(-1);
  if (k != kb) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  const Shape abatch(a.shape().begin(), a.shape().end() - 2);
  const Shape bbatch(b.shape().begin(), b.shape().end() - 2);
  const std::size_t r = std::max(abatch.size(), bbatch.size());
  Shape batch(r, 1);
  // Right-aligned per-axis extents with 1 (or absence) broadcasting.
  std::vector<std::int64_t> astride(r, 0), bstride(r, 0);
  {
    std::int64_t as = 1, bs = 1;
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t ri = r - 1 - i;
      const std::int64_t ad = i < abatch.size() ? abatch[abatch.size() - 1 - i] : 1;
      const std::int64_t bd = i < bbatch.size() ? bbatch[bbatch.size() - 1 - i] : 1;
      if (ad != bd && ad != 1 && bd != 1) {
        throw ShapeError("matmul: batch extents not broadcast-compatible, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
      }
      batch[ri] = std::max(ad, bd);
      astride[ri] = ad == 1 ? 0 : as;
      bstride[ri] = bd == 1 ? 0 : bs;
      as *= ad;
      bs *= bd;
    }
  }
  const std::int64_t nbatch = numel(batch);
  std::vector<std::int64_t> aoff(nbatch), boff(nbatch);
  {
    std::vector<std::int64_t> idx(r, 0);
    for (std::int64_t bi = 0; bi < nbatch; ++bi) {
      std::int64_t ao = 0, bo = 0;
      for (std::size_t d = 0; d < r; ++d) {
        ao += idx[d] * astride[d];
        bo += idx[d] * bstride[d];
      }
      aoff[bi] = ao * m * k;
      boff[bi] = bo * k * n;
      for (std::size_t d = r; d-- > 0;) {
        if (++idx[d] < batch[d]) break;
        idx[d] = 0;
      }
    }
  }

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<T> out(static_cast<std::size_t>(nbatch * m * n));
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  // A shared B against a batch-contiguous A is one tall product.
  const bool stacked = std::all_of(boff.begin(), boff.end(), [](auto v) { return v == 0; }) &&
                       numel(abatch) == nbatch;
  if (stacked) {
    simd::gemm<T>(simd::Trans::kNo, simd::Trans::kNo, nbatch * m, n, k, T(1), ad, k, bd, n,
                  T(0), out.data(), n);
  } else {
    for (std::int64_t bi = 0; bi < nbatch; ++bi) {
      simd::gemm<T>(simd::Trans::kNo, simd::Trans::kNo, m, n, k, T(1), ad + aoff[bi], k,
                    bd + boff[bi], n, T(0), out.data() + bi * m * n, n);
    }
  }
  return make_result<T>(
      std::move(out_shape), std::move(out), {a, b}, "matmul",
      [aoff = std::move(aoff), boff = std::move(boff), nbatch, m, n, k,
       stacked](TensorNode<T>& o) {
        auto ga = parent_grad(o, 0);
        auto gb = parent_grad(o, 1);
        const T* av = parent(o, 0).data.data();
        const T* bv = parent(o, 1).data.data();
        if (stacked) {
          const std::int64_t rows = nbatch * m;
          if (!ga.empty()) {
            simd::gemm<T>(simd::Trans::kNo, simd::Trans::kYes, rows, k, n, T(1),
                          o.grad.data(), n, bv, n, T(1), ga.data(), k);
          }
          if (!gb.empty()) {
            simd::gemm<T>(simd::Trans::kYes, simd::Trans::kNo, k, n, rows, T(1), av, k,
                          o.grad.data(), n, T(1), gb.data(), n);
          }
          return;
        }
        for (std::int64_t bi = 0; bi < nbatch; ++bi) {
          const T* go = o.grad.data() + bi * m * n;
          if (!ga.empty()) {
            // dA = dC * B^T
            simd::gemm<T>(simd::Trans::kNo, simd::Trans::kYes, m, k, n, T(1), go, n,
                          bv + boff[bi], n, T(1), ga.data() + aoff[bi], k);
          }
          if (!gb.empty()) {
            // dB = A^T * dC
            simd::gemm<T>(simd::Trans::kYes, simd::Trans::kNo, k, n, m, T(1),
                          av + aoff[bi], k, go, n, T(1), gb.data() + boff[bi], n);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// layout ops

namespace {

// Copies `src` (shape `shape`) into `dst` laid out in `order`, or scatters
// back (accumulating) when `inverse` is set.
template <typename T>
void permute_copy(const Shape& shape, const std::vector<int>& order, const T* src,
                  T* dst, bool accumulate_back) {
  const std::size_t r = shape.size();
  std::vector<std::int64_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * shape[i];
  Shape out_shape(r);
  std::vector<std::int64_t> stride(r);
  for (std::size_t d = 0; d < r; ++d) {
    out_shape[d] = shape[order[d]];
    stride[d] = in_stride[order[d]];
  }
  const std::int64_t total = numel(shape);
  if (r == 0 || total == 0) return;
  const std::int64_t last = out_shape[r - 1];
  const std::int64_t last_stride = stride[r - 1];
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t in_off = 0;
  for (std::int64_t o = 0; o < total; o += last) {
    if (accumulate_back) {
      for (std::int64_t j = 0; j < last; ++j) dst[in_off + j * last_stride] += src[o + j];
    } else {
      for (std::int64_t j = 0; j < last; ++j) dst[o + j] = src[in_off + j * last_stride];
    }
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      in_off += stride[d];
      if (idx[d] < out_shape[d]) break;
      in_off -= stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& order) {
  const int r = x.rank();
  std::vector<int> seen(r, 0);
  bool valid = static_cast<int>(order.size()) == r;
  if (valid) {
    for (int o : order) {
      if (o < 0 || o >= r || seen[o]++) {
        valid = false;
        break;
      }
    }
  }
  if (!valid) {
    std::string s;
    for (int o : order) s += std::to_string(o) + " ";
    throw ShapeError("permute: invalid permutation [" + s + "] for shape " +
                     shape_str(x.shape()));
  }
  Shape out_shape(r);
  for (int d = 0; d < r; ++d) out_shape[d] = x.shape()[order[d]];
  std::vector<T> out(x.data().size());
  permute_copy(x.shape(), order, x.data().data(), out.data(), false);
  return make_result<T>(std::move(out_shape), std::move(out), {x}, "permute",
                        [order](TensorNode<T>& o) {
                          auto gx = parent_grad(o, 0);
                          if (gx.empty()) return;
                          permute_copy(parent(o, 0).shape, order, o.grad.data(),
                                       gx.data(), true);
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  std::vector<int> order(x.rank());
  std::iota(order.begin(), order.end(), 0);
  if (x.rank() < 2) throw ShapeError("transpose needs rank >= 2");
  std::swap(order[order.size() - 1], order[order.size() - 2]);
  return permute(x, order);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(std::move(shape), std::move(out), {x}, "reshape",
                        [](TensorNode<T>& o) {
                          auto gx = parent_grad(o, 0);
                          if (gx.empty()) return;
                          simd::add<T>(gx, o.grad, gx);
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  const int r = xs[0].rank();
  axis = normalize_axis(axis, r);
  Shape out_shape = xs[0].shape();
  out_shape[axis] = 0;
  for (const auto& t : xs) {
    Shape s = t.shape();
    if (static_cast<int>(s.size()) != r) throw ShapeError("concat: rank mismatch");
    const auto e = s[axis];
    s[axis] = 0;
    Shape ref = out_shape;
    ref[axis] = 0;
    if (s != ref) {
      throw ShapeError("concat: shapes " + shape_str(xs[0].shape()) + " and " +
                       shape_str(t.shape()) + " differ off the concat axis");
    }
    out_shape[axis] += e;
  }
  const AxisSplit outs = split_at(out_shape, axis);
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::int64_t> widths;
  std::int64_t pos = 0;
  for (const auto& t : xs) {
    const std::int64_t w = t.shape()[axis] * outs.inner;
    widths.push_back(w);
    for (std::int64_t o = 0; o < outs.outer; ++o) {
      std::copy_n(t.data().data() + o * w, w,
                  out.data() + o * outs.extent * outs.inner + pos);
    }
    pos += w;
  }
  return make_result<T>(std::move(out_shape), std::move(out), xs, "concat",
                        [widths, outs](TensorNode<T>& o) {
                          std::int64_t pos = 0;
                          for (std::size_t i = 0; i < widths.size(); ++i) {
                            auto g = parent_grad(o, i);
                            const std::int64_t w = widths[i];
                            if (!g.empty()) {
                              for (std::int64_t b = 0; b < outs.outer; ++b) {
                                const T* src = o.grad.data() + b * outs.extent * outs.inner + pos;
                                T* dst = g.data() + b * w;
                                for (std::int64_t j = 0; j < w; ++j) dst[j] += src[j];
                              }
                            }
                            pos += w;
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length) {
  axis = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  if (start < 0 || length <= 0 || start + length > s.extent) {
    throw ShapeError("slice [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") out of range for shape " +
                     shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  const std::int64_t w = length * s.inner;
  for (std::int64_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data().data() + (o * s.extent + start) * s.inner, w, out.data() + o * w);
  }
  return make_result<T>(std::move(out_shape), std::move(out), {x}, "slice",
                        [s, start, w](TensorNode<T>& o) {
                          auto gx = parent_grad(o, 0);
                          if (gx.empty()) return;
                          for (std::int64_t b = 0; b < s.outer; ++b) {
                            T* dst = gx.data() + (b * s.extent + start) * s.inner;
                            const T* src = o.grad.data() + b * w;
                            for (std::int64_t j = 0; j < w; ++j) dst[j] += src[j];
                          }
                        });
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  std::vector<T> out(a.data().size());
  simd::add<T>(a.data(), b.data(), out);
  return make_result<T>(a.shape(), std::move(out), {a, b}, "add", [](TensorNode<T>& o) {
    for (std::size_t i = 0; i < 2; ++i) {
      auto g = parent_grad(o, i);
      if (!g.empty()) simd::add<T>(g, o.grad, g);
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a.shape(), b.shape());
  std::vector<T> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "sub", [](TensorNode<T>& o) {
    auto ga = parent_grad(o, 0);
    if (!ga.empty()) simd::add<T>(ga, o.grad, ga);
    auto gb = parent_grad(o, 1);
    if (!gb.empty()) simd::axpy<T>(T(-1), o.grad, gb);
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a.shape(), b.shape());
  std::vector<T> out(a.data().size());
  simd::mul<T>(a.data(), b.data(), out);
  return make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [](TensorNode<T>& o) {
    for (std::size_t i = 0; i < 2; ++i) {
      auto g = parent_grad(o, i);
      if (g.empty()) continue;
      const auto& other = parent(o, 1 - i).data;
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += o.grad[j] * other[j];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  simd::scale<T>(factor, out);
  return make_result<T>(x.shape(), std::move(out), {x}, "scale", [factor](TensorNode<T>& o) {
    auto gx = parent_grad(o, 0);
    if (!gx.empty()) simd::axpy<T>(factor, o.grad, gx);
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v += value;
  return make_result<T>(x.shape(), std::move(out), {x}, "add_scalar", [](TensorNode<T>& o) {
    auto gx = parent_grad(o, 0);
    if (!gx.empty()) simd::add<T>(gx, o.grad, gx);
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::int64_t n = x.dim(-1);
  if (bias.rank() != 1 || bias.dim(0) != n) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                     " does not match last axis of " + shape_str(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const std::int64_t rows = x.numel() / n;
  for (std::int64_t r = 0; r < rows; ++r) {
    simd::add<T>(std::span<const T>(out.data() + r * n, n), bias.data(),
                 std::span<T>(out.data() + r * n, n));
  }
  return make_result<T>(x.shape(), std::move(out), {x, bias}, "add_bias",
                        [rows, n](TensorNode<T>& o) {
                          auto gx = parent_grad(o, 0);
                          if (!gx.empty()) simd::add<T>(gx, o.grad, gx);
                          auto gb = parent_grad(o, 1);
                          if (gb.empty()) return;
                          for (std::int64_t r = 0; r < rows; ++r) {
                            simd::add<T>(gb, std::span<const T>(o.grad.data() + r * n, n), gb);
                          }
                        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.data().size());
  simd::relu<T>(x.data(), out);
  return make_result<T>(x.shape(), std::move(out), {x}, "relu", [](TensorNode<T>& o) {
    auto gx = parent_grad(o, 0);
    if (!gx.empty()) simd::relu_backward<T>(parent(o, 0).data, o.grad, gx);
  });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary(
      x, "leaky_relu", [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log_sigmoid(const Tensor<T>& x) {
  return unary(
      x, "log_sigmoid",
      [](T v) { return std::min(v, T(0)) - std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) {
        // d/dv log(sigmoid(v)) = sigmoid(-v)
        if (v >= T(0)) {
          const T e = std::exp(-v);
          return e / (T(1) + e);
        }
        return T(1) / (T(1) + std::exp(v));
      });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(
      x, "abs", [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return make_result<T>(Shape{1}, std::vector<T>{acc}, {x}, "sum", [](TensorNode<T>& o) {
    auto gx = parent_grad(o, 0);
    const T g = o.grad[0];
    for (auto& v : gx) v += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis) {
  axis = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<T> out(static_cast<std::size_t>(s.outer * s.inner), T(0));
  const T inv = T(1) / static_cast<T>(s.extent);
  const T* xd = x.data().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t e = 0; e < s.extent; ++e) {
      const T* row = xd + (o * s.extent + e) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::int64_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  for (auto& v : out) v *= inv;
  return make_result<T>(std::move(out_shape), std::move(out), {x}, "mean_axis",
                        [s, inv](TensorNode<T>& o) {
                          auto gx = parent_grad(o, 0);
                          if (gx.empty()) return;
                          for (std::int64_t b = 0; b < s.outer; ++b) {
                            const T* g = o.grad.data() + b * s.inner;
                            for (std::int64_t e = 0; e < s.extent; ++e) {
                              T* dst = gx.data() + (b * s.extent + e) * s.inner;
                              for (std::int64_t i = 0; i < s.inner; ++i) dst[i] += inv * g[i];
                            }
                          }
                        });
}

// ---------------------------------------------------------------------------
// softmax / normalization

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  axis = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<T> out(x.data().size());
  const T* xd = x.data().data();
  if (s.inner == 1) {
    simd::softmax_rows<T>(s.outer, s.extent, xd, out.data());
    return make_result<T>(x.shape(), std::move(out), {x}, "softmax", [s](TensorNode<T>& o) {
      auto gx = parent_grad(o, 0);
      if (gx.empty()) return;
      simd::softmax_rows_backward<T>(s.outer, s.extent, o.data.data(), o.grad.data(),
                                     gx.data());
    });
  }
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      const std::int64_t base = o * s.extent * s.inner + i;
      T mx = xd[base];
      for (std::int64_t e = 1; e < s.extent; ++e) mx = std::max(mx, xd[base + e * s.inner]);
      T total = 0;
      for (std::int64_t e = 0; e < s.extent; ++e) {
        const T v = std::exp(xd[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      const T inv = T(1) / total;
      for (std::int64_t e = 0; e < s.extent; ++e) out[base + e * s.inner] *= inv;
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x}, "softmax", [s](TensorNode<T>& o) {
    auto gx = parent_grad(o, 0);
    if (gx.empty()) return;
    const T* y = o.data.data();
    const T* gy = o.grad.data();
    for (std::int64_t b = 0; b < s.outer; ++b) {
      for (std::int64_t i = 0; i < s.inner; ++i) {
        const std::int64_t base = b * s.extent * s.inner + i;
        T d = 0;
        for (std::int64_t e = 0; e < s.extent; ++e) {
          const auto j = base + e * s.inner;
          d += gy[j] * y[j];
        }
        for (std::int64_t e = 0; e < s.extent; ++e) {
          const auto j = base + e * s.inner;
          gx[j] += y[j] * (gy[j] - d);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps) {
  const std::int64_t n = x.dim(-1);
  if (n < 2) {
    throw ShapeError("layer_norm needs >= 2 elements along the normalized axis, shape " +
                     shape_str(x.shape()));
  }
  if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) {
    throw ShapeError("layer_norm: gamma/beta must have shape (" + std::to_string(n) + ",)");
  }
  const std::int64_t rows = x.numel() / n;
  std::vector<T> xhat(x.data().size());
  std::vector<T> rstd(static_cast<std::size_t>(rows));
  std::vector<T> out(x.data().size());
  const T* xd = x.data().data();
  const T* g = gamma.data().data();
  const T* bt = beta.data().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = xd + r * n;
    T mu = 0;
    for (std::int64_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<T>(n);
    T var = 0;
    for (std::int64_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(n);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::int64_t j = 0; j < n; ++j) {
      const T h = (row[j] - mu) * rs;
      xhat[r * n + j] = h;
      out[r * n + j] = g[j] * h + bt[j];
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gamma, beta}, "layer_norm",
      [xhat = std::move(xhat), rstd = std::move(rstd), rows, n](TensorNode<T>& o) {
        auto gx = parent_grad(o, 0);
        auto gg = parent_grad(o, 1);
        auto gb = parent_grad(o, 2);
        const T* gam = parent(o, 1).data.data();
        std::vector<T> dxhat(static_cast<std::size_t>(n));
        for (std::int64_t r = 0; r < rows; ++r) {
          const T* gy = o.grad.data() + r * n;
          const T* h = xhat.data() + r * n;
          if (!gg.empty()) {
            for (std::int64_t j = 0; j < n; ++j) gg[j] += gy[j] * h[j];
          }
          if (!gb.empty()) {
            for (std::int64_t j = 0; j < n; ++j) gb[j] += gy[j];
          }
          if (gx.empty()) continue;
          T m1 = 0, m2 = 0;
          for (std::int64_t j = 0; j < n; ++j) {
            dxhat[j] = gy[j] * gam[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * h[j];
          }
          m1 /= static_cast<T>(n);
          m2 /= static_cast<T>(n);
          T* dx = gx.data() + r * n;
          for (std::int64_t j = 0; j < n; ++j) dx[j] += rstd[r] * (dxhat[j] - m1 - h[j] * m2);
        }
      });
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target) {
  require_same_shape("bce_with_logits", logits.shape(), target.shape());
  const auto z = logits.data();
  const auto y = target.data();
  T acc = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    acc += std::max(z[i], T(0)) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const T inv = T(1) / static_cast<T>(z.size());
  return make_result<T>(Shape{1}, std::vector<T>{acc * inv}, {logits}, "bce_with_logits",
                        [target, inv](TensorNode<T>& o) {
                          auto gz = parent_grad(o, 0);
                          if (gz.empty()) return;
                          const auto& zv = parent(o, 0).data;
                          const auto yv = target.data();
                          const T g = o.grad[0] * inv;
                          for (std::size_t i = 0; i < gz.size(); ++i) {
                            const T p = zv[i] >= T(0) ? T(1) / (T(1) + std::exp(-zv[i]))
                                                      : std::exp(zv[i]) / (T(1) + std::exp(zv[i]));
                            gz[i] += g * (p - yv[i]);
                          }
                        });
}

#define STT_INSTANTIATE(T)                                                         \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);           \
  template Tensor<T> transpose(const Tensor<T>&);                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                             \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                   \
  template Tensor<T> slice(const Tensor<T>&, int, std::int64_t, std::int64_t);     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                   \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                              \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> relu(const Tensor<T>&);                                       \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                    \
  template Tensor<T> log_sigmoid(const Tensor<T>&);                                \
  template Tensor<T> abs(const Tensor<T>&);                                        \
  template Tensor<T> sum(const Tensor<T>&);                                        \
  template Tensor<T> mean(const Tensor<T>&);                                       \
  template Tensor<T> mean_axis(const Tensor<T>&, int);                             \
  template Tensor<T> softmax(const Tensor<T>&, int);                               \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> bce_with_logits(const Tensor<T>&, const Tensor<T>&);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

#undef STT_INSTANTIATE

}  // namespace stt
