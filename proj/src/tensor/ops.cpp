#include <algorithm>
#include <cmath>
#include <numbers>

#include "mdctcodec/detail/blas.hpp"
#include "mdctcodec/error.hpp"
#include "mdctcodec/tensor.hpp"

namespace mdctcodec {

namespace {

template <typename T>
using Node = detail::Node<T>;

// Index mapping from a broadcast output onto its two operands.
struct BroadcastPlan {
  enum class Kind { kSame, kScalarB, kScalarA, kSuffixB, kSuffixA, kGeneral };
  Kind kind = Kind::kSame;
  Shape out_shape;
  std::size_t numel = 0;
  std::size_t na = 0;
  std::size_t nb = 0;
  std::vector<std::size_t> stride_a;  // per output dim, 0 where broadcast
  std::vector<std::size_t> stride_b;

  template <typename F>
  void for_each(F&& f) const {
    switch (kind) {
      case Kind::kSame:
        for (std::size_t i = 0; i < numel; ++i) f(i, i, i);
        return;
      case Kind::kScalarB:
        for (std::size_t i = 0; i < numel; ++i) f(i, i, 0);
        return;
      case Kind::kScalarA:
        for (std::size_t i = 0; i < numel; ++i) f(i, 0, i);
        return;
      case Kind::kSuffixB:
        for (std::size_t i = 0; i < numel; ++i) f(i, i, i % nb);
        return;
      case Kind::kSuffixA:
        for (std::size_t i = 0; i < numel; ++i) f(i, i % na, i);
        return;
      case Kind::kGeneral: {
        const std::size_t nd = out_shape.size();
        std::vector<std::size_t> idx(nd, 0);
        std::size_t ia = 0, ib = 0;
        for (std::size_t i = 0; i < numel; ++i) {
          f(i, ia, ib);
          for (std::size_t d = nd; d-- > 0;) {
            ++idx[d];
            ia += stride_a[d];
            ib += stride_b[d];
            if (idx[d] < out_shape[d]) break;
            ia -= stride_a[d] * idx[d];
            ib -= stride_b[d] * idx[d];
            idx[d] = 0;
          }
        }
        return;
      }
    }
  }
};

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t d_in = in.size() - 1 - i;
    const std::size_t d_out = out.size() - 1 - i;
    strides[d_out] = in[d_in] == 1 ? 0 : s;
    s *= in[d_in];
  }
  return strides;
}

BroadcastPlan make_plan(const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  plan.out_shape = broadcast_shapes(a, b);
  plan.numel = shape_numel(plan.out_shape);
  plan.na = shape_numel(a);
  plan.nb = shape_numel(b);
  using K = BroadcastPlan::Kind;
  if (a == b) {
    plan.kind = K::kSame;
  } else if (plan.nb == 1 && plan.na == plan.numel) {
    plan.kind = K::kScalarB;
  } else if (plan.na == 1 && plan.nb == plan.numel) {
    plan.kind = K::kScalarA;
  } else if (plan.na == plan.numel && is_suffix(b, a)) {
    plan.kind = K::kSuffixB;
  } else if (plan.nb == plan.numel && is_suffix(a, b)) {
    plan.kind = K::kSuffixA;
  } else {
    plan.kind = K::kGeneral;
    plan.stride_a = broadcast_strides(a, plan.out_shape);
    plan.stride_b = broadcast_strides(b, plan.out_shape);
  }
  return plan;
}

// Binary op with value f(a, b) and partials da(a, b), db(a, b).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
  auto plan = make_plan(a.shape(), b.shape());
  std::vector<T> out(plan.numel);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  plan.for_each([&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = f(pa[ia], pb[ib]); });
  Shape shape = plan.out_shape;
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), {a, b}, [plan, da, db](Node<T>& self) {
        Node<T>& na = *self.parents[0];
        Node<T>& nb = *self.parents[1];
        const T* g = self.grad.data();
        const T* va = na.data.data();
        const T* vb = nb.data.data();
        if (na.requires_grad) {
          T* ga = na.ensure_grad().data();
          plan.for_each([&](std::size_t i, std::size_t ia, std::size_t ib) {
            ga[ia] += g[i] * da(va[ia], vb[ib]);
          });
        }
        if (nb.requires_grad) {
          T* gb = nb.ensure_grad().data();
          plan.for_each([&](std::size_t i, std::size_t ia, std::size_t ib) {
            gb[ib] += g[i] * db(va[ia], vb[ib]);
          });
        }
      });
}

// Unary op; the derivative sees input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& a, F f, D d) {
  const auto in = a.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [d](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    auto& gp = p.ensure_grad();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i] * d(p.data[i], self.data[i]);
  });
}

// Splits `shape` around `axis` into (outer, extent, inner).
std::tuple<std::size_t, std::size_t, std::size_t> split_axis(const Shape& shape, std::size_t axis) {
  require(axis < shape.size(), ErrorKind::kShape,
          "axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  return {outer, shape[axis], inner};
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    require(da == db || da == 1 || db == 1, ErrorKind::kShape,
            "shapes " + shape_string(a) + " and " + shape_string(b) + " are not broadcastable");
    out[nd - 1 - i] = std::max(da, db);
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
                [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
                [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
                [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
                [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  return unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> rsub_scalar(T s, const Tensor<T>& a) {
  return unary(a, [s](T x) { return s - x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return unary(a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::abs(x); },
               [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::sqrt(x); },
               [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> maximum(const Tensor<T>& a, T floor) {
  return unary(a, [floor](T x) { return x > floor ? x : floor; },
               [floor](T x, T) { return x > floor ? T(1) : T(0); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return maximum(a, T(0));
}

template <typename T>
Tensor<T> log_clamped(const Tensor<T>& a, T floor) {
  return unary(a, [floor](T x) { return std::log(x > floor ? x : floor); },
               [floor](T x, T) { return x > floor ? T(1) / x : T(0); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T kInvSqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return unary(
      a, [=](T x) { return T(0.5) * x * (T(1) + std::erf(x * kInvSqrt2)); },
      [=](T x, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
        const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
        return cdf + x * pdf;
      });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  return unary(a, [slope](T x) { return x > T(0) ? x : slope * x; },
               [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  return Tensor<T>::make_result(Shape{}, {total}, {a}, [](Node<T>& self) {
    auto& gp = self.parents[0]->ensure_grad();
    const T g = self.grad[0];
    for (T& v : gp) v += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  require(a.numel() > 0, ErrorKind::kContract, "mean of an empty tensor");
  return mul_scalar(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis, bool keepdim) {
  const auto [outer, extent, inner] = split_axis(a.shape(), axis);
  std::vector<T> out(outer * inner, T(0));
  const T* in = a.data().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t e = 0; e < extent; ++e)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += in[(o * extent + e) * inner + i];
  Shape shape = a.shape();
  if (keepdim) {
    shape[axis] = 1;
  } else {
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), {a}, [outer, extent, inner](Node<T>& self) {
        auto& gp = self.parents[0]->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t e = 0; e < extent; ++e)
            for (std::size_t i = 0; i < inner; ++i)
              gp[(o * extent + e) * inner + i] += self.grad[o * inner + i];
      });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis, bool keepdim) {
  const std::size_t extent = a.shape().at(axis);
  require(extent > 0, ErrorKind::kContract, "mean over an empty axis");
  return mul_scalar(sum(a, axis, keepdim), T(1) / static_cast<T>(extent));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), ErrorKind::kShape,
          "cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  return Tensor<T>::make_result(std::move(shape), a.values(), {a}, [](Node<T>& self) {
    auto& gp = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, std::size_t d0, std::size_t d1) {
  const Shape& in_shape = a.shape();
  require(d0 < in_shape.size() && d1 < in_shape.size(), ErrorKind::kShape,
          "transpose axes out of range for " + shape_string(in_shape));
  if (d0 > d1) std::swap(d0, d1);
  // View as [outer, n0, mid, n1, inner] and swap n0 with n1.
  std::size_t outer = 1, mid = 1, inner = 1;
  for (std::size_t i = 0; i < d0; ++i) outer *= in_shape[i];
  for (std::size_t i = d0 + 1; i < d1; ++i) mid *= in_shape[i];
  for (std::size_t i = d1 + 1; i < in_shape.size(); ++i) inner *= in_shape[i];
  const std::size_t n0 = in_shape[d0], n1 = in_shape[d1];
  auto src_index = [=](std::size_t o, std::size_t i0, std::size_t m, std::size_t i1,
                       std::size_t in) {
    return (((o * n0 + i0) * mid + m) * n1 + i1) * inner + in;
  };
  auto dst_index = [=](std::size_t o, std::size_t i0, std::size_t m, std::size_t i1,
                       std::size_t in) {
    return (((o * n1 + i1) * mid + m) * n0 + i0) * inner + in;
  };
  std::vector<T> out(a.numel());
  const T* src = a.data().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i0 = 0; i0 < n0; ++i0)
      for (std::size_t m = 0; m < mid; ++m)
        for (std::size_t i1 = 0; i1 < n1; ++i1) {
          const std::size_t s = src_index(o, i0, m, i1, 0);
          const std::size_t d = dst_index(o, i0, m, i1, 0);
          for (std::size_t in = 0; in < inner; ++in) out[d + in] = src[s + in];
        }
  Shape shape = in_shape;
  std::swap(shape[d0], shape[d1]);
  return Tensor<T>::make_result(std::move(shape), std::move(out), {a}, [=](Node<T>& self) {
    auto& gp = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i0 = 0; i0 < n0; ++i0)
        for (std::size_t m = 0; m < mid; ++m)
          for (std::size_t i1 = 0; i1 < n1; ++i1) {
            const std::size_t s = src_index(o, i0, m, i1, 0);
            const std::size_t d = dst_index(o, i0, m, i1, 0);
            for (std::size_t in = 0; in < inner; ++in) gp[s + in] += self.grad[d + in];
          }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.dim() >= 2 && b.dim() >= 2, ErrorKind::kShape, "matmul needs matrices");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const std::size_t m = sa[sa.size() - 2], p = sa.back();
  const std::size_t pb = sb[sb.size() - 2], q = sb.back();
  require(p == pb, ErrorKind::kShape,
          "matmul inner dimensions differ: " + shape_string(sa) + " x " + shape_string(sb));
  const bool shared_b = sb.size() == 2;
  Shape batch(sa.begin(), sa.end() - 2);
  if (!shared_b) {
    require(Shape(sb.begin(), sb.end() - 2) == batch, ErrorKind::kShape,
            "matmul batch dimensions differ: " + shape_string(sa) + " x " + shape_string(sb));
  }
  const std::size_t nbatch = shape_numel(batch);
  std::vector<T> out(nbatch * m * q);
  if (shared_b) {
    detail::gemm(false, false, nbatch * m, q, p, T(1), a.data().data(), p, b.data().data(), q,
                 T(0), out.data(), q);
  } else {
    for (std::size_t i = 0; i < nbatch; ++i) {
      detail::gemm(false, false, m, q, p, T(1), a.data().data() + i * m * p, p,
                   b.data().data() + i * p * q, q, T(0), out.data() + i * m * q, q);
    }
  }
  Shape shape = batch;
  shape.push_back(m);
  shape.push_back(q);
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), {a, b}, [=](Node<T>& self) {
        Node<T>& na = *self.parents[0];
        Node<T>& nb = *self.parents[1];
        const T* g = self.grad.data();
        if (na.requires_grad) {
          T* ga = na.ensure_grad().data();
          if (shared_b) {
            detail::gemm(false, true, nbatch * m, p, q, T(1), g, q, nb.data.data(), q, T(1), ga, p);
          } else {
            for (std::size_t i = 0; i < nbatch; ++i)
              detail::gemm(false, true, m, p, q, T(1), g + i * m * q, q,
                           nb.data.data() + i * p * q, q, T(1), ga + i * m * p, p);
          }
        }
        if (nb.requires_grad) {
          T* gb = nb.ensure_grad().data();
          if (shared_b) {
            detail::gemm(true, false, p, q, nbatch * m, T(1), na.data.data(), p, g, q, T(1), gb, q);
          } else {
            for (std::size_t i = 0; i < nbatch; ++i)
              detail::gemm(true, false, p, q, m, T(1), na.data.data() + i * m * p, p,
                           g + i * m * q, q, T(1), gb + i * p * q, q);
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(weight.dim() == 2 && x.dim() >= 1, ErrorKind::kShape, "linear expects W[out, in]");
  const std::size_t fin = weight.extent(1), fout = weight.extent(0);
  require(x.shape().back() == fin, ErrorKind::kShape,
          "linear input width " + std::to_string(x.shape().back()) + " != " + std::to_string(fin));
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.numel() == fout, ErrorKind::kShape, "linear bias size mismatch");
  }
  const std::size_t rows = x.numel() / fin;
  std::vector<T> out(rows * fout);
  if (has_bias) {
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(bias.data().begin(), bias.data().end(), out.begin() + static_cast<std::ptrdiff_t>(r * fout));
  }
  detail::gemm(false, true, rows, fout, fin, T(1), x.data().data(), fin, weight.data().data(), fin,
               has_bias ? T(1) : T(0), out.data(), fout);
  Shape shape = x.shape();
  shape.back() = fout;
  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), std::move(parents), [=](Node<T>& self) {
        Node<T>& nx = *self.parents[0];
        Node<T>& nw = *self.parents[1];
        const T* g = self.grad.data();
        if (nx.requires_grad) {
          detail::gemm(false, false, rows, fin, fout, T(1), g, fout, nw.data.data(), fin, T(1),
                       nx.ensure_grad().data(), fin);
        }
        if (nw.requires_grad) {
          detail::gemm(true, false, fout, fin, rows, T(1), g, fout, nx.data.data(), fin, T(1),
                       nw.ensure_grad().data(), fin);
        }
        if (has_bias && self.parents[2]->requires_grad) {
          auto& gb = self.parents[2]->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < fout; ++o) gb[o] += g[r * fout + o];
        }
      });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  require(x.dim() >= 1, ErrorKind::kShape, "layer_norm on a scalar");
  const std::size_t f = x.shape().back();
  require(f >= 1 && gamma.numel() == f && beta.numel() == f, ErrorKind::kShape,
          "layer_norm affine parameters must match the feature width");
  const std::size_t rows = x.numel() / f;
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(rows);
  const T* in = x.data().data();
  const T* g = gamma.data().data();
  const T* b = beta.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in + r * f;
    T mu = T(0);
    for (std::size_t i = 0; i < f; ++i) mu += row[i];
    mu /= static_cast<T>(f);
    T var = T(0);
    for (std::size_t i = 0; i < f; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<T>(f);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t i = 0; i < f; ++i) {
      const T h = (row[i] - mu) * is;
      xhat[r * f + i] = h;
      out[r * f + i] = h * g[i] + b[i];
    }
  }
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [f, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        Node<T>& nx = *self.parents[0];
        Node<T>& ng = *self.parents[1];
        Node<T>& nb = *self.parents[2];
        const T* gy = self.grad.data();
        if (ng.requires_grad) {
          auto& gg = ng.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < f; ++i) gg[i] += gy[r * f + i] * xhat[r * f + i];
        }
        if (nb.requires_grad) {
          auto& gb = nb.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < f; ++i) gb[i] += gy[r * f + i];
        }
        if (nx.requires_grad) {
          auto& gx = nx.ensure_grad();
          const T* gam = ng.data.data();
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_d = T(0), mean_dh = T(0);
            for (std::size_t i = 0; i < f; ++i) {
              const T d = gy[r * f + i] * gam[i];
              mean_d += d;
              mean_dh += d * xhat[r * f + i];
            }
            mean_d /= static_cast<T>(f);
            mean_dh /= static_cast<T>(f);
            for (std::size_t i = 0; i < f; ++i) {
              const T d = gy[r * f + i] * gam[i];
              gx[r * f + i] += inv_std[r] * (d - mean_d - xhat[r * f + i] * mean_dh);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> indices) {
  require(table.dim() == 2, ErrorKind::kShape, "gather_rows expects a 2-D table");
  const std::size_t rows = table.extent(0), width = table.extent(1);
  std::vector<T> out(indices.size() * width);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < rows, ErrorKind::kContract, "gather_rows index out of range");
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  Shape shape{idx.size(), width};
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), {table},
      [width, idx = std::move(idx)](Node<T>& self) {
        auto& gt = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < width; ++j) gt[idx[i] * width + j] += self.grad[i * width + j];
      });
}

template <typename T>
Tensor<T> straight_through(const Tensor<T>& value, const Tensor<T>& target) {
  require(value.shape() == target.shape(), ErrorKind::kShape,
          "straight_through shapes differ: " + shape_string(value.shape()) + " vs " +
              shape_string(target.shape()));
  return Tensor<T>::make_result(value.shape(), value.values(), {target}, [](Node<T>& self) {
    auto& gt = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += self.grad[i];
  });
}

#define MDCTCODEC_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                       \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                       \
  template Tensor<T> rsub_scalar(T, const Tensor<T>&);                                      \
  template Tensor<T> neg(const Tensor<T>&);                                                 \
  template Tensor<T> abs(const Tensor<T>&);                                                 \
  template Tensor<T> square(const Tensor<T>&);                                              \
  template Tensor<T> sqrt(const Tensor<T>&);                                                \
  template Tensor<T> log(const Tensor<T>&);                                                 \
  template Tensor<T> maximum(const Tensor<T>&, T);                                          \
  template Tensor<T> relu(const Tensor<T>&);                                                \
  template Tensor<T> log_clamped(const Tensor<T>&, T);                                      \
  template Tensor<T> gelu(const Tensor<T>&);                                                \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                       \
  template Tensor<T> sum(const Tensor<T>&);                                                 \
  template Tensor<T> mean(const Tensor<T>&);                                                \
  template Tensor<T> sum(const Tensor<T>&, std::size_t, bool);                              \
  template Tensor<T> mean(const Tensor<T>&, std::size_t, bool);                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                      \
  template Tensor<T> transpose(const Tensor<T>&, std::size_t, std::size_t);                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);   \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);           \
  template Tensor<T> straight_through(const Tensor<T>&, const Tensor<T>&);

MDCTCODEC_INSTANTIATE_OPS(float)
MDCTCODEC_INSTANTIATE_OPS(double)

}  // namespace mdctcodec
