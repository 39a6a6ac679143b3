#include <algorithm>

#include "mdctcodec/detail/blas.hpp"
#include "mdctcodec/error.hpp"
#include "mdctcodec/tensor.hpp"

namespace mdctcodec {

namespace {

template <typename T>
using Node = detail::Node<T>;

// col[(c*k + j) * lout + t] = x[c, t*stride + j*dilation - pad_left] (zero outside).
template <typename T>
void im2col_1d(const T* x, std::size_t channels, std::size_t length, std::size_t kernel,
               const Conv1dGeometry& g, std::size_t lout, T* col) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < kernel; ++j) {
      T* dst = col + (c * kernel + j) * lout;
      const std::ptrdiff_t offset =
          static_cast<std::ptrdiff_t>(j * g.dilation) - static_cast<std::ptrdiff_t>(g.pad_left);
      for (std::size_t t = 0; t < lout; ++t) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride) + offset;
        dst[t] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) ? x[c * length + pos] : T(0);
      }
    }
  }
}

template <typename T>
void col2im_1d(const T* col, std::size_t channels, std::size_t length, std::size_t kernel,
               const Conv1dGeometry& g, std::size_t lout, T* x) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < kernel; ++j) {
      const T* src = col + (c * kernel + j) * lout;
      const std::ptrdiff_t offset =
          static_cast<std::ptrdiff_t>(j * g.dilation) - static_cast<std::ptrdiff_t>(g.pad_left);
      for (std::size_t t = 0; t < lout; ++t) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride) + offset;
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) x[c * length + pos] += src[t];
      }
    }
  }
}

template <typename T>
void im2col_2d(const T* x, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
               std::size_t kw, const Conv2dGeometry& g, std::size_t hout, std::size_t wout, T* col) {
  const std::size_t plane = hout * wout;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        T* dst = col + ((c * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < hout; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride_h + i) -
                                   static_cast<std::ptrdiff_t>(g.pad_top);
          T* row = dst + oy * wout;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(row, row + wout, T(0));
            continue;
          }
          const T* src = x + (c * h + static_cast<std::size_t>(y)) * w;
          for (std::size_t ox = 0; ox < wout; ++ox) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(ox * g.stride_w + j) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
            row[ox] = (xx >= 0 && xx < static_cast<std::ptrdiff_t>(w)) ? src[xx] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_2d(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
               std::size_t kw, const Conv2dGeometry& g, std::size_t hout, std::size_t wout, T* x) {
  const std::size_t plane = hout * wout;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        const T* src = col + ((c * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < hout; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride_h + i) -
                                   static_cast<std::ptrdiff_t>(g.pad_top);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = x + (c * h + static_cast<std::size_t>(y)) * w;
          for (std::size_t ox = 0; ox < wout; ++ox) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(ox * g.stride_w + j) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
            if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(w)) dst[xx] += src[oy * wout + ox];
          }
        }
      }
}

template <typename T>
void add_channel_bias(T* out, const T* bias, std::size_t channels, std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < plane; ++t) out[c * plane + t] += bias[c];
}

template <typename T>
void accumulate_channel_bias_grad(const T* g, T* gb, std::size_t channels, std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    T acc = T(0);
    for (std::size_t t = 0; t < plane; ++t) acc += g[c * plane + t];
    gb[c] += acc;
  }
}

}  // namespace

std::size_t Conv1dGeometry::output_length(std::size_t input_length, std::size_t kernel) const {
  const std::size_t span = dilation * (kernel - 1) + 1;
  const std::size_t padded = input_length + pad_left + pad_right;
  require(stride > 0 && padded >= span, ErrorKind::kShape,
          "conv1d input of length " + std::to_string(input_length) + " is shorter than the kernel");
  return (padded - span) / stride + 1;
}

Conv1dGeometry same_padding_1d(std::size_t input_length, std::size_t kernel, std::size_t stride,
                               std::size_t dilation) {
  require(kernel >= 1 && stride >= 1 && dilation >= 1, ErrorKind::kInvalidConfig,
          "conv1d kernel, stride and dilation must be positive");
  const std::size_t out = (input_length + stride - 1) / stride;
  const std::size_t span = dilation * (kernel - 1) + 1;
  const std::size_t needed = out == 0 ? 0 : (out - 1) * stride + span;
  const std::size_t total = needed > input_length ? needed - input_length : 0;
  Conv1dGeometry g;
  g.stride = stride;
  g.dilation = dilation;
  g.pad_left = total / 2;
  g.pad_right = total - total / 2;
  return g;
}

Conv2dGeometry same_padding_2d(std::size_t height, std::size_t width, std::size_t kernel_h,
                               std::size_t kernel_w, std::size_t stride_h, std::size_t stride_w) {
  const auto gh = same_padding_1d(height, kernel_h, stride_h);
  const auto gw = same_padding_1d(width, kernel_w, stride_w);
  return Conv2dGeometry{stride_h, stride_w, gh.pad_left, gh.pad_right, gw.pad_left, gw.pad_right};
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv1dGeometry& geom) {
  require(x.dim() == 3 && weight.dim() == 3, ErrorKind::kShape,
          "conv1d expects x[B, C, L] and weight[Cout, Cin/groups, k]");
  const std::size_t batch = x.extent(0), cin = x.extent(1), len = x.extent(2);
  const std::size_t cout = weight.extent(0), cin_g = weight.extent(1), kernel = weight.extent(2);
  const std::size_t groups = geom.groups;
  require(groups >= 1 && cin % groups == 0 && cout % groups == 0 && cin / groups == cin_g,
          ErrorKind::kShape,
          "conv1d channel mismatch: input has " + std::to_string(cin) + " channels, weight " +
              shape_string(weight.shape()) + ", groups " + std::to_string(groups));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == cout, ErrorKind::kShape, "conv1d bias size mismatch");
  const std::size_t lout = geom.output_length(len, kernel);
  const std::size_t cout_g = cout / groups;
  const bool depthwise = cin_g == 1 && cout_g == 1;

  std::vector<T> out(batch * cout * lout, T(0));
  const T* px = x.data().data();
  const T* pw = weight.data().data();
  std::vector<T> col(depthwise ? 0 : cin_g * kernel * lout);
  for (std::size_t b = 0; b < batch; ++b) {
    T* ob = out.data() + b * cout * lout;
    if (depthwise) {
      for (std::size_t c = 0; c < cin; ++c) {
        const T* xc = px + (b * cin + c) * len;
        const T* wc = pw + c * kernel;
        T* oc = ob + c * lout;
        for (std::size_t j = 0; j < kernel; ++j) {
          const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(j * geom.dilation) -
                                        static_cast<std::ptrdiff_t>(geom.pad_left);
          for (std::size_t t = 0; t < lout; ++t) {
            const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * geom.stride) + offset;
            if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) oc[t] += wc[j] * xc[pos];
          }
        }
      }
    } else {
      for (std::size_t g = 0; g < groups; ++g) {
        im2col_1d(px + (b * cin + g * cin_g) * len, cin_g, len, kernel, geom, lout, col.data());
        detail::gemm(false, false, cout_g, lout, cin_g * kernel, T(1),
                     pw + g * cout_g * cin_g * kernel, cin_g * kernel, col.data(), lout, T(0),
                     ob + g * cout_g * lout, lout);
      }
    }
    if (has_bias) add_channel_bias(ob, bias.data().data(), cout, lout);
  }

  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor<T>::make_result(
      Shape{batch, cout, lout}, std::move(out), std::move(parents), [=](Node<T>& self) {
        Node<T>& nx = *self.parents[0];
        Node<T>& nw = *self.parents[1];
        const T* gy = self.grad.data();
        const T* vx = nx.data.data();
        const T* vw = nw.data.data();
        T* gx = nx.requires_grad ? nx.ensure_grad().data() : nullptr;
        T* gw = nw.requires_grad ? nw.ensure_grad().data() : nullptr;
        std::vector<T> col(depthwise ? 0 : cin_g * kernel * lout);
        std::vector<T> dcol(depthwise ? 0 : cin_g * kernel * lout);
        for (std::size_t b = 0; b < batch; ++b) {
          const T* gb = gy + b * cout * lout;
          if (depthwise) {
            for (std::size_t c = 0; c < cin; ++c) {
              const T* xc = vx + (b * cin + c) * len;
              const T* gc = gb + c * lout;
              for (std::size_t j = 0; j < kernel; ++j) {
                const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(j * geom.dilation) -
                                              static_cast<std::ptrdiff_t>(geom.pad_left);
                T acc = T(0);
                for (std::size_t t = 0; t < lout; ++t) {
                  const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * geom.stride) + offset;
                  if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
                  acc += gc[t] * xc[pos];
                  if (gx) gx[(b * cin + c) * len + pos] += gc[t] * vw[c * kernel + j];
                }
                if (gw) gw[c * kernel + j] += acc;
              }
            }
            continue;
          }
          for (std::size_t g = 0; g < groups; ++g) {
            const T* wg = vw + g * cout_g * cin_g * kernel;
            const T* gyg = gb + g * cout_g * lout;
            if (gw) {
              im2col_1d(vx + (b * cin + g * cin_g) * len, cin_g, len, kernel, geom, lout, col.data());
              detail::gemm(false, true, cout_g, cin_g * kernel, lout, T(1), gyg, lout, col.data(),
                           lout, T(1), gw + g * cout_g * cin_g * kernel, cin_g * kernel);
            }
            if (gx) {
              detail::gemm(true, false, cin_g * kernel, lout, cout_g, T(1), wg, cin_g * kernel, gyg,
                           lout, T(0), dcol.data(), lout);
              col2im_1d(dcol.data(), cin_g, len, kernel, geom, lout, gx + (b * cin + g * cin_g) * len);
            }
          }
        }
        if (has_bias && self.parents[2]->requires_grad) {
          T* gbias = self.parents[2]->ensure_grad().data();
          for (std::size_t b = 0; b < batch; ++b)
            accumulate_channel_bias_grad(gy + b * cout * lout, gbias, cout, lout);
        }
      });
}

template <typename T>
Tensor<T> conv_transpose1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           const Conv1dGeometry& geom, std::size_t output_length) {
  require(x.dim() == 3 && weight.dim() == 3, ErrorKind::kShape,
          "conv_transpose1d expects x[B, Cin, L] and weight[Cin, Cout, k]");
  require(geom.groups == 1, ErrorKind::kInvalidConfig, "conv_transpose1d supports groups == 1");
  const std::size_t batch = x.extent(0), cin = x.extent(1), lin = x.extent(2);
  require(weight.extent(0) == cin, ErrorKind::kShape,
          "conv_transpose1d channel mismatch: input has " + std::to_string(cin) +
              " channels, weight " + shape_string(weight.shape()));
  const std::size_t cout = weight.extent(1), kernel = weight.extent(2);
  require(geom.output_length(output_length, kernel) == lin, ErrorKind::kShape,
          "conv_transpose1d geometry does not map length " + std::to_string(output_length) +
              " onto " + std::to_string(lin));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == cout, ErrorKind::kShape, "conv_transpose1d bias size mismatch");
  const std::size_t lout = output_length;
  const std::size_t ck = cout * kernel;

  std::vector<T> out(batch * cout * lout, T(0));
  std::vector<T> col(ck * lin);
  const T* pw = weight.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    // col = W^T x, W viewed as [Cin, Cout*k].
    detail::gemm(true, false, ck, lin, cin, T(1), pw, ck, x.data().data() + b * cin * lin, lin, T(0),
                 col.data(), lin);
    T* ob = out.data() + b * cout * lout;
    col2im_1d(col.data(), cout, lout, kernel, geom, lin, ob);
    if (has_bias) add_channel_bias(ob, bias.data().data(), cout, lout);
  }

  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor<T>::make_result(
      Shape{batch, cout, lout}, std::move(out), std::move(parents), [=](Node<T>& self) {
        Node<T>& nx = *self.parents[0];
        Node<T>& nw = *self.parents[1];
        const T* gy = self.grad.data();
        std::vector<T> col(ck * lin);
        for (std::size_t b = 0; b < batch; ++b) {
          im2col_1d(gy + b * cout * lout, cout, lout, kernel, geom, lin, col.data());
          if (nx.requires_grad) {
            detail::gemm(false, false, cin, lin, ck, T(1), nw.data.data(), ck, col.data(), lin, T(1),
                         nx.ensure_grad().data() + b * cin * lin, lin);
          }
          if (nw.requires_grad) {
            detail::gemm(false, true, cin, ck, lin, T(1), nx.data.data() + b * cin * lin, lin,
                         col.data(), lin, T(1), nw.ensure_grad().data(), ck);
          }
        }
        if (has_bias && self.parents[2]->requires_grad) {
          T* gbias = self.parents[2]->ensure_grad().data();
          for (std::size_t b = 0; b < batch; ++b)
            accumulate_channel_bias_grad(gy + b * cout * lout, gbias, cout, lout);
        }
      });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dGeometry& geom) {
  require(x.dim() == 4 && weight.dim() == 4, ErrorKind::kShape,
          "conv2d expects x[B, C, H, W] and weight[Cout, Cin, kh, kw]");
  const std::size_t batch = x.extent(0), cin = x.extent(1), h = x.extent(2), w = x.extent(3);
  const std::size_t cout = weight.extent(0), kh = weight.extent(2), kw = weight.extent(3);
  require(weight.extent(1) == cin, ErrorKind::kShape,
          "conv2d channel mismatch: input has " + std::to_string(cin) + " channels, weight " +
              shape_string(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == cout, ErrorKind::kShape, "conv2d bias size mismatch");
  const Conv1dGeometry gh{geom.stride_h, 1, geom.pad_top, geom.pad_bottom, 1};
  const Conv1dGeometry gw{geom.stride_w, 1, geom.pad_left, geom.pad_right, 1};
  const std::size_t hout = gh.output_length(h, kh);
  const std::size_t wout = gw.output_length(w, kw);
  const std::size_t plane = hout * wout;
  const std::size_t patch = cin * kh * kw;

  std::vector<T> out(batch * cout * plane, T(0));
  std::vector<T> col(patch * plane);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col_2d(x.data().data() + b * cin * h * w, cin, h, w, kh, kw, geom, hout, wout, col.data());
    T* ob = out.data() + b * cout * plane;
    detail::gemm(false, false, cout, plane, patch, T(1), weight.data().data(), patch, col.data(),
                 plane, T(0), ob, plane);
    if (has_bias) add_channel_bias(ob, bias.data().data(), cout, plane);
  }

  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor<T>::make_result(
      Shape{batch, cout, hout, wout}, std::move(out), std::move(parents), [=](Node<T>& self) {
        Node<T>& nx = *self.parents[0];
        Node<T>& nw = *self.parents[1];
        const T* gy = self.grad.data();
        std::vector<T> col(patch * plane);
        for (std::size_t b = 0; b < batch; ++b) {
          const T* gb = gy + b * cout * plane;
          if (nw.requires_grad) {
            im2col_2d(nx.data.data() + b * cin * h * w, cin, h, w, kh, kw, geom, hout, wout,
                      col.data());
            detail::gemm(false, true, cout, patch, plane, T(1), gb, plane, col.data(), plane, T(1),
                         nw.ensure_grad().data(), patch);
          }
          if (nx.requires_grad) {
            detail::gemm(true, false, patch, plane, cout, T(1), nw.data.data(), patch, gb, plane,
                         T(0), col.data(), plane);
            col2im_2d(col.data(), cin, h, w, kh, kw, geom, hout, wout,
                      nx.ensure_grad().data() + b * cin * h * w);
          }
        }
        if (has_bias && self.parents[2]->requires_grad) {
          T* gbias = self.parents[2]->ensure_grad().data();
          for (std::size_t b = 0; b < batch; ++b)
            accumulate_channel_bias_grad(gy + b * cout * plane, gbias, cout, plane);
        }
      });
}

#define MDCTCODEC_INSTANTIATE_CONV(T)                                                         \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                            const Conv1dGeometry&);                                           \
  template Tensor<T> conv_transpose1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                      const Conv1dGeometry&, std::size_t);                    \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                            const Conv2dGeometry&);

MDCTCODEC_INSTANTIATE_CONV(float)
MDCTCODEC_INSTANTIATE_CONV(double)

}  // namespace mdctcodec
