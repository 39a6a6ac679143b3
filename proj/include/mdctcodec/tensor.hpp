#pragma once

// Dense row-major tensors with a dynamic reverse-mode tape.
//
// A Tensor is a shared handle onto a graph node. Operations on tensors that
// require gradients record their inputs and a backward rule; backward() on a
// scalar result walks the recorded graph once in reverse topological order and
// accumulates into the grad buffers of requires_grad leaves. Leaf gradients
// keep accumulating across calls until zero_grad().

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mdctcodec {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // empty for leaves

  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

// Recording switch; thread-local so graphs on distinct threads are independent.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;
  using BackwardFn = std::function<void(detail::Node<T>&)>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  // Builds an op result. Records parents and the backward rule only if grad
  // mode is on and some parent requires grad.
  static Tensor make_result(Shape shape, std::vector<T> values,
                            std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }
  // Zeros when no gradient has been accumulated yet.
  std::vector<T> grad() const;
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  // New leaf holding a copy of the values; never requires grad.
  Tensor detach() const;
  Tensor clone() const;

  // Loss must be a single-element tensor.
  void backward() const;

  const NodePtr& node() const { return node_; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}
  NodePtr node_;
};

// ---------------------------------------------------------------------------
// Elementwise arithmetic with trailing-dimension (numpy-style) broadcasting.

Shape broadcast_shapes(const Shape& a, const Shape& b);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);
// s - a
template <typename T> Tensor<T> rsub_scalar(T s, const Tensor<T>& a);

template <typename T> Tensor<T> neg(const Tensor<T>& a);
// Subgradient 0 at 0.
template <typename T> Tensor<T> abs(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
// Gradient taken as 0 where the output is exactly 0.
template <typename T> Tensor<T> sqrt(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
// max(a, floor); gradient passes only where a > floor.
template <typename T> Tensor<T> maximum(const Tensor<T>& a, T floor);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
// log(max(a, floor)).
template <typename T> Tensor<T> log_clamped(const Tensor<T>& a, T floor);
// x * Phi(x), erf form.
template <typename T> Tensor<T> gelu(const Tensor<T>& a);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& a, T slope);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }
template <typename T> Tensor<T> operator+(const Tensor<T>& a, T s) { return add_scalar(a, s); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, T s) { return add_scalar(a, -s); }
template <typename T> Tensor<T> operator-(T s, const Tensor<T>& a) { return rsub_scalar(s, a); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, T s) { return mul_scalar(a, s); }
template <typename T> Tensor<T> operator*(T s, const Tensor<T>& a) { return mul_scalar(a, s); }

// ---------------------------------------------------------------------------
// Reductions and layout.

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> sum(const Tensor<T>& a, std::size_t axis, bool keepdim);
template <typename T> Tensor<T> mean(const Tensor<T>& a, std::size_t axis, bool keepdim);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& a, std::size_t d0, std::size_t d1);

// a[..., m, p] x b[..., p, q]. b may be 2-D (shared across a's batch) or have
// batch dimensions identical to a's.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[..., in] W[out, in]^T + bias[out]; bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// Normalizes the trailing dimension, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

// Rows of table[M, D] picked by index, giving [indices.size(), D].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> indices);

// Forward value of `value`; backward routes the incoming gradient unchanged to
// `target`. Shapes must match.
template <typename T>
Tensor<T> straight_through(const Tensor<T>& value, const Tensor<T>& target);

// ---------------------------------------------------------------------------
// Convolutions. Layouts are channels-first.

struct Conv1dGeometry {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t groups = 1;

  std::size_t output_length(std::size_t input_length, std::size_t kernel) const;
};

// TF-style "same" padding: output length ceil(L / stride).
Conv1dGeometry same_padding_1d(std::size_t input_length, std::size_t kernel,
                               std::size_t stride, std::size_t dilation = 1);

// x[B, Cin, L], weight[Cout, Cin/groups, k], bias[Cout] (may be undefined).
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv1dGeometry& geom);

// Exact adjoint of conv1d with the same geometry, mapping [B, Cin, L] to
// [B, Cout, output_length]. weight[Cin, Cout, k]; groups must be 1.
// `output_length` must be consistent: geom.output_length(output_length, k) == L.
template <typename T>
Tensor<T> conv_transpose1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           const Conv1dGeometry& geom, std::size_t output_length);

struct Conv2dGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_top = 0;
  std::size_t pad_bottom = 0;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
};

Conv2dGeometry same_padding_2d(std::size_t height, std::size_t width, std::size_t kernel_h,
                               std::size_t kernel_w, std::size_t stride_h, std::size_t stride_w);

// x[B, Cin, H, W], weight[Cout, Cin, kh, kw], bias[Cout] (may be undefined).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dGeometry& geom);

// ---------------------------------------------------------------------------
// Signal framing.

// x[B, T] -> [B, frames, frame_length]; frame n starts at n*hop - pad_left and
// reads zeros outside [0, T).
template <typename T>
Tensor<T> frame_signal(const Tensor<T>& x, std::size_t frame_length, std::size_t hop,
                       std::size_t pad_left, std::size_t frames);

// Adjoint of frame_signal: frames[B, N, L] -> [B, output_length], summing
// overlapping contributions.
template <typename T>
Tensor<T> overlap_add(const Tensor<T>& frames, std::size_t hop, std::size_t pad_left,
                      std::size_t output_length);

// Magnitude of the one-sided real DFT of each trailing-axis frame:
// [..., F] -> [..., F/2 + 1], sqrt(re^2 + im^2 + kMagnitudeEpsilon).
template <typename T>
Tensor<T> rfft_magnitude(const Tensor<T>& frames);

}  // namespace mdctcodec
