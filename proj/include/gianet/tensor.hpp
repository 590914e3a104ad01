#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gianet {

/// NCHW extent of a dense tensor.
struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  [[nodiscard]] constexpr int64_t numel() const { return n * c * h * w; }
  [[nodiscard]] constexpr int64_t plane() const { return h * w; }
  [[nodiscard]] constexpr bool is_scalar() const { return n == 1 && c == 1 && h == 1 && w == 1; }
  [[nodiscard]] std::string str() const;

  bool operator==(const Shape&) const = default;
};

namespace detail {

struct TensorImpl;

/// One recorded operation. `backward` receives the gradient flowing into the
/// op's output and accumulates into whichever inputs take part in the graph.
struct Node {
  const char* name = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const float>)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> node;
};

/// Gradient buffer of `t`, allocated zeroed on first use; nullptr when `t`
/// does not participate in differentiation.
float* grad_of(TensorImpl& t);

}  // namespace detail

class Tensor;

/// Topologically ordered list of the nodes reachable from a loss. Every node's
/// inputs precede it; backward walks the list once in reverse.
class Tape {
 public:
  static Tape record(const Tensor& loss);

  [[nodiscard]] std::size_t size() const { return order_.size(); }
  [[nodiscard]] std::span<const detail::TensorImpl* const> order() const { return order_; }

  void run_backward(const Tensor& loss) const;

 private:
  std::vector<detail::TensorImpl*> order_;
};

/// Dense float tensor with an optional gradient slot. Copies share storage
/// (handle semantics); use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0F);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor scalar(float value);
  static Tensor leaf(Shape shape, std::vector<float> values);

  [[nodiscard]] bool defined() const { return impl_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] int64_t numel() const { return shape().numel(); }

  [[nodiscard]] std::span<float> data();
  [[nodiscard]] std::span<const float> data() const;
  [[nodiscard]] float item() const;
  [[nodiscard]] float at(int64_t n, int64_t c, int64_t h, int64_t w) const;
  float& at(int64_t n, int64_t c, int64_t h, int64_t w);

  [[nodiscard]] bool requires_grad() const;
  /// Only leaves may toggle this; recorded results inherit it from their inputs.
  Tensor& set_requires_grad(bool on);
  [[nodiscard]] bool is_leaf() const;
  [[nodiscard]] bool has_grad() const;
  [[nodiscard]] std::span<const float> grad() const;
  [[nodiscard]] std::span<float> grad_mut();
  void zero_grad();

  /// Fresh leaf holding a copy of the values, disconnected from any graph.
  [[nodiscard]] Tensor detach() const;
  [[nodiscard]] Tensor clone() const { return detach(); }

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  /// calls until zero_grad(); interior gradients are recomputed every call.
  void backward() const;

  [[nodiscard]] const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

/// Builds an op result. Records a node when grad mode is on and any input
/// takes part in differentiation; `backward` is dropped otherwise.
Tensor make_result(const char* name, Shape shape, std::vector<float> values,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(std::span<const float>)> backward);

Tensor make_result(const char* name, Shape shape, std::vector<float> values,
                   const std::vector<Tensor>& inputs,
                   std::function<void(std::span<const float>)> backward);

}  // namespace detail

}  // namespace gianet
