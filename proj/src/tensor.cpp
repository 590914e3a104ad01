#include "gianet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "gianet/error.hpp"

namespace gianet {

namespace {

thread_local bool t_grad_enabled = true;

void check_shape(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw ShapeError("negative tensor dimension in " + s.str());
  }
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

namespace detail {

float* grad_of(TensorImpl& t) {
  if (!t.requires_grad) {
    return nullptr;
  }
  if (t.grad.size() != t.data.size()) {
    t.grad.assign(t.data.size(), 0.0F);
  }
  return t.grad.data();
}

namespace {

Tensor finish(const char* name, Shape shape, std::vector<float> values, std::span<const Tensor> inputs,
              std::function<void(std::span<const float>)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  if (static_cast<int64_t>(impl->data.size()) != shape.numel()) {
    throw ShapeError(std::string(name) + ": result buffer does not match shape " + shape.str());
  }
  const bool record =
      grad_enabled() && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (record) {
    auto node = std::make_shared<Node>();
    node->name = name;
    for (const auto& t : inputs) {
      node->inputs.push_back(t.impl());
    }
    node->backward = std::move(backward);
    impl->node = std::move(node);
    impl->requires_grad = true;
  }
  return Tensor::wrap(std::move(impl));
}

}  // namespace

Tensor make_result(const char* name, Shape shape, std::vector<float> values, std::initializer_list<Tensor> inputs,
                   std::function<void(std::span<const float>)> backward) {
  return finish(name, shape, std::move(values), std::span<const Tensor>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Tensor make_result(const char* name, Shape shape, std::vector<float> values, const std::vector<Tensor>& inputs,
                   std::function<void(std::span<const float>)> backward) {
  return finish(name, shape, std::move(values), std::span<const Tensor>(inputs), std::move(backward));
}

}  // namespace detail

Tape Tape::record(const Tensor& loss) {
  Tape tape;
  if (!loss.defined()) {
    return tape;
  }
  // Iterative post-order DFS: a node is emitted after all of its inputs.
  std::unordered_set<const detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  seen.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    if (t->node && next < t->node->inputs.size()) {
      detail::TensorImpl* child = t->node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    tape.order_.push_back(t);
    stack.pop_back();
  }
  return tape;
}

void Tape::run_backward(const Tensor& loss) const {
  if (!loss.shape().is_scalar()) {
    throw ShapeError("backward() needs a scalar (1,1,1,1) loss, got " + loss.shape().str());
  }
  if (!loss.requires_grad()) {
    throw ShapeError("backward() on a tensor that does not require grad");
  }
  auto* root = loss.impl().get();
  // Interior gradients are per-sweep scratch.
  for (auto* t : order_) {
    if (t->node) {
      t->grad.assign(t->data.size(), 0.0F);
    }
  }
  detail::grad_of(*root)[0] += 1.0F;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto* t = *it;
    if (t->node && t->node->backward) {
      t->node->backward(t->grad);
    }
  }
  for (auto* t : order_) {
    if (t->node) {
      t->grad.clear();
      t->grad.shrink_to_fit();
    }
  }
}

Tensor::Tensor(Shape shape, float fill) {
  check_shape(shape);
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = shape;
  impl_->data.assign(static_cast<std::size_t>(shape.numel()), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values) {
  check_shape(shape);
  if (static_cast<int64_t>(values.size()) != shape.numel()) {
    throw ShapeError("tensor of shape " + shape.str() + " needs " + std::to_string(shape.numel()) + " values, got " +
                     std::to_string(values.size()));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = shape;
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{1, 1, 1, 1}, value); }

Tensor Tensor::leaf(Shape shape, std::vector<float> values) {
  Tensor t(shape, std::move(values));
  t.set_requires_grad(true);
  return t;
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

const Shape& Tensor::shape() const {
  static const Shape empty{};
  return impl_ ? impl_->shape : empty;
}

std::span<float> Tensor::data() { return impl_ ? std::span<float>(impl_->data) : std::span<float>(); }

std::span<const float> Tensor::data() const {
  return impl_ ? std::span<const float>(impl_->data) : std::span<const float>();
}

float Tensor::item() const {
  if (!impl_ || impl_->data.size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape().str());
  }
  return impl_->data[0];
}

float Tensor::at(int64_t n, int64_t c, int64_t h, int64_t w) const {
  const Shape& s = impl_->shape;
  return impl_->data[static_cast<std::size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

float& Tensor::at(int64_t n, int64_t c, int64_t h, int64_t w) {
  const Shape& s = impl_->shape;
  return impl_->data[static_cast<std::size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!impl_) {
    throw ShapeError("set_requires_grad on an undefined tensor");
  }
  if (impl_->node) {
    throw ShapeError("set_requires_grad is only valid on leaf tensors");
  }
  impl_->requires_grad = on;
  if (!on) {
    impl_->grad.clear();
  }
  return *this;
}

bool Tensor::is_leaf() const { return impl_ && !impl_->node; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  return impl_ ? std::span<const float>(impl_->grad) : std::span<const float>();
}

std::span<float> Tensor::grad_mut() {
  float* g = impl_ ? detail::grad_of(*impl_) : nullptr;
  return g ? std::span<float>(g, impl_->data.size()) : std::span<float>();
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0F);
  }
}

Tensor Tensor::detach() const {
  if (!impl_) {
    return {};
  }
  return Tensor(impl_->shape, impl_->data);
}

void Tensor::backward() const { Tape::record(*this).run_backward(*this); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace gianet
