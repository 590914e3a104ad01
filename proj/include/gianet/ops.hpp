#pragma once

#include "gianet/tensor.hpp"

// Differentiable elementwise arithmetic and reductions. Tensor-tensor forms
// require identical shapes; the only broadcast is by a plain float scalar.

namespace gianet {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Caller guarantees `b` is nonzero everywhere.
Tensor div(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
/// Subgradient at 0 is 0.
Tensor abs(const Tensor& a);
/// max(a, lo); gradient passes only where a > lo.
Tensor clamp_min(const Tensor& a, float lo);

/// Sum of every element, as a (1,1,1,1) tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Channels [begin, end) of `a`.
Tensor slice_channels(const Tensor& a, int64_t begin, int64_t end);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, float s) { return scalar_mul(a, s); }
inline Tensor operator*(float s, const Tensor& a) { return scalar_mul(a, s); }
inline Tensor operator+(const Tensor& a, float s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace gianet
