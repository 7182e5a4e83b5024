#pragma once

#include <cmath>
#include <cstddef>

namespace lgn {

// Row softmax with temperature: out[i] = exp(w[i]/temp) / sum_j exp(w[j]/temp).
// Max-subtracted so arbitrarily low temperatures stay finite; the exp and the
// normalization run in double regardless of T. Exponents are clamped at -75:
// below that a term's share is < 1e-33 / n, which is invisible next to float
// rounding, while letting the exponent underflow for real would drag every
// low-temperature epoch through libm's errno path and subnormal arithmetic.
template <typename T>
void softmax_temperature(const T* w, size_t n, T temp, T* out) {
  double wmax = double(w[0]);
  for (size_t i = 1; i < n; ++i) wmax = std::max(wmax, double(w[i]));
  double inv_t = 1.0 / double(temp);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double z = (double(w[i]) - wmax) * inv_t;
    double e = std::exp(z < -75.0 ? -75.0 : z);
    out[i] = T(e);
    sum += e;
  }
  double inv_sum = 1.0 / sum;
  for (size_t i = 0; i < n; ++i) out[i] = T(double(out[i]) * inv_sum);
}

// Position of the largest weight; ties resolve to the lowest index. This is
// also argmax(softmax(w/T)) for every T > 0.
template <typename T>
size_t argmax_row(const T* w, size_t n) {
  size_t best = 0;
  for (size_t i = 1; i < n; ++i)
    if (w[i] > w[best]) best = i;
  return best;
}

}  // namespace lgn
