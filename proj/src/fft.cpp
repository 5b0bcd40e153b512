#include "fsp/fft.hpp"

#include <numbers>

namespace fsp {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  require(is_power_of_two(static_cast<int>(n)), "fft size must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

CVec real_dft_half(const Vec& frame, int fft_size) {
  require(frame.size() <= fft_size, "frame longer than fft size");
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
  for (int i = 0; i < frame.size(); ++i) buf[static_cast<size_t>(i)] = frame[i];
  fft_inplace(buf);
  CVec out(fft_size / 2 + 1);
  for (int k = 0; k <= fft_size / 2; ++k) out[k] = buf[static_cast<size_t>(k)];
  return out;
}

}  // namespace fsp
