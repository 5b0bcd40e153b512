#ifndef FSP_FFT_HPP
#define FSP_FFT_HPP

#include <complex>
#include <vector>

#include "fsp/common.hpp"

namespace fsp {

// In-place radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

// DFT of a real frame zero-padded to fft_size, bins 0..fft_size/2.
CVec real_dft_half(const Vec& frame, int fft_size);

bool is_power_of_two(int n);

}  // namespace fsp

#endif
