#pragma once

#include <span>
#include <vector>

#include "ezcrop/tensor.hpp"

namespace ezcrop {

/// Largest |imag| tolerated in a spectral convolution output, relative to
/// max(1, peak |real|).
inline constexpr double kImagResidualTolerance = 1e-8;

/// Embeds every D x D slice on the H x W torus. Tap (u, v) lands at
/// ((u - c) mod H, (v - c) mod W) with c = D / 2, so the kernel centre sits at
/// the origin. D must be odd. A kernel wider than the torus wraps around, and
/// taps landing on the same cell are summed.
ExpandedKernel expand_kernel(const KernelTensor& kernel, std::size_t rows, std::size_t cols);

/// Multi-channel circular convolution through the frequency domain:
/// out[j] = sum_i ifft2(fft2(expanded(i, j)) .* fft2(x[i])).
///
/// Computes true convolution (kernel flipped relative to the input). Conv
/// layers that compute cross-correlation are reproduced by passing
/// `point_reflect(kernel)`.
///
/// Throws std::invalid_argument on shape mismatch and NumericError when the
/// imaginary residual of any output entry exceeds kImagResidualTolerance.
std::vector<RealMatrix> spectral_conv(std::span<const RealMatrix> input,
                                      const KernelTensor& kernel);

/// Same result as spectral_conv, evaluated directly in the spatial domain with
/// wrap-around indexing. O(T*S*H*W*D^2).
std::vector<RealMatrix> spatial_circular_conv(std::span<const RealMatrix> input,
                                              const KernelTensor& kernel);

/// Rotates every kernel slice by 180 degrees: K'[u, v] = K[D-1-u, D-1-v].
KernelTensor point_reflect(const KernelTensor& kernel);

/// abs(fftshift(fft2(m))): non-negative spectral magnitude with the DC bin at
/// (H/2, W/2) 0-based.
RealMatrix energy_map(const RealMatrix& m);

/// Spectral magnitude grouped by Chebyshev distance from the shifted DC bin.
struct RingEnergy {
  std::vector<double> rings;  // rings[k]: magnitude sum at distance exactly k
  double total = 0.0;         // magnitude sum over the whole spectrum
};

/// Ring sums of abs(fftshift(fft2(m))) for distances 0..max_distance, without
/// materialising the magnitude map. Equals summing energy_map(m) by ring.
RingEnergy ring_energy(const RealMatrix& m, std::size_t max_distance);

}  // namespace ezcrop
