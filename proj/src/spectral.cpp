#include "ezcrop/spectral.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "ezcrop/error.hpp"
#include "ezcrop/fft.hpp"

namespace ezcrop {
namespace {

void check_conv_inputs(std::span<const RealMatrix> input, const KernelTensor& kernel) {
  if (input.empty()) throw std::invalid_argument("convolution input has no channels");
  if (input.size() != kernel.in_channels()) {
    throw std::invalid_argument("input has " + std::to_string(input.size()) +
                                " channels, kernel expects " +
                                std::to_string(kernel.in_channels()));
  }
  for (const RealMatrix& channel : input) {
    if (!channel.same_shape(input.front())) {
      throw std::invalid_argument("input channels differ in shape");
    }
  }
}

}  // namespace

ExpandedKernel expand_kernel(const KernelTensor& kernel, std::size_t rows, std::size_t cols) {
  const std::size_t d = kernel.size();
  if (d % 2 == 0) throw std::invalid_argument("even kernel sizes have no unique centre");
  if (rows == 0 || cols == 0) throw std::invalid_argument("expand_kernel: empty torus");

  // Kernels wider than the torus wrap onto it; taps sharing a cell add up.
  const std::size_t c = d / 2;
  ExpandedKernel out{rows, cols, kernel.in_channels(), kernel.out_channels(), {}};
  out.slices.reserve(out.in_channels * out.out_channels);
  for (std::size_t i = 0; i < out.in_channels; ++i) {
    for (std::size_t j = 0; j < out.out_channels; ++j) {
      RealMatrix slice(rows, cols);
      for (std::size_t u = 0; u < d; ++u) {
        const std::size_t r = (u % rows + rows - c % rows) % rows;
        for (std::size_t v = 0; v < d; ++v) {
          slice(r, (v % cols + cols - c % cols) % cols) += kernel.at(u, v, i, j);
        }
      }
      out.slices.push_back(std::move(slice));
    }
  }
  return out;
}

std::vector<RealMatrix> spectral_conv(std::span<const RealMatrix> input,
                                      const KernelTensor& kernel) {
  check_conv_inputs(input, kernel);
  const std::size_t h = input.front().rows();
  const std::size_t w = input.front().cols();
  const ExpandedKernel expanded = expand_kernel(kernel, h, w);

  std::vector<ComplexMatrix> input_spectra;
  input_spectra.reserve(input.size());
  for (const RealMatrix& channel : input) input_spectra.push_back(fft2(channel));

  std::vector<RealMatrix> output;
  output.reserve(kernel.out_channels());
  for (std::size_t j = 0; j < kernel.out_channels(); ++j) {
    // The inverse transform is linear, so the channel sum is taken in the
    // frequency domain and inverted once.
    ComplexMatrix acc(h, w);
    for (std::size_t i = 0; i < kernel.in_channels(); ++i) {
      const ComplexMatrix k_hat = fft2(expanded.slice(i, j));
      auto a = acc.values();
      auto kv = k_hat.values();
      auto xv = input_spectra[i].values();
      for (std::size_t n = 0; n < a.size(); ++n) a[n] += kv[n] * xv[n];
    }
    const ComplexMatrix spatial = ifft2(acc);

    double peak = 1.0;
    double worst = 0.0;
    RealMatrix y(h, w);
    auto yv = y.values();
    auto sv = spatial.values();
    for (std::size_t n = 0; n < yv.size(); ++n) {
      yv[n] = sv[n].real();
      peak = std::max(peak, std::abs(yv[n]));
      worst = std::max(worst, std::abs(sv[n].imag()));
    }
    if (worst > kImagResidualTolerance * peak) {
      throw NumericError("spectral_conv: imaginary residual " + std::to_string(worst) +
                         " on output channel " + std::to_string(j));
    }
    output.push_back(std::move(y));
  }
  return output;
}

std::vector<RealMatrix> spatial_circular_conv(std::span<const RealMatrix> input,
                                              const KernelTensor& kernel) {
  check_conv_inputs(input, kernel);
  if (kernel.size() % 2 == 0) throw std::invalid_argument("even kernel sizes have no unique centre");
  const std::size_t h = input.front().rows();
  const std::size_t w = input.front().cols();
  const std::size_t d = kernel.size();
  const std::size_t c = d / 2;

  std::vector<RealMatrix> output(kernel.out_channels(), RealMatrix(h, w));
  for (std::size_t j = 0; j < kernel.out_channels(); ++j) {
    RealMatrix& y = output[j];
    for (std::size_t i = 0; i < kernel.in_channels(); ++i) {
      const RealMatrix& x = input[i];
      for (std::size_t p = 0; p < h; ++p) {
        for (std::size_t q = 0; q < w; ++q) {
          double sum = 0.0;
          for (std::size_t u = 0; u < d; ++u) {
            // x[p - (u - c)] with wrap-around
            const std::size_t r = (p + c % h + h - u % h) % h;
            for (std::size_t v = 0; v < d; ++v) {
              sum += kernel.at(u, v, i, j) * x(r, (q + c % w + w - v % w) % w);
            }
          }
          y(p, q) += sum;
        }
      }
    }
  }
  return output;
}

KernelTensor point_reflect(const KernelTensor& kernel) {
  const std::size_t d = kernel.size();
  KernelTensor out(d, kernel.in_channels(), kernel.out_channels());
  for (std::size_t u = 0; u < d; ++u) {
    for (std::size_t v = 0; v < d; ++v) {
      for (std::size_t i = 0; i < kernel.in_channels(); ++i) {
        for (std::size_t j = 0; j < kernel.out_channels(); ++j) {
          out.at(u, v, i, j) = kernel.at(d - 1 - u, d - 1 - v, i, j);
        }
      }
    }
  }
  return out;
}

RealMatrix energy_map(const RealMatrix& m) { return shifted_magnitude(m); }

RingEnergy ring_energy(const RealMatrix& m, std::size_t max_distance) {
  const std::size_t h = m.rows();
  const std::size_t w = m.cols();
  // Distance of unshifted index k from the shifted centre n/2.
  auto distances = [](std::size_t n) {
    std::vector<std::size_t> d(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t pos = (k + n / 2) % n;
      d[k] = pos > n / 2 ? pos - n / 2 : n / 2 - pos;
    }
    return d;
  };
  const auto row_dist = distances(h);
  const auto col_dist = distances(w);

  RingEnergy out;
  out.rings.assign(max_distance + 1, 0.0);
  visit_half_spectrum(m, [&](std::size_t c, std::span<const Complex> col) {
    // Columns other than 0 and W/2 stand in for their mirror as well, which
    // sits on the same rings.
    const double weight = (c == 0 || 2 * c == w) ? 1.0 : 2.0;
    const std::size_t dc = col_dist[c];
    double column_total = 0.0;
    for (std::size_t r = 0; r < h; ++r) {
      const double mag = std::sqrt(col[r].real() * col[r].real() + col[r].imag() * col[r].imag());
      column_total += mag;
      const std::size_t ring = std::max(dc, row_dist[r]);
      if (ring <= max_distance) out.rings[ring] += weight * mag;
    }
    out.total += weight * column_total;
  });
  return out;
}

}  // namespace ezcrop
