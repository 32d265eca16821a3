#include "ezcrop/fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace ezcrop {
namespace {

// Precomputed tables for one transform length. Power-of-two lengths use the
// bit-reversal permutation and twiddles directly; other lengths keep the
// Bluestein chirp and the spectrum of its padded convolution kernel.
struct Plan {
  std::size_t n = 0;
  std::vector<std::size_t> bitrev;
  std::vector<Complex> forward;  // exp(-2*pi*i*k/n), k < n/2
  std::vector<Complex> backward;

  std::size_t padded = 0;
  std::vector<Complex> chirp;           // exp(i*pi*k^2/n)
  std::vector<Complex> chirp_spectrum;  // fft of the padded chirp
};

std::shared_ptr<const Plan> plan_for(std::size_t n);

inline double magnitude(Complex v) noexcept {
  return std::sqrt(v.real() * v.real() + v.imag() * v.imag());
}

// Plain complex product; std::complex's operator* goes through the Annex G
// NaN/Inf recovery path, which dominates the butterfly cost.
inline Complex mul(Complex a, Complex b) noexcept {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

void build_radix2(Plan& p) {
  const std::size_t n = p.n;
  p.bitrev.resize(n);
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    p.bitrev[i] = j;
  }
  // Each angle is evaluated directly so the table carries no accumulated error.
  p.forward.resize(n / 2);
  p.backward.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    p.forward[k] = {std::cos(angle), std::sin(angle)};
    p.backward[k] = std::conj(p.forward[k]);
  }
}

void radix2(const Plan& p, std::span<Complex> a, bool inverse) {
  const std::size_t n = p.n;
  for (std::size_t i = 1; i < n; ++i) {
    if (i < p.bitrev[i]) std::swap(a[i], a[p.bitrev[i]]);
  }
  const std::vector<Complex>& w = inverse ? p.backward : p.forward;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      Complex* lo = a.data() + start;
      Complex* hi = lo + half;
      for (std::size_t k = 0; k < half; ++k) {
        const Complex t = mul(w[k * stride], hi[k]);
        hi[k] = lo[k] - t;
        lo[k] += t;
      }
    }
  }
}

// Bluestein: X[k] = conj(c[k]) * sum_j (x[j] conj(c[j])) c[k - j] with the
// chirp c[k] = exp(i*pi*k^2/n), evaluated as a power-of-two cyclic convolution.
void build_bluestein(Plan& p) {
  const std::size_t n = p.n;
  p.padded = std::bit_ceil(2 * n - 1);
  p.chirp.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small and exact.
    const std::size_t k2 = (k * k) % (2 * n);
    const double angle = std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    p.chirp[k] = {std::cos(angle), std::sin(angle)};
  }
  p.chirp_spectrum.assign(p.padded, Complex{});
  p.chirp_spectrum[0] = p.chirp[0];
  for (std::size_t k = 1; k < n; ++k) {
    p.chirp_spectrum[k] = p.chirp[k];
    p.chirp_spectrum[p.padded - k] = p.chirp[k];
  }
  radix2(*plan_for(p.padded), p.chirp_spectrum, false);
}

void bluestein(const Plan& p, std::span<Complex> a, bool inverse) {
  const std::size_t n = p.n;
  const std::size_t m = p.padded;
  const Plan& inner = *plan_for(m);

  // The inverse transform is the forward one on conjugated data.
  std::vector<Complex> x(m);
  for (std::size_t k = 0; k < n; ++k) {
    const Complex v = inverse ? std::conj(a[k]) : a[k];
    x[k] = mul(v, std::conj(p.chirp[k]));
  }
  radix2(inner, x, false);
  for (std::size_t k = 0; k < m; ++k) x[k] = mul(x[k], p.chirp_spectrum[k]);
  radix2(inner, x, true);

  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) {
    const Complex v = mul(x[k] * scale, std::conj(p.chirp[k]));
    a[k] = inverse ? std::conj(v) : v;
  }
}

std::shared_ptr<const Plan> plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::unordered_map<std::size_t, std::shared_ptr<const Plan>> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
  }
  auto p = std::make_shared<Plan>();
  p->n = n;
  if (std::has_single_bit(n)) {
    build_radix2(*p);
  } else {
    build_bluestein(*p);
  }
  std::lock_guard lock(mutex);
  return cache.emplace(n, std::move(p)).first->second;
}

void run(const Plan& p, std::span<Complex> data, bool inverse) {
  if (p.n <= 1) return;
  if (p.padded == 0) {
    radix2(p, data, inverse);
  } else {
    bluestein(p, data, inverse);
  }
}

constexpr std::size_t kTile = 32;

// Cache-blocked out-of-place transpose of an h x w row-major buffer.
void transpose(std::span<const Complex> src, std::span<Complex> dst, std::size_t h, std::size_t w) {
  for (std::size_t r0 = 0; r0 < h; r0 += kTile) {
    const std::size_t r1 = std::min(r0 + kTile, h);
    for (std::size_t c0 = 0; c0 < w; c0 += kTile) {
      const std::size_t c1 = std::min(c0 + kTile, w);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * h + r] = src[r * w + c];
      }
    }
  }
}

// Row transforms in place, then column transforms on a transposed copy.
// Returns the spectrum in column-major order (a W x H matrix).
ComplexMatrix transform_to_transposed(ComplexMatrix m, bool inverse) {
  const std::size_t h = m.rows();
  const std::size_t w = m.cols();
  const auto row_plan = plan_for(w);
  const auto col_plan = plan_for(h);
  for (std::size_t r = 0; r < h; ++r) run(*row_plan, m.row(r), inverse);

  ComplexMatrix t(w, h);
  transpose(m.values(), t.values(), h, w);
  for (std::size_t c = 0; c < w; ++c) run(*col_plan, t.row(c), inverse);
  return t;
}

ComplexMatrix transform2(ComplexMatrix m, bool inverse) {
  const std::size_t h = m.rows();
  const std::size_t w = m.cols();
  const ComplexMatrix t = transform_to_transposed(std::move(m), inverse);
  ComplexMatrix out(h, w);
  transpose(t.values(), out.values(), w, h);
  return out;
}

ComplexMatrix to_complex(const RealMatrix& m) {
  if (!all_finite(m)) throw std::invalid_argument("fft2: input contains non-finite values");
  ComplexMatrix z(m.rows(), m.cols());
  auto src = m.values();
  auto dst = z.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k];
  return z;
}

}  // namespace

void fft_inplace(std::span<Complex> data, bool inverse) {
  if (data.size() <= 1) return;
  run(*plan_for(data.size()), data, inverse);
}

ComplexMatrix fft2(const RealMatrix& m) { return transform2(to_complex(m), false); }

void visit_half_spectrum(const RealMatrix& m,
                         const std::function<void(std::size_t, std::span<const Complex>)>& visit) {
  if (!all_finite(m)) throw std::invalid_argument("fft2: input contains non-finite values");
  const std::size_t h = m.rows();
  const std::size_t w = m.cols();
  const std::size_t half = w / 2 + 1;
  const auto row_plan = plan_for(w);
  const auto col_plan = plan_for(h);

  // Per-thread scratch: repeated calls on large maps would otherwise pay for
  // fresh multi-megabyte allocations every time.
  thread_local std::vector<Complex> packed;
  thread_local std::vector<Complex> block;
  thread_local std::vector<Complex> spectrum;
  packed.resize(w);
  block.resize(kTile * half);
  spectrum.resize(h * half);

  // Two real rows ride in one complex transform as z = x + i*y; then
  // X[k] = (Z[k] + conj Z[-k]) / 2 and Y[k] = (Z[k] - conj Z[-k]) / (2i).
  for (std::size_t r0 = 0; r0 < h; r0 += kTile) {
    const std::size_t rows = std::min(kTile, h - r0);
    for (std::size_t k = 0; k < rows; k += 2) {
      const auto x = m.row(r0 + k);
      if (k + 1 < rows) {
        const auto y = m.row(r0 + k + 1);
        for (std::size_t c = 0; c < w; ++c) packed[c] = {x[c], y[c]};
      } else {
        for (std::size_t c = 0; c < w; ++c) packed[c] = {x[c], 0.0};
      }
      run(*row_plan, packed, false);
      Complex* first = block.data() + k * half;
      Complex* second = first + half;
      for (std::size_t c = 0; c < half; ++c) {
        const Complex a = packed[c];
        const Complex b = std::conj(packed[(w - c) % w]);
        first[c] = {0.5 * (a.real() + b.real()), 0.5 * (a.imag() + b.imag())};
        if (k + 1 < rows) second[c] = {0.5 * (a.imag() - b.imag()), -0.5 * (a.real() - b.real())};
      }
    }
    for (std::size_t c = 0; c < half; ++c) {
      Complex* col = spectrum.data() + c * h + r0;
      for (std::size_t k = 0; k < rows; ++k) col[k] = block[k * half + c];
    }
  }

  for (std::size_t c = 0; c < half; ++c) {
    const std::span<Complex> col(spectrum.data() + c * h, h);
    run(*col_plan, col, false);
    visit(c, col);
  }
}

RealMatrix shifted_magnitude(const RealMatrix& m) {
  const std::size_t h = m.rows();
  const std::size_t w = m.cols();
  RealMatrix out(h, w);
  // Bin (r, c) lands at ((r + h/2) % h, (c + w/2) % w); its mirror
  // (-r, -c) carries the same magnitude.
  visit_half_spectrum(m, [&](std::size_t c, std::span<const Complex> col) {
    const std::size_t cc = (c + w / 2) % w;
    const std::size_t mc = (w - c + w / 2) % w;
    for (std::size_t r = 0; r < h; ++r) {
      const double mag = magnitude(col[r]);
      out((r + h / 2) % h, cc) = mag;
      out(((h - r) % h + h / 2) % h, mc) = mag;
    }
  });
  return out;
}

ComplexMatrix fft2(const ComplexMatrix& m) {
  for (const Complex& v : m.values()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw std::invalid_argument("fft2: input contains non-finite values");
    }
  }
  return transform2(m, false);
}

ComplexMatrix ifft2(const ComplexMatrix& m) {
  ComplexMatrix out = transform2(m, true);
  const double scale = 1.0 / static_cast<double>(m.size());
  for (Complex& v : out.values()) v *= scale;
  return out;
}

}  // namespace ezcrop
