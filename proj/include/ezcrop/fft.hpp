#pragma once

#include <functional>
#include <span>

#include "ezcrop/tensor.hpp"

namespace ezcrop {

/// In-place unnormalized 1D DFT of any length. Powers of two use an iterative
/// radix-2 transform; other lengths go through Bluestein's chirp-z algorithm.
/// With `inverse` set the sign of the exponent flips, no scaling is applied.
void fft_inplace(std::span<Complex> data, bool inverse = false);

/// Unnormalized forward 2D DFT. Rejects non-finite input.
ComplexMatrix fft2(const RealMatrix& m);
ComplexMatrix fft2(const ComplexMatrix& m);

/// Forward 2D DFT of a real matrix, handed out one spectrum column at a time
/// for c = 0..W/2 only; the rest follows from F(r, c) = conj F(-r, -c).
/// visit(c, column) receives bins (0..H-1, c) in unshifted order. The column
/// storage is reused afterwards. Rejects non-finite input.
void visit_half_spectrum(const RealMatrix& m,
                         const std::function<void(std::size_t, std::span<const Complex>)>& visit);

/// abs(fftshift(fft2(m))).
RealMatrix shifted_magnitude(const RealMatrix& m);

/// Inverse 2D DFT scaled by 1/(H*W), so that ifft2(fft2(x)) == x.
ComplexMatrix ifft2(const ComplexMatrix& m);

/// Circular shift by (floor(H/2), floor(W/2)): the DC bin moves from (0, 0) to
/// (floor(H/2), floor(W/2)).
template <typename T>
Matrix<T> fftshift(const Matrix<T>& m) {
  const std::size_t h = m.rows();
  const std::size_t w = m.cols();
  const std::size_t sh = h / 2;
  const std::size_t sw = w / 2;
  Matrix<T> out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t rr = (r + sh) % h;
    for (std::size_t c = 0; c < w; ++c) out(rr, (c + sw) % w) = m(r, c);
  }
  return out;
}

/// Inverse of fftshift; identical to it when both dimensions are even.
template <typename T>
Matrix<T> ifftshift(const Matrix<T>& m) {
  const std::size_t h = m.rows();
  const std::size_t w = m.cols();
  const std::size_t sh = h / 2;
  const std::size_t sw = w / 2;
  Matrix<T> out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t rr = (r + sh) % h;
    for (std::size_t c = 0; c < w; ++c) out(r, c) = m(rr, (c + sw) % w);
  }
  return out;
}

}  // namespace ezcrop
