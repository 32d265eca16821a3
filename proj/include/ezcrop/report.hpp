#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ezcrop/importance.hpp"
#include "ezcrop/tensor.hpp"

namespace ezcrop {

/// Fractional ranks (1-based); tied values share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Spearman rank correlation: Pearson correlation of the fractional ranks.
/// Returns 0 when either side is constant. Sizes must match and be >= 2.
double spearman(std::span<const double> a, std::span<const double> b);

/// Fixed-width table of one layer's channels in importance order.
std::string ranked_table(const LayerImportance& importance);

/// 8-bit RGB raster, serialised as a plain-text P3 pixmap.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image(std::size_t w, std::size_t h, std::uint8_t fill = 255)
      : width(w), height(h), rgb(w * h * 3, fill) {}

  void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void line(long x0, long y0, long x1, long y1, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

std::string to_ppm(const Image& image);

/// Greyscale heatmap of a non-negative map (typically energy_map output),
/// linearly scaled so the largest entry is 255. Plain-text P2, one pixel per bin.
std::string to_pgm(const RealMatrix& map);

/// Two score series over the same channels, drawn in the first series'
/// descending order and min-max normalised per series (first red, second blue).
Image comparison_chart(const LayerImportance& first, const LayerImportance& second);

}  // namespace ezcrop
