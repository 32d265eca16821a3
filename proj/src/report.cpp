#include "ezcrop/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ezcrop {

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(values.size());
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t end = k;
    while (end < idx.size() && values[idx[end]] == values[idx[k]]) ++end;
    const double shared = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t m = k; m < end; ++m) ranks[idx[m]] = shared;
    k = end;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: series differ in length");
  if (a.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  const std::vector<double> ra = fractional_ranks(a);
  const std::vector<double> rb = fractional_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const double da = ra[k] - mean;
    const double db = rb[k] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::string ranked_table(const LayerImportance& importance) {
  std::ostringstream out;
  out << "layer " << importance.layer << "  metric " << to_string(importance.metric);
  if (importance.metric == Metric::Energy) out << "  beta " << importance.beta;
  out << "  batch " << importance.batch << "\n";
  out << "  pos  channel  score\n";
  char line[96];
  for (std::size_t k = 0; k < importance.order.size(); ++k) {
    const std::size_t ch = importance.order[k];
    std::snprintf(line, sizeof line, "%5zu  %7zu  %.10f\n", k + 1, ch, importance.scores[ch - 1]);
    out << line;
  }
  return out.str();
}

void Image::set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x >= width || y >= height) return;
  const std::size_t at = (y * width + x) * 3;
  rgb[at] = r;
  rgb[at + 1] = g;
  rgb[at + 2] = b;
}

void Image::line(long x0, long y0, long x1, long y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const long dx = std::abs(x1 - x0);
  const long dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1;
  const long sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    if (x0 >= 0 && y0 >= 0) set(static_cast<std::size_t>(x0), static_cast<std::size_t>(y0), r, g, b);
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::string to_ppm(const Image& image) {
  std::ostringstream out;
  out << "P3\n" << image.width << " " << image.height << "\n255\n";
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::size_t at = (y * image.width + x) * 3;
      out << int(image.rgb[at]) << ' ' << int(image.rgb[at + 1]) << ' ' << int(image.rgb[at + 2])
          << (x + 1 == image.width ? '\n' : ' ');
    }
  }
  return out.str();
}

std::string to_pgm(const RealMatrix& map) {
  const double peak = *std::max_element(map.values().begin(), map.values().end());
  std::ostringstream out;
  out << "P2\n" << map.cols() << " " << map.rows() << "\n255\n";
  for (std::size_t r = 0; r < map.rows(); ++r) {
    for (std::size_t c = 0; c < map.cols(); ++c) {
      const double v = peak > 0.0 ? std::clamp(map(r, c) / peak, 0.0, 1.0) : 0.0;
      out << static_cast<int>(std::lround(255.0 * v)) << (c + 1 == map.cols() ? '\n' : ' ');
    }
  }
  return out.str();
}

Image comparison_chart(const LayerImportance& first, const LayerImportance& second) {
  if (first.scores.size() != second.scores.size()) {
    throw std::invalid_argument("comparison_chart: channel counts differ");
  }
  constexpr std::size_t kStep = 8;
  constexpr std::size_t kMargin = 10;
  constexpr std::size_t kPlot = 200;
  const std::size_t n = first.scores.size();
  Image img(2 * kMargin + kStep * std::max<std::size_t>(n, 1), 2 * kMargin + kPlot);

  // axes
  img.line(long(kMargin), long(kMargin), long(kMargin), long(kMargin + kPlot), 0, 0, 0);
  img.line(long(kMargin), long(kMargin + kPlot), long(img.width - kMargin), long(kMargin + kPlot), 0, 0, 0);

  auto plot = [&](const std::vector<double>& scores, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double span = *hi - *lo;
    long px = -1, py = -1;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = scores[first.order[k] - 1];
      const double t = span > 0.0 ? (v - *lo) / span : 0.5;
      const long x = long(kMargin + kStep * k + kStep / 2);
      const long y = long(kMargin + kPlot) - std::lround(t * double(kPlot));
      if (px >= 0) img.line(px, py, x, y, r, g, b);
      for (long d = -1; d <= 1; ++d) img.line(x - 1, y + d, x + 1, y + d, r, g, b);
      px = x;
      py = y;
    }
  };
  plot(first.scores, 220, 30, 30);
  plot(second.scores, 30, 60, 220);
  return img;
}

}  // namespace ezcrop
