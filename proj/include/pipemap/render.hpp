#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include "pipemap/grid.hpp"

// Raster emission of thickness maps: ASCII PGM/PPM (diffable, dependency
// free) or a matrix CSV. Unobserved cells render black / empty.

namespace pipemap {

enum class ColorMap { Grayscale, Thermal };
enum class RasterFormat { Pgm, Ppm, Csv };

struct RenderSpec {
  ColorMap color_map = ColorMap::Grayscale;
  std::optional<double> min_mm;  // auto scale when unset
  std::optional<double> max_mm;
  RasterFormat format = RasterFormat::Pgm;
};

// Observed min/max rounded outward to 0.5 mm, so legends stay stable
// across scan shifts of the same pipe.
inline std::pair<double, double> auto_scale(const PipeGrid& grid) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c)
      if (grid.is_observed(r, c)) {
        lo = std::min(lo, grid.at(r, c));
        hi = std::max(hi, grid.at(r, c));
      }
  if (!std::isfinite(lo)) throw std::invalid_argument("auto_scale: grid has no observed cells");
  lo = std::floor(lo / 0.5) * 0.5;
  hi = std::ceil(hi / 0.5) * 0.5;
  if (hi <= lo) hi = lo + 0.5;
  return {lo, hi};
}

namespace detail {

inline std::array<int, 3> thermal_rgb(double u) {
  // blue -> cyan -> yellow -> red
  constexpr std::array<std::array<double, 3>, 4> stops{{
      {0.0, 0.0, 255.0}, {0.0, 255.0, 255.0}, {255.0, 255.0, 0.0}, {255.0, 0.0, 0.0}}};
  u = std::clamp(u, 0.0, 1.0);
  const double pos = u * 3.0;
  const int seg = std::min(2, static_cast<int>(pos));
  const double f = pos - seg;
  std::array<int, 3> rgb{};
  for (int i = 0; i < 3; ++i)
    rgb[i] = static_cast<int>(std::lround(stops[seg][i] + f * (stops[seg + 1][i] - stops[seg][i])));
  return rgb;
}

}  // namespace detail

inline void render_grid(const PipeGrid& grid, const RenderSpec& spec,
                        const std::string& path) {
  double lo, hi;
  if (spec.min_mm && spec.max_mm) {
    lo = *spec.min_mm;
    hi = *spec.max_mm;
    if (!(lo < hi)) throw std::invalid_argument("render_grid: need min_mm < max_mm");
  } else if (!spec.min_mm && !spec.max_mm) {
    std::tie(lo, hi) = auto_scale(grid);
  } else {
    throw std::invalid_argument("render_grid: set both min_mm and max_mm, or neither");
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("render_grid: cannot open '" + path + "' for writing");

  auto level = [&](int r, int c) {
    const double u = (grid.at(r, c) - lo) / (hi - lo);
    return std::clamp(u, 0.0, 1.0);
  };

  switch (spec.format) {
    case RasterFormat::Pgm: {
      out << "P2\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
      for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
          const int v = grid.is_observed(r, c)
                            ? static_cast<int>(std::lround(255.0 * level(r, c)))
                            : 0;
          out << v << (c + 1 < grid.cols() ? ' ' : '\n');
        }
      }
      break;
    }
    case RasterFormat::Ppm: {
      out << "P3\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
      for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
          std::array<int, 3> rgb{0, 0, 0};
          if (grid.is_observed(r, c)) {
            if (spec.color_map == ColorMap::Thermal) {
              rgb = detail::thermal_rgb(level(r, c));
            } else {
              const int g = static_cast<int>(std::lround(255.0 * level(r, c)));
              rgb = {g, g, g};
            }
          }
          out << rgb[0] << ' ' << rgb[1] << ' ' << rgb[2]
              << (c + 1 < grid.cols() ? ' ' : '\n');
        }
      }
      break;
    }
    case RasterFormat::Csv: {
      for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
          if (grid.is_observed(r, c)) out << format_double(grid.at(r, c));
          out << (c + 1 < grid.cols() ? "," : "\n");
        }
      }
      break;
    }
  }
  if (!out) throw std::runtime_error("render_grid: write to '" + path + "' failed");
}

}  // namespace pipemap
