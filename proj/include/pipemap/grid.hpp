#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pipemap/util.hpp"

// Pipe-surface thickness maps: rectangular lattice over (circumferential,
// longitudinal) cell indices with an observation mask, plus CSV ingestion,
// scan-pattern masking and a synthetic ground-truth generator.

namespace pipemap {

inline constexpr double kDefaultSensorPitchMm = 50.0;
inline constexpr double kDefaultMaxThicknessMm = 30.0;

struct PipeGeometry {
  double diameter_mm = 0.0;
  double length_mm = 0.0;
  double sensor_pitch_mm = kDefaultSensorPitchMm;
  int n_circ = 0;  // cells around the circumference
  int n_long = 0;  // cells along the axis

  // Geometry consistent with an n_circ x n_long lattice: the diameter is
  // chosen so the cells tile the circumference exactly.
  static PipeGeometry from_grid(int n_circ, int n_long,
                                double pitch_mm = kDefaultSensorPitchMm) {
    PipeGeometry g;
    g.n_circ = n_circ;
    g.n_long = n_long;
    g.sensor_pitch_mm = pitch_mm;
    g.diameter_mm = static_cast<double>(n_circ) * pitch_mm / std::numbers::pi;
    g.length_mm = static_cast<double>(n_long) * pitch_mm;
    g.validate();
    return g;
  }

  double circumference_mm() const { return static_cast<double>(n_circ) * sensor_pitch_mm; }

  // Centroid of a cell, in mm: (circumferential arc position, axial position).
  std::pair<double, double> cell_center(int row, int col) const {
    return {(row + 0.5) * sensor_pitch_mm, (col + 0.5) * sensor_pitch_mm};
  }

  void validate() const {
    if (!(diameter_mm > 0.0) || !(length_mm > 0.0) || !(sensor_pitch_mm > 0.0))
      throw std::invalid_argument("PipeGeometry: dimensions must be positive");
    if (n_circ <= 0 || n_long <= 0)
      throw std::invalid_argument("PipeGeometry: grid dimensions must be positive");
    const double circ = std::numbers::pi * diameter_mm;
    if (std::abs(n_circ * sensor_pitch_mm - circ) > sensor_pitch_mm)
      throw std::invalid_argument(
          "PipeGeometry: n_circ * pitch must match the circumference within one cell");
    if (n_long * sensor_pitch_mm > length_mm + sensor_pitch_mm)
      throw std::invalid_argument("PipeGeometry: n_long * pitch exceeds pipe length");
  }
};

class PipeGrid {
 public:
  explicit PipeGrid(PipeGeometry geometry)
      : geom_(std::move(geometry)),
        thickness_(static_cast<std::size_t>(geom_.n_circ) * geom_.n_long,
                   std::numeric_limits<double>::quiet_NaN()),
        observed_(static_cast<std::size_t>(geom_.n_circ) * geom_.n_long, 0) {
    geom_.validate();
  }

  const PipeGeometry& geometry() const { return geom_; }
  int rows() const { return geom_.n_circ; }
  int cols() const { return geom_.n_long; }

  bool is_observed(int row, int col) const { return observed_[index(row, col)] != 0; }

  double at(int row, int col) const {
    const auto i = index(row, col);
    if (!observed_[i])
      throw std::out_of_range("PipeGrid: cell (" + std::to_string(row) + "," +
                              std::to_string(col) + ") is unobserved");
    return thickness_[i];
  }

  void set(int row, int col, double thickness_mm) {
    if (!std::isfinite(thickness_mm) || thickness_mm < 0.0)
      throw std::invalid_argument("PipeGrid: thickness must be finite and nonnegative");
    const auto i = index(row, col);
    thickness_[i] = thickness_mm;
    observed_[i] = 1;
  }

  void clear(int row, int col) {
    const auto i = index(row, col);
    thickness_[i] = std::numeric_limits<double>::quiet_NaN();
    observed_[i] = 0;
  }

  std::size_t observed_count() const {
    std::size_t n = 0;
    for (auto o : observed_) n += o;
    return n;
  }

  bool fully_observed() const { return observed_count() == observed_.size(); }

  std::vector<double> observed_values() const {
    std::vector<double> v;
    v.reserve(observed_count());
    for (std::size_t i = 0; i < thickness_.size(); ++i)
      if (observed_[i]) v.push_back(thickness_[i]);
    return v;
  }

  // Row-major list of observed (row, col) cells.
  std::vector<std::pair<int, int>> observed_cells() const {
    std::vector<std::pair<int, int>> cells;
    cells.reserve(observed_count());
    for (int r = 0; r < rows(); ++r)
      for (int c = 0; c < cols(); ++c)
        if (observed_[index(r, c)]) cells.emplace_back(r, c);
    return cells;
  }

 private:
  std::size_t index(int row, int col) const {
    if (row < 0 || row >= geom_.n_circ || col < 0 || col >= geom_.n_long)
      throw std::out_of_range("PipeGrid: cell (" + std::to_string(row) + "," +
                              std::to_string(col) + ") outside " +
                              std::to_string(geom_.n_circ) + "x" +
                              std::to_string(geom_.n_long) + " grid");
    return static_cast<std::size_t>(row) * geom_.n_long + col;
  }

  PipeGeometry geom_;
  std::vector<double> thickness_;
  std::vector<std::uint8_t> observed_;
};

// One robot run: a set of circumferential rows covered by the sensor arms,
// rotated by `shift` rows.
struct ScanPattern {
  std::vector<int> sensor_lines;
  int shift = 0;

  static ScanPattern evenly_spaced(int n_lines, int n_circ, int shift = 0) {
    if (n_lines <= 0 || n_lines > n_circ)
      throw std::invalid_argument("ScanPattern: need 1 <= n_lines <= n_circ");
    ScanPattern p;
    p.shift = shift;
    p.sensor_lines.reserve(n_lines);
    for (int i = 0; i < n_lines; ++i)
      p.sensor_lines.push_back(static_cast<int>(
          (static_cast<long>(i) * n_circ) / n_lines));
    return p;
  }

  // Rotated row indices, validated against the grid height.
  std::vector<int> rows_covered(int n_circ) const {
    std::vector<int> rows;
    rows.reserve(sensor_lines.size());
    std::set<int> seen;
    for (int line : sensor_lines) {
      if (line < 0 || line >= n_circ)
        throw std::invalid_argument("ScanPattern: sensor line " + std::to_string(line) +
                                    " outside [0, " + std::to_string(n_circ) + ")");
      if (!seen.insert(line).second)
        throw std::invalid_argument("ScanPattern: duplicate sensor line " +
                                    std::to_string(line));
      int r = (line + shift) % n_circ;
      if (r < 0) r += n_circ;
      rows.push_back(r);
    }
    return rows;
  }
};

// Restrict a fully observed grid (ground truth) to the rows of one scan run.
inline PipeGrid apply_scan(const PipeGrid& grid, const ScanPattern& pattern) {
  if (!grid.fully_observed())
    throw std::invalid_argument("apply_scan: input grid must be fully observed");
  PipeGrid out(grid.geometry());
  for (int r : pattern.rows_covered(grid.rows()))
    for (int c = 0; c < grid.cols(); ++c) out.set(r, c, grid.at(r, c));
  return out;
}

struct SyntheticSpec {
  PipeGeometry geometry;
  double nominal_thickness_mm = 12.0;
  int patch_count = 0;
  std::pair<double, double> patch_depth_range_mm{1.0, 5.0};
  std::pair<double, double> patch_radius_range_mm{50.0, 150.0};
  double smooth_noise_sd_mm = 0.0;
  std::pair<double, double> correlation_length_mm{100.0, 100.0};
  std::uint64_t rng_seed = 0;

  void validate() const {
    geometry.validate();
    if (!(nominal_thickness_mm > 0.0))
      throw std::invalid_argument("SyntheticSpec: nominal thickness must be positive");
    if (patch_count < 0)
      throw std::invalid_argument("SyntheticSpec: patch_count must be nonnegative");
    if (patch_depth_range_mm.second < patch_depth_range_mm.first ||
        patch_radius_range_mm.second < patch_radius_range_mm.first)
      throw std::invalid_argument("SyntheticSpec: range hi must be >= lo");
    if (patch_count > 0 && !(patch_depth_range_mm.first >= 0.0 &&
                             patch_depth_range_mm.second < nominal_thickness_mm))
      throw std::invalid_argument(
          "SyntheticSpec: patch depths must lie in [0, nominal thickness)");
    if (patch_count > 0 && !(patch_radius_range_mm.first > 0.0))
      throw std::invalid_argument("SyntheticSpec: patch radii must be positive");
    if (smooth_noise_sd_mm < 0.0)
      throw std::invalid_argument("SyntheticSpec: noise sd must be nonnegative");
    if (!(correlation_length_mm.first > 0.0 && correlation_length_mm.second > 0.0))
      throw std::invalid_argument("SyntheticSpec: correlation lengths must be positive");
  }

  static SyntheticSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// A corrosion pit: truncated Gaussian depression centred anywhere on the
// (periodic) surface.
struct Pit {
  double circ_mm = 0.0;
  double long_mm = 0.0;
  double depth_mm = 0.0;
  double radius_mm = 0.0;
};

// Depth removed by `pit` at the centroid of cell (row, col). Circumferential
// distance wraps around the cylinder; the bump is truncated at its radius.
inline double pit_depression(const PipeGeometry& geom, const Pit& pit, int row, int col) {
  const auto [cx, cy] = geom.cell_center(row, col);
  double dx = std::abs(cx - pit.circ_mm);
  dx = std::min(dx, geom.circumference_mm() - dx);
  const double dy = cy - pit.long_mm;
  const double d2 = dx * dx + dy * dy;
  if (d2 > pit.radius_mm * pit.radius_mm) return 0.0;
  const double s = pit.radius_mm / 3.0;
  return pit.depth_mm * std::exp(-0.5 * d2 / (s * s));
}

namespace detail {

// Correlated unit-variance field: white noise blurred by a separable
// Gaussian kernel, wrapped circumferentially and truncated axially.
// Each stage divides by the l2 norm of its weights so the marginal
// variance stays exactly 1.
inline std::vector<double> correlated_field(const PipeGeometry& geom,
                                            std::pair<double, double> corr_mm,
                                            std::mt19937_64& rng) {
  const int R = geom.n_circ, C = geom.n_long;
  std::vector<double> field(static_cast<std::size_t>(R) * C);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : field) v = gauss(rng);

  auto make_kernel = [](double sigma_cells) {
    const int h = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_cells)));
    std::vector<double> w(2 * h + 1);
    for (int j = -h; j <= h; ++j)
      w[j + h] = std::exp(-0.5 * j * j / (sigma_cells * sigma_cells));
    return w;
  };

  // circumferential pass (wrapped)
  {
    const double sigma = corr_mm.first / geom.sensor_pitch_mm;
    const auto w = make_kernel(sigma);
    const int h = (static_cast<int>(w.size()) - 1) / 2;
    double norm2 = 0.0;
    for (double x : w) norm2 += x * x;
    const double inv_norm = 1.0 / std::sqrt(norm2);
    std::vector<double> out(field.size());
    for (int c = 0; c < C; ++c)
      for (int r = 0; r < R; ++r) {
        double acc = 0.0;
        for (int j = -h; j <= h; ++j) {
          int rr = (r + j) % R;
          if (rr < 0) rr += R;
          acc += w[j + h] * field[static_cast<std::size_t>(rr) * C + c];
        }
        out[static_cast<std::size_t>(r) * C + c] = acc * inv_norm;
      }
    field = std::move(out);
  }

  // axial pass (truncated at the ends, renormalized per position)
  {
    const double sigma = corr_mm.second / geom.sensor_pitch_mm;
    const auto w = make_kernel(sigma);
    const int h = (static_cast<int>(w.size()) - 1) / 2;
    std::vector<double> out(field.size());
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) {
        double acc = 0.0, norm2 = 0.0;
        for (int j = -h; j <= h; ++j) {
          const int cc = c + j;
          if (cc < 0 || cc >= C) continue;
          acc += w[j + h] * field[static_cast<std::size_t>(r) * C + cc];
          norm2 += w[j + h] * w[j + h];
        }
        out[static_cast<std::size_t>(r) * C + c] = acc / std::sqrt(norm2);
      }
    field = std::move(out);
  }
  return field;
}

}  // namespace detail

// Fully observed ground-truth grid: nominal wall minus randomized pit
// depressions plus spatially correlated noise, clamped to (0, nominal].
// The noisy surface is centred 3.5 sd below nominal so the upper clamp
// stays inactive and the marginal stays continuous.
inline PipeGrid generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto& geom = spec.geometry;
  std::mt19937_64 rng(spec.rng_seed);

  std::vector<Pit> pits;
  pits.reserve(spec.patch_count);
  std::uniform_real_distribution<double> u_circ(0.0, geom.circumference_mm());
  std::uniform_real_distribution<double> u_long(0.0, geom.length_mm);
  std::uniform_real_distribution<double> u_depth(spec.patch_depth_range_mm.first,
                                                 spec.patch_depth_range_mm.second);
  std::uniform_real_distribution<double> u_radius(spec.patch_radius_range_mm.first,
                                                  spec.patch_radius_range_mm.second);
  for (int k = 0; k < spec.patch_count; ++k) {
    Pit p;
    p.circ_mm = u_circ(rng);
    p.long_mm = u_long(rng);
    p.depth_mm = u_depth(rng);
    p.radius_mm = u_radius(rng);
    pits.push_back(p);
  }

  std::vector<double> noise;
  if (spec.smooth_noise_sd_mm > 0.0)
    noise = detail::correlated_field(geom, spec.correlation_length_mm, rng);

  const double base = spec.nominal_thickness_mm -
                      (spec.smooth_noise_sd_mm > 0.0 ? 3.5 * spec.smooth_noise_sd_mm : 0.0);
  constexpr double kFloorMm = 1e-3;

  PipeGrid grid(geom);
  for (int r = 0; r < geom.n_circ; ++r)
    for (int c = 0; c < geom.n_long; ++c) {
      double t = base;
      for (const auto& p : pits) t -= pit_depression(geom, p, r, c);
      if (!noise.empty())
        t += spec.smooth_noise_sd_mm * noise[static_cast<std::size_t>(r) * geom.n_long + c];
      t = std::clamp(t, kFloorMm, spec.nominal_thickness_mm);
      grid.set(r, c, t);
    }
  return grid;
}

// Mask selecting the cells NOT observed in `grid` (the cells to score).
inline std::vector<std::uint8_t> unscanned_mask(const PipeGrid& grid) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.rows()) * grid.cols());
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c)
      mask[static_cast<std::size_t>(r) * grid.cols() + c] = grid.is_observed(r, c) ? 0 : 1;
  return mask;
}

inline double rmse(const PipeGrid& predicted, const PipeGrid& truth,
                   const std::vector<std::uint8_t>& mask) {
  const auto& ga = predicted.geometry();
  const auto& gb = truth.geometry();
  if (ga.n_circ != gb.n_circ || ga.n_long != gb.n_long)
    throw std::invalid_argument("rmse: grids have different dimensions");
  if (mask.size() != static_cast<std::size_t>(ga.n_circ) * ga.n_long)
    throw std::invalid_argument("rmse: mask size does not match grid");
  double sum = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < ga.n_circ; ++r)
    for (int c = 0; c < ga.n_long; ++c) {
      if (!mask[static_cast<std::size_t>(r) * ga.n_long + c]) continue;
      const double d = predicted.at(r, c) - truth.at(r, c);
      sum += d * d;
      ++count;
    }
  if (count == 0) throw std::invalid_argument("rmse: mask selects no cells");
  return std::sqrt(sum / static_cast<double>(count));
}

// --- CSV ingestion -------------------------------------------------------
//
// Format: header `row,col,thickness_mm`, one observed cell per line.

inline PipeGrid load_grid_csv(const std::string& path, const PipeGeometry& geometry,
                              double max_thickness_mm = kDefaultMaxThicknessMm) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_grid_csv: cannot open '" + path + "'");

  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_grid_csv: '" + path + "' is empty");
  strip_cr(line);
  if (line != "row,col,thickness_mm")
    throw std::runtime_error("load_grid_csv: expected header 'row,col,thickness_mm', got '" +
                             line + "'");

  PipeGrid grid(geometry);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);

    const auto c1 = line.find(',');
    const auto c2 = (c1 == std::string::npos) ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos ||
        line.find(',', c2 + 1) != std::string::npos)
      throw std::runtime_error(where + ": expected 3 comma-separated fields");

    const long row = parse_long(std::string_view(line).substr(0, c1), where);
    const long col = parse_long(std::string_view(line).substr(c1 + 1, c2 - c1 - 1), where);
    const double t = parse_double(std::string_view(line).substr(c2 + 1), where);

    if (row < 0 || row >= geometry.n_circ || col < 0 || col >= geometry.n_long)
      throw std::runtime_error(where + ": cell (" + std::to_string(row) + "," +
                               std::to_string(col) + ") outside grid");
    if (!std::isfinite(t) || t <= 0.0 || t > max_thickness_mm)
      throw std::runtime_error(where + ": thickness " + format_double(t) +
                               " outside (0, " + format_double(max_thickness_mm) + "]");
    if (grid.is_observed(static_cast<int>(row), static_cast<int>(col)))
      throw std::runtime_error(where + ": duplicate cell (" + std::to_string(row) + "," +
                               std::to_string(col) + ")");
    grid.set(static_cast<int>(row), static_cast<int>(col), t);
  }
  return grid;
}

inline void save_grid_csv(const PipeGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_grid_csv: cannot open '" + path + "' for writing");
  out << "row,col,thickness_mm\n";
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c)
      if (grid.is_observed(r, c))
        out << r << ',' << c << ',' << format_double(grid.at(r, c)) << '\n';
  if (!out) throw std::runtime_error("save_grid_csv: write to '" + path + "' failed");
}

// --- JSON ----------------------------------------------------------------

inline void to_json(nlohmann::json& j, const PipeGeometry& g) {
  j = {{"diameter_mm", g.diameter_mm},
       {"length_mm", g.length_mm},
       {"sensor_pitch_mm", g.sensor_pitch_mm},
       {"n_circ", g.n_circ},
       {"n_long", g.n_long}};
}

inline void from_json(const nlohmann::json& j, PipeGeometry& g) {
  j.at("diameter_mm").get_to(g.diameter_mm);
  j.at("length_mm").get_to(g.length_mm);
  j.at("sensor_pitch_mm").get_to(g.sensor_pitch_mm);
  j.at("n_circ").get_to(g.n_circ);
  j.at("n_long").get_to(g.n_long);
  g.validate();
}

inline SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.geometry = j.at("geometry").get<PipeGeometry>();
  j.at("nominal_thickness_mm").get_to(s.nominal_thickness_mm);
  j.at("patch_count").get_to(s.patch_count);
  s.patch_depth_range_mm = {j.at("patch_depth_range_mm").at(0).get<double>(),
                            j.at("patch_depth_range_mm").at(1).get<double>()};
  s.patch_radius_range_mm = {j.at("patch_radius_range_mm").at(0).get<double>(),
                             j.at("patch_radius_range_mm").at(1).get<double>()};
  j.at("smooth_noise_sd_mm").get_to(s.smooth_noise_sd_mm);
  s.correlation_length_mm = {j.at("correlation_length_mm").at(0).get<double>(),
                             j.at("correlation_length_mm").at(1).get<double>()};
  j.at("rng_seed").get_to(s.rng_seed);
  s.validate();
  return s;
}

inline nlohmann::json SyntheticSpec::to_json() const {
  return {{"geometry", geometry},
          {"nominal_thickness_mm", nominal_thickness_mm},
          {"patch_count", patch_count},
          {"patch_depth_range_mm", {patch_depth_range_mm.first, patch_depth_range_mm.second}},
          {"patch_radius_range_mm", {patch_radius_range_mm.first, patch_radius_range_mm.second}},
          {"smooth_noise_sd_mm", smooth_noise_sd_mm},
          {"correlation_length_mm", {correlation_length_mm.first, correlation_length_mm.second}},
          {"rng_seed", rng_seed}};
}

}  // namespace pipemap
