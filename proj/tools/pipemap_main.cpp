// pipemap command-line tool: synthesize, fit, test, predict, evaluate and
// render remaining-wall-thickness maps of cylindrical pipes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pipemap/pipemap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GeometryFlags {
  int n_circ = 0;
  int n_long = 0;
  double pitch_mm = pipemap::kDefaultSensorPitchMm;
  double max_thickness_mm = pipemap::kDefaultMaxThicknessMm;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--n-circ", n_circ, "grid rows (cells around the circumference)")
        ->required();
    cmd->add_option("--n-long", n_long, "grid columns (cells along the axis)")->required();
    cmd->add_option("--pitch", pitch_mm, "sensor footprint edge in mm")
        ->capture_default_str();
    cmd->add_option("--max-thickness", max_thickness_mm,
                    "upper bound accepted for readings, mm")
        ->capture_default_str();
  }

  pipemap::PipeGeometry geometry() const {
    return pipemap::PipeGeometry::from_grid(n_circ, n_long, pitch_mm);
  }
};

struct GpFlags {
  int gp_restarts = 4;
  int gp_max_evals = 200;
  int max_components = 8;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--gp-restarts", gp_restarts, "hyperparameter fit restarts")
        ->capture_default_str();
    cmd->add_option("--gp-max-evals", gp_max_evals, "optimizer iteration budget")
        ->capture_default_str();
    cmd->add_option("--max-components", max_components,
                    "largest mixture size tried by AIC selection")
        ->capture_default_str();
  }

  void apply(pipemap::PipelineConfig& cfg) const {
    cfg.gp.restarts = gp_restarts;
    cfg.gp.max_evals = gp_max_evals;
    cfg.max_gm_components = max_components;
  }
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"remaining-wall-thickness map reconstruction for pipe inspections"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out = ".";
  app.add_option("--seed", seed, "RNG seed controlling all randomness")
      ->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic ground-truth grid");
  std::string synth_spec_path;
  synth->add_option("--spec", synth_spec_path, "SyntheticSpec JSON file")->required();
  bool synth_seed_override = false;
  synth->callback([&] {
    auto spec = pipemap::SyntheticSpec::from_json(read_json_file(synth_spec_path));
    if (synth_seed_override) spec.rng_seed = seed;
    const auto grid = pipemap::generate_synthetic(spec);
    const auto dir = prepare_out_dir(out);
    pipemap::save_grid_csv(grid, (dir / "truth.csv").string());
    std::cout << "wrote " << (dir / "truth.csv").string() << " (" << grid.rows() << "x"
              << grid.cols() << ")\n";
  });
  synth->add_flag("--use-seed", synth_seed_override,
                  "override the spec's rng_seed with --seed");

  // --- fit -----------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "fit one marginal family to a grid");
  std::string fit_grid_path, fit_family = "gm";
  GeometryFlags fit_geom;
  double fit_alpha = 0.01;
  int fit_max_components = 8;
  fit->add_option("--grid", fit_grid_path, "grid CSV")->required();
  fit_geom.add_to(fit);
  fit->add_option("--family", fit_family, "gm|gumbel|weibull")->capture_default_str();
  fit->add_option("--alpha", fit_alpha, "K-S significance level")->capture_default_str();
  fit->add_option("--max-components", fit_max_components, "largest mixture size")
      ->capture_default_str();
  fit->callback([&] {
    const auto grid = pipemap::load_grid_csv(fit_grid_path, fit_geom.geometry(),
                                             fit_geom.max_thickness_mm);
    const auto values = grid.observed_values();
    const auto family = pipemap::family_from_name(fit_family);

    pipemap::MarginalFitConfig fc;
    fc.max_gm_components = fit_max_components;
    fc.em.rng_seed = seed;
    const auto model = pipemap::fit_marginal(values, family, fc);

    pipemap::GofReport report;
    auto& slot = report.families[static_cast<int>(family)];
    slot.ks = pipemap::ks_test(model, values, fit_alpha);
    slot.aic = pipemap::aic(model.diagnostics().log_likelihood, model.diagnostics().n_params);
    slot.model = model;
    report.selected_family = family;

    const auto dir = prepare_out_dir(out);
    write_json_file(dir / "marginal.json", model.to_json());
    write_json_file(dir / "gof.json", report.to_json());
    std::cout << "family " << fit_family << ": KS " << slot.ks->statistic << " (critical "
              << slot.ks->critical_value << "), AIC " << *slot.aic << "\n";
  });

  // --- gof -----------------------------------------------------------------
  auto* gof = app.add_subcommand("gof", "three-way marginal goodness-of-fit comparison");
  std::string gof_grid_path;
  GeometryFlags gof_geom;
  double gof_alpha = 0.01;
  int gof_max_components = 8;
  gof->add_option("--grid", gof_grid_path, "grid CSV")->required();
  gof_geom.add_to(gof);
  gof->add_option("--alpha", gof_alpha, "K-S significance level")->capture_default_str();
  gof->add_option("--max-components", gof_max_components, "largest mixture size")
      ->capture_default_str();
  gof->callback([&] {
    const auto grid = pipemap::load_grid_csv(gof_grid_path, gof_geom.geometry(),
                                             gof_geom.max_thickness_mm);
    pipemap::GofConfig cfg;
    cfg.alpha = gof_alpha;
    cfg.max_gm_components = gof_max_components;
    cfg.em.rng_seed = seed;
    const auto report = pipemap::compare_marginals(grid.observed_values(), cfg);
    std::cout << report.table();
    const auto dir = prepare_out_dir(out);
    write_json_file(dir / "gof.json", report.to_json());
  });

  // --- predict ----------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "fill the unscanned cells of a partial grid");
  std::string predict_grid_path, predict_family = "gm";
  GeometryFlags predict_geom;
  GpFlags predict_gp;
  double interval_level = 0.0;
  predict->add_option("--grid", predict_grid_path, "partial grid CSV")->required();
  predict_geom.add_to(predict);
  predict->add_option("--family", predict_family, "gm|gumbel|weibull")->capture_default_str();
  predict_gp.add_to(predict);
  predict->add_option("--interval", interval_level,
                      "also emit thickness-domain credible interval grids at this level");
  predict->callback([&] {
    const auto grid = pipemap::load_grid_csv(predict_grid_path, predict_geom.geometry(),
                                             predict_geom.max_thickness_mm);
    pipemap::PipelineConfig cfg;
    cfg.family = pipemap::family_from_name(predict_family);
    cfg.rng_seed = seed;
    predict_gp.apply(cfg);
    const auto res = pipemap::predict_unscanned(grid, cfg);

    const auto dir = prepare_out_dir(out);
    pipemap::save_grid_csv(res.predicted, (dir / "predicted.csv").string());
    write_json_file(dir / "marginal.json", res.marginal.to_json());
    write_json_file(dir / "gp.json", res.gp.to_json());

    if (interval_level > 0.0) {
      pipemap::PipeGrid lo_grid = res.predicted;
      pipemap::PipeGrid hi_grid = res.predicted;
      std::vector<pipemap::Location2> queries;
      std::vector<std::pair<int, int>> blanks;
      for (int r = 0; r < grid.rows(); ++r)
        for (int c = 0; c < grid.cols(); ++c)
          if (!grid.is_observed(r, c)) {
            const auto [x, y] = grid.geometry().cell_center(r, c);
            queries.push_back({x, y});
            blanks.emplace_back(r, c);
          }
      const auto preds = res.gp.predict(queries);
      for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto iv = pipemap::credible_interval(res.marginal, preds[i].mean,
                                                   preds[i].variance, interval_level);
        lo_grid.set(blanks[i].first, blanks[i].second, std::max(0.0, iv.lo));
        hi_grid.set(blanks[i].first, blanks[i].second, std::max(0.0, iv.hi));
      }
      pipemap::save_grid_csv(lo_grid, (dir / "interval_lo.csv").string());
      pipemap::save_grid_csv(hi_grid, (dir / "interval_hi.csv").string());
    }
    std::cout << "predicted " << (grid.rows() * grid.cols() - grid.observed_count())
              << " cells\n";
  });

  // --- evaluate ----------------------------------------------------------------
  auto* evaluate = app.add_subcommand(
      "evaluate", "shifted single-run experiment: scan, predict, score per family");
  std::string truth_path;
  GeometryFlags eval_geom;
  GpFlags eval_gp;
  std::vector<int> shifts{0, 1, 2};
  std::vector<std::string> family_names{"gm", "gumbel", "weibull"};
  int sensor_lines = 6;
  evaluate->add_option("--truth", truth_path, "fully observed ground-truth grid CSV")
      ->required();
  eval_geom.add_to(evaluate);
  evaluate->add_option("--shifts", shifts, "scan-line shifts to test")
      ->delimiter(',')
      ->capture_default_str();
  evaluate->add_option("--families", family_names, "marginal families to compare")
      ->delimiter(',')
      ->capture_default_str();
  evaluate->add_option("--lines", sensor_lines, "sensor lines per run")
      ->capture_default_str();
  eval_gp.add_to(evaluate);
  evaluate->callback([&] {
    pipemap::ExperimentSpec spec{
        pipemap::load_grid_csv(truth_path, eval_geom.geometry(), eval_geom.max_thickness_mm)};
    spec.scan_shifts = shifts;
    spec.sensor_lines = sensor_lines;
    spec.rng_seed = seed;
    spec.families.clear();
    for (const auto& name : family_names)
      spec.families.push_back(pipemap::family_from_name(name));
    eval_gp.apply(spec.pipeline);

    const auto report = pipemap::run_experiment(spec);
    const auto dir = prepare_out_dir(out);
    write_text_file(dir / "eval.csv", report.to_csv());
    write_json_file(dir / "eval.json", report.to_json());
    std::cout << report.to_csv();
    for (const auto& e : report.entries)
      if (!e.error.empty())
        std::cerr << "warning: shift " << e.shift << " " << pipemap::family_name(e.family)
                  << " failed: " << e.error << "\n";
  });

  // --- render ----------------------------------------------------------------
  auto* render = app.add_subcommand("render", "rasterize a grid CSV");
  std::string render_grid_path, render_out, colormap = "grayscale", format = "pgm";
  GeometryFlags render_geom;
  double min_mm = 0.0, max_mm = 0.0;
  bool has_min = false, has_max = false;
  render->add_option("--grid", render_grid_path, "grid CSV")->required();
  render_geom.add_to(render);
  render->add_option("--colormap", colormap, "grayscale|thermal")->capture_default_str();
  render->add_option("--format", format, "pgm|ppm|csv")->capture_default_str();
  auto* min_opt = render->add_option("--min", min_mm, "fixed scale lower bound, mm");
  auto* max_opt = render->add_option("--max", max_mm, "fixed scale upper bound, mm");
  render->add_option("--file", render_out, "output raster path")->required();
  render->callback([&] {
    has_min = min_opt->count() > 0;
    has_max = max_opt->count() > 0;
    const auto grid = pipemap::load_grid_csv(render_grid_path, render_geom.geometry(),
                                             render_geom.max_thickness_mm);
    pipemap::RenderSpec spec;
    if (colormap == "grayscale") spec.color_map = pipemap::ColorMap::Grayscale;
    else if (colormap == "thermal") spec.color_map = pipemap::ColorMap::Thermal;
    else throw std::invalid_argument("unknown colormap '" + colormap + "'");
    if (format == "pgm") spec.format = pipemap::RasterFormat::Pgm;
    else if (format == "ppm") spec.format = pipemap::RasterFormat::Ppm;
    else if (format == "csv") spec.format = pipemap::RasterFormat::Csv;
    else throw std::invalid_argument("unknown raster format '" + format + "'");
    if (has_min) spec.min_mm = min_mm;
    if (has_max) spec.max_mm = max_mm;
    pipemap::render_grid(grid, spec, render_out);
    std::cout << "wrote " << render_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
