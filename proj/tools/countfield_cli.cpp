#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "countfield/counts.hpp"
#include "countfield/cross_validation.hpp"
#include "countfield/errors.hpp"
#include "countfield/grid.hpp"
#include "countfield/ingest.hpp"
#include "countfield/io.hpp"
#include "countfield/laplacian.hpp"
#include "countfield/model.hpp"
#include "countfield/optimizer.hpp"
#include "countfield/population.hpp"
#include "countfield/synthetic.hpp"
#include "countfield/transition.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace countfield;

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct DataArgs {
  std::string regions_file = "data/us_regions.txt";
  std::string adjacency_file = "data/us_adjacency.txt";
  std::string centroids_file = "data/us_centroids.csv";
  std::string population_file;
  std::string misdeclare_file;
  double misdeclare_smoothing = 0.5;
  int time_slots = 24;
  bool no_wraparound = false;
  double eps_precise = 0.03;
  double eps_self_declared = 0.47;
  double eps_missing = 0.50;
  std::string mode_a = "WA";
  std::string mode_b = "NY";
  double sigma_a = 9.0;
  double sigma_b = 7.0;
  std::string attractor_a = "CA";
  std::string attractor_b = "NY";
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json cfg = json::parse(in);  // throws json::parse_error on bad input
  if (!cfg.is_object()) throw ValidationError("config root must be a JSON object");
  return cfg;
}

/// Config fills in options the user did not pass on the command line.
template <typename T>
void overlay(const CLI::Option* opt, const json& cfg, const char* key, T& var) {
  if (opt != nullptr && opt->count() > 0) return;
  if (const auto it = cfg.find(key); it != cfg.end()) var = it->template get<T>();
}

void add_common(CLI::App* cmd, CommonArgs& args, CLI::Option*& seed_opt) {
  cmd->add_option("--config", args.config_path, "JSON config file; flags take precedence");
  seed_opt = cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--out", args.out_dir, "output directory (created if missing)");
}

void ensure_out_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

SourceGrid make_grid(const DataArgs& data) {
  return SourceGrid(read_regions(data.regions_file), data.time_slots);
}

AdjacencySpec make_adjacency(const DataArgs& data, const SourceGrid& grid) {
  AdjacencySpec adj;
  adj.region_edges = read_adjacency(data.adjacency_file);
  adj.temporal_wraparound = !data.no_wraparound;
  adj.validate(grid);
  return adj;
}

KindFractions make_fractions(const DataArgs& data) {
  KindFractions frac{data.eps_precise, data.eps_self_declared, data.eps_missing};
  frac.validate();
  return frac;
}

MisDeclareMatrix make_misdeclare(const DataArgs& data, const SourceGrid& grid,
                                 const AdjacencySpec& adjacency) {
  if (!data.misdeclare_file.empty())
    return estimate_misdeclare(grid, read_misdeclare_pairs(data.misdeclare_file),
                               data.misdeclare_smoothing);
  MisDeclareProfile profile;
  profile.attractor_a = data.attractor_a;
  profile.attractor_b = data.attractor_b;
  return build_demo_misdeclare(grid, adjacency, profile);
}

std::vector<std::int64_t> load_population(const DataArgs& data, const SourceGrid& grid) {
  if (data.population_file.empty())
    throw ValidationError("population file required (--population)");
  return read_population_csv(data.population_file, grid);
}

json fit_report_json(const FitResult& res) {
  return {{"objective", res.objective},
          {"iterations", res.iterations},
          {"grad_inf_norm", res.grad_inf_norm},
          {"termination", to_string(res.termination)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatio-temporal intensity recovery from noisy event counts"};
  app.require_subcommand(1);

  CommonArgs common;
  DataArgs data;
  CLI::Option* seed_opt = nullptr;

  // ---- bin ----
  auto* bin_cmd = app.add_subcommand("bin", "bin an event CSV into detector counts");
  std::string events_file, filter_name = "target";
  int tz_offset_min = 0;
  double kind3_scale = 1.0;
  CLI::Option* bin_events_opt =
      bin_cmd->add_option("--events", events_file, "event CSV (timestamp,kind,region,is_target)");
  bin_cmd->add_option("--filter", filter_name, "target|population")
      ->check(CLI::IsMember({"target", "population"}));
  bin_cmd->add_option("--regions", data.regions_file, "region codes file");
  bin_cmd->add_option("--time-slots", data.time_slots, "slots per day");
  bin_cmd->add_option("--tz-offset-min", tz_offset_min, "minutes added to UTC before slotting");
  bin_cmd->add_option("--kind3-scale", kind3_scale, "multiplier for no-location counts");
  add_common(bin_cmd, common, seed_opt);

  // ---- estimate ----
  auto* est_cmd = app.add_subcommand("estimate", "fit the intensity from a counts CSV");
  std::string counts_file;
  double w_s = 1.0, w_t = 1.0;
  bool export_transition = false;
  OptimizerConfig opt_cfg;
  CLI::Option* est_counts_opt =
      est_cmd->add_option("--counts", counts_file, "counts CSV (kind,region,slot,count)");
  CLI::Option* ws_opt = est_cmd->add_option("--w-s", w_s, "spatial penalty weight");
  CLI::Option* wt_opt = est_cmd->add_option("--w-t", w_t, "temporal penalty weight");
  est_cmd->add_flag("--export-transition", export_transition, "also write transition.csv");
  add_common(est_cmd, common, seed_opt);

  // ---- cv ----
  auto* cv_cmd = app.add_subcommand("cv", "pick penalty weights by thinning cross-validation");
  CvPlan plan;
  int grid_points = 13;
  double grid_min_exp = -3.0, grid_max_exp = 3.0;
  CLI::Option* cv_counts_opt =
      cv_cmd->add_option("--counts", counts_file, "counts CSV (kind,region,slot,count)");
  cv_cmd->add_option("--holdout", plan.holdout_fraction, "holdout fraction in (0,1)");
  cv_cmd->add_option("--splits", plan.num_splits, "number of thinning splits");
  cv_cmd->add_option("--grid-points", grid_points, "points per weight axis");
  cv_cmd->add_option("--grid-min-exp", grid_min_exp, "log10 of the smallest weight");
  cv_cmd->add_option("--grid-max-exp", grid_max_exp, "log10 of the largest weight");
  cv_cmd->add_option("--workers", plan.num_workers, "parallel fit workers");
  add_common(cv_cmd, common, seed_opt);

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  double target_total = 2192.0;
  double population_total = 2e6, population_spread = 1.5;
  synth_cmd->add_option("--target-total", target_total, "expected total event count");
  synth_cmd->add_option("--population-total", population_total,
                        "total population activity when generating a profile");
  synth_cmd->add_option("--population-spread", population_spread,
                        "log-normal spread of region activity");
  synth_cmd->add_flag("--export-transition", export_transition, "also write transition.csv");
  add_common(synth_cmd, common, seed_opt);

  // ---- baselines ----
  auto* base_cmd = app.add_subcommand("baselines", "run the six-estimator benchmark");
  BenchConfig bench;
  int cv_grid_points = 5;
  double cv_min_exp = -2.0, cv_max_exp = 2.0;
  CLI::Option* seeds_opt = base_cmd->add_option("--seeds", bench.num_seeds, "number of replicates");
  base_cmd->add_option("--base-seed", bench.base_seed, "seed of the first replicate");
  base_cmd->add_option("--count-scale", bench.count_scale, "multiplier on expected counts");
  base_cmd->add_option("--target-total", bench.target_total, "expected total event count");
  base_cmd->add_option("--cv-grid-points", cv_grid_points, "points per weight axis for CV");
  base_cmd->add_option("--cv-min-exp", cv_min_exp, "log10 of the smallest CV weight");
  base_cmd->add_option("--cv-max-exp", cv_max_exp, "log10 of the largest CV weight");
  base_cmd->add_option("--cv-splits", bench.cv.num_splits, "thinning splits per replicate");
  base_cmd->add_option("--cv-holdout", bench.cv.holdout_fraction, "holdout fraction");
  base_cmd->add_option("--workers", bench.cv.num_workers, "parallel fit workers");
  add_common(base_cmd, common, seed_opt);

  // optimizer budget on every subcommand that fits
  for (CLI::App* cmd : {est_cmd, cv_cmd, base_cmd}) {
    cmd->add_option("--max-iters", opt_cfg.max_iters, "optimizer iteration budget");
    cmd->add_option("--grad-tol", opt_cfg.grad_tol, "gradient infinity-norm tolerance");
  }

  // shared data options on every subcommand that models anything
  for (CLI::App* cmd : {est_cmd, cv_cmd, synth_cmd, base_cmd}) {
    cmd->add_option("--regions", data.regions_file, "region codes file");
    cmd->add_option("--adjacency", data.adjacency_file, "region adjacency file");
    cmd->add_option("--centroids", data.centroids_file, "region centroid CSV");
    cmd->add_option("--population", data.population_file, "population CSV (region,slot,count)");
    cmd->add_option("--misdeclare", data.misdeclare_file,
                    "declared,actual,count CSV for the mis-declare model");
    cmd->add_option("--smoothing", data.misdeclare_smoothing, "mis-declare additive smoothing");
    cmd->add_option("--time-slots", data.time_slots, "slots per day");
    cmd->add_flag("--no-wraparound", data.no_wraparound, "open temporal chain");
    cmd->add_option("--eps1", data.eps_precise, "precise-location fraction");
    cmd->add_option("--eps2", data.eps_self_declared, "self-declared fraction");
    cmd->add_option("--eps3", data.eps_missing, "no-location fraction");
    cmd->add_option("--mode-a", data.mode_a, "first truth mode region");
    cmd->add_option("--mode-b", data.mode_b, "second truth mode region");
    cmd->add_option("--sigma-a", data.sigma_a, "first truth mode scale");
    cmd->add_option("--sigma-b", data.sigma_b, "second truth mode scale");
    cmd->add_option("--attractor-a", data.attractor_a, "demo mis-declare attractor");
    cmd->add_option("--attractor-b", data.attractor_b, "demo mis-declare attractor");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const json cfg = load_config(common.config_path);
    overlay(seed_opt, cfg, "seed", common.seed);
    overlay(nullptr, cfg, "out_dir", common.out_dir);
    overlay(nullptr, cfg, "regions_file", data.regions_file);
    overlay(nullptr, cfg, "adjacency_file", data.adjacency_file);
    overlay(nullptr, cfg, "centroids_file", data.centroids_file);
    overlay(nullptr, cfg, "population_file", data.population_file);
    overlay(nullptr, cfg, "misdeclare_file", data.misdeclare_file);
    overlay(nullptr, cfg, "misdeclare_smoothing", data.misdeclare_smoothing);
    overlay(nullptr, cfg, "time_slots", data.time_slots);
    overlay(nullptr, cfg, "eps_precise", data.eps_precise);
    overlay(nullptr, cfg, "eps_self_declared", data.eps_self_declared);
    overlay(nullptr, cfg, "eps_missing", data.eps_missing);
    overlay(nullptr, cfg, "mode_a", data.mode_a);
    overlay(nullptr, cfg, "mode_b", data.mode_b);
    overlay(nullptr, cfg, "sigma_a", data.sigma_a);
    overlay(nullptr, cfg, "sigma_b", data.sigma_b);
    overlay(nullptr, cfg, "attractor_a", data.attractor_a);
    overlay(nullptr, cfg, "attractor_b", data.attractor_b);
    if (cfg.contains("temporal_wraparound"))
      data.no_wraparound = !cfg.at("temporal_wraparound").get<bool>();
    ensure_out_dir(common.out_dir);

    if (*bin_cmd) {
      overlay(bin_events_opt, cfg, "events_file", events_file);
      overlay(nullptr, cfg, "filter", filter_name);
      overlay(nullptr, cfg, "timezone_offset_minutes", tz_offset_min);
      overlay(nullptr, cfg, "kind3_scale", kind3_scale);
      if (events_file.empty()) throw ValidationError("--events is required");

      const SourceGrid grid = make_grid(data);
      const DetectorLayout layout(grid);
      SlotMapping mapping{data.time_slots, tz_offset_min};
      std::ifstream in(events_file);
      if (!in) throw IoError("cannot open " + events_file);
      const BinFilter filter =
          filter_name == "target" ? BinFilter::target : BinFilter::population;
      auto [counts, report] = bin_events(in, grid, layout, mapping, filter);

      if (filter == BinFilter::target) {
        apply_kind3_scale(counts, kind3_scale);
        write_counts_csv(join(common.out_dir, "counts.csv"), counts, grid);
      } else {
        std::vector<std::int64_t> z(grid.size());
        for (int j = 0; j < grid.size(); ++j) {
          const auto [r, t] = grid.region_slot(j);
          z[j] = counts[layout.precise_bin(r, t)];
        }
        write_population_csv(join(common.out_dir, "population.csv"), z, grid);
      }

      json rejections = json::array();
      for (const RejectedLine& rej : report.rejections)
        rejections.push_back({{"line", rej.line}, {"reason", rej.reason}});
      write_json(join(common.out_dir, "bin_report.json"),
                 {{"input_records", report.input_records},
                  {"accepted", report.accepted},
                  {"binned", report.binned},
                  {"filtered_out", report.filtered_out},
                  {"rejected", report.rejected},
                  {"rejections", std::move(rejections)}});
      std::cout << "binned " << report.binned << " of " << report.input_records
                << " records (" << report.rejected << " rejected)\n";
      return 0;
    }

    if (*est_cmd || *cv_cmd) {
      const CLI::App* active = *est_cmd ? est_cmd : cv_cmd;
      const CLI::Option* counts_opt = *est_cmd ? est_counts_opt : cv_counts_opt;
      overlay(counts_opt, cfg, "counts_file", counts_file);
      overlay(active->get_option("--max-iters"), cfg, "max_iters", opt_cfg.max_iters);
      overlay(active->get_option("--grad-tol"), cfg, "grad_tol", opt_cfg.grad_tol);
      if (counts_file.empty()) throw ValidationError("--counts is required");

      const SourceGrid grid = make_grid(data);
      const DetectorLayout layout(grid);
      const AdjacencySpec adjacency = make_adjacency(data, grid);
      const CountVector x = read_counts_csv(counts_file, grid, layout);
      const PopulationField population =
          PopulationField::from_counts(load_population(data, grid));
      const KindFractions fractions = make_fractions(data);
      const MisDeclareMatrix mis = make_misdeclare(data, grid, adjacency);
      const Eigen::SparseMatrix<double> p =
          build_transition(grid, layout, fractions, mis).p;

      if (*est_cmd) {
        overlay(ws_opt, cfg, "w_s", w_s);
        overlay(wt_opt, cfg, "w_t", w_t);
        const Laplacian lap = build_laplacian(grid, adjacency, w_s, w_t);
        const Eigen::VectorXd theta0 =
            initialize_theta(x.as_vector(), p, population.psi(), opt_cfg.init_floor);
        const FitResult res =
            fit(theta0, population.psi(), p, x.as_vector(), lap, 1.0, opt_cfg);
        write_intensity_csv(join(common.out_dir, "f_hat.csv"), res.intensity, grid);
        write_spatial_csv(join(common.out_dir, "f_hat_spatial.csv"), res.intensity, grid);
        write_temporal_csv(join(common.out_dir, "f_hat_temporal.csv"), res.intensity, grid);
        if (export_transition)
          write_transition_coo(join(common.out_dir, "transition.csv"), p);
        write_json(join(common.out_dir, "fit_report.json"), fit_report_json(res));
        std::cout << "fit: " << to_string(res.termination) << " after " << res.iterations
                  << " iterations, objective " << format_double(res.objective) << "\n";
      } else {
        overlay(nullptr, cfg, "holdout_fraction", plan.holdout_fraction);
        overlay(nullptr, cfg, "num_splits", plan.num_splits);
        overlay(nullptr, cfg, "grid_points", grid_points);
        overlay(nullptr, cfg, "grid_min_exp", grid_min_exp);
        overlay(nullptr, cfg, "grid_max_exp", grid_max_exp);
        overlay(nullptr, cfg, "num_workers", plan.num_workers);
        if (grid_points < 1) throw ValidationError("grid_points must be at least 1");
        plan.seed = common.seed;
        plan.grid.clear();
        for (int a = 0; a < grid_points; ++a)
          for (int b = 0; b < grid_points; ++b) {
            const double step =
                grid_points == 1 ? 0.0 : (grid_max_exp - grid_min_exp) / (grid_points - 1);
            plan.grid.emplace_back(std::pow(10.0, grid_min_exp + step * a),
                                   std::pow(10.0, grid_min_exp + step * b));
          }
        const CvReport report =
            select_weights(x, population.psi(), p, grid, adjacency, plan, opt_cfg);
        write_json(join(common.out_dir, "cv_report.json"), cv_report_to_json(report));
        std::cout << "selected w_s=" << format_double(report.selected_w_s)
                  << " w_t=" << format_double(report.selected_w_t) << "\n";
      }
      return 0;
    }

    if (*synth_cmd) {
      overlay(nullptr, cfg, "target_total", target_total);
      overlay(nullptr, cfg, "population_total", population_total);
      overlay(nullptr, cfg, "population_spread", population_spread);

      const SourceGrid grid = make_grid(data);
      const DetectorLayout layout(grid);
      const AdjacencySpec adjacency = make_adjacency(data, grid);
      const CentroidMap centroids = read_centroids(data.centroids_file);

      std::vector<std::int64_t> z;
      if (data.population_file.empty()) {
        z = generate_population_profile(grid, population_total, population_spread,
                                        common.seed);
        write_population_csv(join(common.out_dir, "population_profile.csv"), z, grid);
      } else {
        z = read_population_csv(data.population_file, grid);
      }
      const PopulationField population = PopulationField::from_counts(z);
      const Eigen::VectorXd g = population.g();

      SyntheticSpec spec;
      spec.component_a = {data.mode_a, data.sigma_a};
      spec.component_b = {data.mode_b, data.sigma_b};
      spec.seed = common.seed;
      const Eigen::VectorXd u = generate_truth(spec, grid, centroids);
      spec.scale = calibrate_scale(u, g, target_total);
      const Eigen::VectorXd f = generate_truth(spec, grid, centroids);

      const KindFractions fractions = make_fractions(data);
      const MisDeclareMatrix mis = make_misdeclare(data, grid, adjacency);
      const Eigen::SparseMatrix<double> p =
          build_transition(grid, layout, fractions, mis).p;
      const CountVector x = sample_counts(layout, f, population.psi(), p, common.seed);

      write_intensity_csv(join(common.out_dir, "truth.csv"), f, grid);
      write_counts_csv(join(common.out_dir, "counts.csv"), x, grid);
      if (export_transition)
        write_transition_coo(join(common.out_dir, "transition.csv"), p);
      write_json(join(common.out_dir, "synth_report.json"),
                 {{"seed", common.seed},
                  {"total", x.total()},
                  {"kind_totals",
                   {x.kind_total(DetectorKind::precise),
                    x.kind_total(DetectorKind::self_declared),
                    x.kind_total(DetectorKind::no_location)}}});
      std::cout << "generated " << x.total() << " events\n";
      return 0;
    }

    if (*base_cmd) {
      overlay(seeds_opt, cfg, "seeds", bench.num_seeds);
      overlay(base_cmd->get_option("--max-iters"), cfg, "max_iters", opt_cfg.max_iters);
      overlay(base_cmd->get_option("--grad-tol"), cfg, "grad_tol", opt_cfg.grad_tol);
      bench.opt = opt_cfg;
      overlay(nullptr, cfg, "base_seed", bench.base_seed);
      overlay(nullptr, cfg, "count_scale", bench.count_scale);
      overlay(nullptr, cfg, "target_total", bench.target_total);
      overlay(nullptr, cfg, "cv_grid_points", cv_grid_points);
      overlay(nullptr, cfg, "cv_min_exp", cv_min_exp);
      overlay(nullptr, cfg, "cv_max_exp", cv_max_exp);
      overlay(nullptr, cfg, "cv_splits", bench.cv.num_splits);
      overlay(nullptr, cfg, "cv_holdout", bench.cv.holdout_fraction);
      overlay(nullptr, cfg, "num_workers", bench.cv.num_workers);

      const SourceGrid grid = make_grid(data);
      const AdjacencySpec adjacency = make_adjacency(data, grid);
      const CentroidMap centroids = read_centroids(data.centroids_file);
      const std::vector<std::int64_t> z = load_population(data, grid);

      bench.truth.component_a = {data.mode_a, data.sigma_a};
      bench.truth.component_b = {data.mode_b, data.sigma_b};
      bench.misdeclare.attractor_a = data.attractor_a;
      bench.misdeclare.attractor_b = data.attractor_b;
      bench.fractions = make_fractions(data);
      if (cv_grid_points < 1) throw ValidationError("cv_grid_points must be at least 1");
      for (int a = 0; a < cv_grid_points; ++a)
        for (int b = 0; b < cv_grid_points; ++b) {
          const double step =
              cv_grid_points == 1 ? 0.0 : (cv_max_exp - cv_min_exp) / (cv_grid_points - 1);
          bench.cv.grid.emplace_back(std::pow(10.0, cv_min_exp + step * a),
                                     std::pow(10.0, cv_min_exp + step * b));
        }

      const BenchSummary summary = run_bench(bench, grid, centroids, adjacency, z);
      write_bench_csv(join(common.out_dir, "bench.csv"), summary.runs);
      write_json(join(common.out_dir, "bench_summary.json"), bench_summary_to_json(summary));
      std::cout << "median relative error by estimator:\n";
      for (int e = 0; e < 6; ++e)
        std::cout << "  (" << kEstimatorLabels[e] << ") "
                  << format_double(summary.median_error[e]) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
