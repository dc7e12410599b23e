// cmx: build, query, evaluate and tune count-min sketches from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmx/cmx.hpp"

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

/// --seed beats CMX_SEED, which beats the built-in default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback = kDefaultSeed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CMX_SEED"); env && *env) {
    std::uint64_t v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("CMX_SEED is not an unsigned integer: " + s);
    return v;
  }
  return fallback;
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : cmx::detail::split_list(text)) {
    const double x = cmx::detail::parse_double("levels", part);
    if (!(x > 0.0 && x < 1.0)) throw std::invalid_argument("levels must be in (0, 1)");
    out.push_back(x);
  }
  if (out.empty()) throw std::invalid_argument("no levels given");
  return out;
}

/// "1..32" or "1,2,4,8".
std::vector<std::size_t> parse_depths(const std::string& text) {
  std::vector<std::size_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = cmx::detail::parse_uint("depths", cmx::detail::trim_ws(text.substr(0, dots)));
    const auto hi = cmx::detail::parse_uint("depths", cmx::detail::trim_ws(text.substr(dots + 2)));
    if (lo < 1 || hi < lo) throw std::invalid_argument("bad depth range " + text);
    for (auto r = lo; r <= hi; ++r) out.push_back(r);
  } else {
    for (const auto& part : cmx::detail::split_list(text)) {
      const auto r = cmx::detail::parse_uint("depths", part);
      if (r < 1) throw std::invalid_argument("depths must be positive");
      out.push_back(r);
    }
  }
  if (out.empty()) throw std::invalid_argument("no depths given");
  return out;
}

std::vector<std::string> read_items(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> items;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) items.push_back(line);
  }
  return items;
}

cmx::CountPlusSketch build_from_stream(const std::string& path, std::uint32_t depth, std::uint32_t width,
                                       std::uint64_t seed, bool strict, cmx::IngestStats& stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  cmx::CountPlusSketch sketch(cmx::SketchConfig::from_master_seed(depth, width, seed));
  stats = cmx::for_each_record(in, strict, [&](std::string_view item, std::int64_t count) { sketch.update(item, count); });
  return sketch;
}

/// Two-column CSV "value,probability" (header optional) into a gridded pmf.
cmx::GriddedDistribution read_pmf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> pmf;
  for (const auto& row : cmx::read_csv(in)) {
    if (row.size() < 2) continue;
    double value = 0.0, p = 0.0;
    try {
      value = cmx::detail::parse_double("value", row[0]);
      p = cmx::detail::parse_double("probability", row[1]);
    } catch (const std::invalid_argument&) {
      if (pmf.empty()) continue;  // header
      throw;
    }
    if (value < 0.0 || value != std::floor(value)) throw std::invalid_argument("pmf values must be non-negative integers");
    const auto v = static_cast<std::size_t>(value);
    if (pmf.size() <= v) pmf.resize(v + 1, 0.0);
    pmf[v] += p;
  }
  if (pmf.empty()) throw std::invalid_argument("pmf file has no rows");
  return cmx::GriddedDistribution::from_pmf(std::move(pmf));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Count-min sketches with debiased estimators, intervals and tuning"};
  app.require_subcommand(1);

  // build
  auto* build = app.add_subcommand("build", "Build a sketch from an item<TAB>count stream");
  std::string build_input, build_out;
  std::uint32_t build_depth = 4, build_width = 16384;
  std::optional<std::uint64_t> build_seed;
  bool build_lenient = false;
  build->add_option("--input", build_input, "Stream file")->required();
  build->add_option("--depth", build_depth, "Replicates r")->check(CLI::PositiveNumber);
  build->add_option("--width", build_width, "Counters per replicate k")->check(CLI::PositiveNumber);
  build->add_option("--seed", build_seed, "Master hash seed");
  build->add_option("--out", build_out, "Output sketch file")->required();
  build->add_flag("--lenient", build_lenient, "Skip malformed lines instead of failing");

  // query
  auto* query = app.add_subcommand("query", "Estimate counts with intervals");
  std::string query_sketch, query_items, query_estimator = "debiased-mle";
  double query_level = 0.9, query_trim = cmx::kDefaultTrimFraction;
  std::size_t query_resamples = 0;
  std::optional<std::uint64_t> query_seed;
  bool query_joint = false, query_constrained = false;
  query->add_option("--sketch", query_sketch, "Sketch file")->required();
  query->add_option("--items", query_items, "One item per line")->required();
  query->add_option("--estimator", query_estimator, "min|debiased-min|debiased-mean|debiased-median|mle|debiased-mle|bayes");
  query->add_option("--level", query_level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  query->add_option("--bootstrap", query_resamples, "Bootstrap resamples (0 = per-column statistic)");
  query->add_option("--trim", query_trim, "Fraction of largest errors dropped before density fitting");
  query->add_option("--seed", query_seed, "Bootstrap seed");
  query->add_flag("--joint", query_joint, "Jointly estimate all listed items");
  query->add_flag("--constrained", query_constrained, "With --joint, keep M theta <= V");

  // eval
  auto* eval = app.add_subcommand("eval", "Run an evaluation scenario");
  std::string eval_scenario, eval_out_dir;
  std::optional<std::uint64_t> eval_seed;
  eval->add_option("--scenario", eval_scenario, "Scenario file (key = value)")->required();
  eval->add_option("--out-dir", eval_out_dir, "Directory for report.csv and queries.csv");
  eval->add_option("--seed", eval_seed, "Overrides the scenario seed");

  // tune
  auto* tune = app.add_subcommand("tune", "Interval width by depth at a fixed counter budget");
  std::size_t tune_budget = 0, tune_grid = 0;
  std::string tune_levels = "0.5,0.9,0.99", tune_depths = "1..32", tune_pmf, tune_sketch, tune_input;
  std::optional<std::uint64_t> tune_seed;
  tune->add_option("--budget", tune_budget, "Total counters B = r k")->required()->check(CLI::PositiveNumber);
  tune->add_option("--levels", tune_levels, "Comma-separated levels");
  tune->add_option("--depths", tune_depths, "Depth range a..b or list");
  tune->add_option("--grid", tune_grid, "Error grid size (0 = automatic)");
  auto* src_pmf = tune->add_option("--pmf", tune_pmf, "Counter pmf CSV (value,probability) of a 1 x B sketch");
  auto* src_sketch = tune->add_option("--sketch", tune_sketch, "Single-replicate sketch file");
  auto* src_input = tune->add_option("--input", tune_input, "Stream file; builds a 1 x B sketch");
  src_pmf->excludes(src_sketch)->excludes(src_input);
  src_sketch->excludes(src_input);
  tune->add_option("--seed", tune_seed, "Hash seed for --input");

  // export-density
  auto* exportd = app.add_subcommand("export-density", "Write the fitted error log-density as knot,phi CSV");
  std::string export_sketch, export_out;
  double export_trim = cmx::kDefaultTrimFraction;
  exportd->add_option("--sketch", export_sketch, "Sketch file")->required();
  exportd->add_option("--out", export_out, "Output CSV (default stdout)");
  exportd->add_option("--trim", export_trim, "Fraction of largest errors dropped");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build) {
      cmx::IngestStats stats;
      const auto sketch = build_from_stream(build_input, build_depth, build_width, resolve_seed(build_seed), !build_lenient, stats);
      cmx::write_sketch_file(build_out, sketch);
      std::cout << "depth=" << sketch.depth() << " width=" << sketch.width() << " total=" << sketch.total_count()
                << " lines=" << stats.lines_read << " records=" << stats.records << " skipped=" << stats.skipped << '\n';
      if (stats.skipped) std::cerr << "cmx: skipped " << stats.skipped << " malformed line(s)\n";
    } else if (*query) {
      const auto sketch = cmx::read_sketch_file(query_sketch);
      const auto items = read_items(query_items);
      if (query_joint) {
        if (items.empty()) throw std::invalid_argument("no items to estimate");
        cmx::JointMleOptions opts;
        opts.constrained = query_constrained;
        opts.trim_fraction = query_trim;
        const auto res = cmx::joint_mle(sketch, items, opts);
        std::cout << "item,theta\n";
        for (std::size_t i = 0; i < res.estimate.items.size(); ++i) {
          cmx::write_csv_row(std::cout, {res.estimate.items[i], cmx::format_number(res.estimate.theta[i])});
        }
        if (!res.estimate.converged) std::cerr << "cmx: joint estimate did not converge\n";
      } else {
        if (!cmx::is_estimator_name(query_estimator)) throw std::invalid_argument("unknown estimator '" + query_estimator + "'");
        if (!(query_level > 0.0 && query_level < 1.0)) throw std::invalid_argument("level must be in (0, 1)");
        cmx::SuiteOptions opts;
        opts.resamples = query_resamples;
        opts.trim_fraction = query_trim;
        opts.seed = resolve_seed(query_seed);
        const cmx::EstimatorSuite suite(sketch, query_estimator, opts);
        std::cout << "item,estimate,lo,hi,level,kind\n";
        for (const auto& item : items) {
          const auto r = suite.query(item, query_level);
          cmx::write_csv_row(std::cout, {item, cmx::format_number(r.estimate.value), cmx::format_number(r.interval.lo),
                                         cmx::format_number(r.interval.hi), cmx::format_number(query_level),
                                         std::string(cmx::to_string(r.interval.kind))});
        }
      }
    } else if (*eval) {
      std::ifstream in(eval_scenario);
      if (!in) throw std::runtime_error("cannot open " + eval_scenario);
      auto cfg = cmx::parse_scenario(in);
      // A seed in the scenario file is explicit configuration; CMX_SEED only fills in when absent.
      if (eval_seed || !cfg.seed_given) cfg.seed = resolve_seed(eval_seed, cfg.seed);
      if (!cfg.source.empty() && std::filesystem::path(cfg.source).is_relative()) {
        cfg.source = (std::filesystem::path(eval_scenario).parent_path() / cfg.source).string();
      }
      const auto report = cmx::run_scenario(cfg);
      if (eval_out_dir.empty()) {
        report.write_report_csv(std::cout);
      } else {
        std::filesystem::create_directories(eval_out_dir);
        std::ofstream rep(std::filesystem::path(eval_out_dir) / "report.csv");
        std::ofstream qs(std::filesystem::path(eval_out_dir) / "queries.csv");
        if (!rep || !qs) throw std::runtime_error("cannot write to " + eval_out_dir);
        report.write_report_csv(rep);
        report.write_queries_csv(qs);
      }
      std::cerr << "cmx: evaluated " << report.rows.size() << " estimator(s) in " << report.wall_seconds << " s\n";
    } else if (*tune) {
      cmx::GriddedDistribution base;
      if (!tune_pmf.empty()) {
        base = read_pmf(tune_pmf);
      } else if (!tune_sketch.empty()) {
        base = cmx::empirical_error_pmf(cmx::read_sketch_file(tune_sketch), tune_grid ? tune_grid : 4096);
      } else if (!tune_input.empty()) {
        cmx::IngestStats stats;
        const auto one_row = build_from_stream(tune_input, 1, static_cast<std::uint32_t>(tune_budget), resolve_seed(tune_seed), true, stats);
        base = cmx::empirical_error_pmf(one_row, tune_grid ? tune_grid : 4096);
      } else {
        throw std::invalid_argument("tune needs one of --pmf, --sketch or --input");
      }
      const auto levels = parse_levels(tune_levels);
      const auto depths = parse_depths(tune_depths);
      const auto curve = cmx::width_curve(base, tune_budget, levels, depths, tune_grid);
      std::cout << "level,r,width,is_optimal\n";
      for (std::size_t i = 0; i < levels.size(); ++i) {
        for (std::size_t j = 0; j < depths.size(); ++j) {
          cmx::write_csv_row(std::cout, {cmx::format_number(levels[i]), std::to_string(depths[j]),
                                         cmx::format_number(curve.widths[i][j]),
                                         depths[j] == curve.optimal[i] ? "true" : "false"});
        }
      }
    } else if (*exportd) {
      const auto sketch = cmx::read_sketch_file(export_sketch);
      const auto density = cmx::fit_log_concave(cmx::error_sample(sketch, {}, export_trim));
      if (export_out.empty()) {
        density.write_csv(std::cout);
      } else {
        std::ofstream out(export_out);
        if (!out) throw std::runtime_error("cannot write " + export_out);
        density.write_csv(out);
      }
      std::cerr << "cmx: " << density.knots().size() << " knots\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "cmx: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
