// Command-line front end: MLMC estimation of dropout-induced predictive
// moments, rate studies, sample allocation, fixed-cost surfaces and ladder
// design. All numeric outputs are deterministic functions of the config.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "mlmcdrop/analysis.hpp"
#include "mlmcdrop/config.hpp"
#include "mlmcdrop/io.hpp"
#include "mlmcdrop/mlp.hpp"
#include "mlmcdrop/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mlmcdrop;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumeric = 4;

struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvaluatorBundle {
  std::unique_ptr<StochasticEvaluator> impl;
  std::unique_ptr<CountingEvaluator> counted;
  json description;
};

EvaluatorBundle build_evaluator(const RunConfig& cfg) {
  if (!cfg.evaluator)
    throw ConfigError("evaluator", "section required for this command");
  EvaluatorBundle b;
  if (cfg.evaluator->is_mlp) {
    auto [spec, weights] = load_weights_file(cfg.evaluator->weights_path);
    b.impl = std::make_unique<MlpEvaluator>(std::move(spec),
                                            std::move(weights));
    b.description = {{"kind", "mlp"},
                     {"weights", cfg.evaluator->weights_path}};
  } else {
    const AnalyticFamily& fam = cfg.evaluator->analytic;
    b.impl = std::make_unique<AnalyticEvaluator>(fam);
    switch (fam.kind) {
      case AnalyticKind::uniform_scaled_sine_u:
        b.description = {{"kind", "uniform_scaled_sine_u"},
                         {"delta", fam.delta}};
        break;
      case AnalyticKind::uniform_scaled_sine_f:
        b.description = {{"kind", "uniform_scaled_sine_f"},
                         {"delta", fam.delta}};
        break;
      case AnalyticKind::gaussian_location:
        b.description = {{"kind", "gaussian_location"},
                         {"mu", fam.mu},
                         {"sigma", fam.sigma}};
        break;
      case AnalyticKind::boundary_layer_noisefree:
        b.description = {{"kind", "boundary_layer_noisefree"},
                         {"epsilon", fam.epsilon}};
        break;
    }
  }
  b.counted = std::make_unique<CountingEvaluator>(*b.impl);
  return b;
}

std::vector<std::uint64_t> seeds_or_throw(const RunConfig& cfg) {
  if (cfg.seeds.empty())
    throw ConfigError("seeds.list", "section required for this command");
  return cfg.seeds;
}

std::string timestamp_dirname() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_buf{};
  gmtime_r(&now, &tm_buf);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm_buf);
  return buf;
}

fs::path prepare_output_dir(const RunConfig& cfg, bool no_timestamp,
                            const std::string& config_text) {
  fs::path dir = cfg.output.dir;
  if (cfg.output.timestamp && !no_timestamp) dir /= timestamp_dirname();
  fs::create_directories(dir);
  write_text_file(dir / "config.txt", config_text);
  return dir;
}

json envelope_base(const std::string& command, const RunConfig& cfg) {
  json env;
  env["artifact_version"] = kVersion;
  env["command"] = command;
  env["config_echo"] = emit_config(cfg);
  return env;
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericFailure("non-finite " + what);
}

std::string cost_model_name(CostModelKind kind) {
  return kind == CostModelKind::coupled ? "coupled" : "uncoupled";
}

// Resolve the integer allocation for cmd_estimate: explicit counts, or a
// rounded optimum from budget + target + cost model.
std::vector<std::uint64_t> resolve_allocation(const RunConfig& cfg,
                                              const FidelityLadder& ladder) {
  if (!cfg.allocation)
    throw ConfigError("allocation", "section required for this command");
  const AllocationConfig& a = *cfg.allocation;
  if (!a.ms.empty()) {
    if (a.ms.size() != ladder.level_count())
      throw ConfigError("allocation.ms", "size does not match the ladder");
    for (std::uint64_t m : a.ms)
      if (m < 2) throw ConfigError("allocation.ms", "every M_l must be >= 2");
    return a.ms;
  }
  if (!a.budget || !a.target)
    throw ConfigError("allocation",
                      "need ms, or budget + target (+ cost_model)");
  Allocation cont;
  if (*a.target == AllocationTarget::mean) {
    cont = allocate_mean(ladder, *a.budget, a.cost_model);
  } else {
    std::optional<MomentSet> moments;
    if (a.mu2 && a.mu4) moments = MomentSet{0.0, *a.mu2, *a.mu4};
    cont = allocate_variance(ladder, *a.budget, a.cost_model, moments);
  }
  try {
    return round_allocation(cont, ladder, *a.budget, a.cost_model).counts();
  } catch (const std::invalid_argument& e) {
    throw Infeasible(e.what());
  }
}

int cmd_estimate(const RunConfig& cfg, const std::string& config_text,
                 bool no_timestamp, fs::path* out_dir) {
  const auto seeds = seeds_or_throw(cfg);
  if (!cfg.ladder) throw ConfigError("ladder", "section required");
  const FidelityLadder ladder = cfg.ladder->build();
  const auto ms = resolve_allocation(cfg, ladder);
  EvaluatorBundle ev = build_evaluator(cfg);
  const auto xs = make_uniform_grid(cfg.grid.points, cfg.grid.xmin,
                                    cfg.grid.xmax);
  const std::size_t dim = ev.counted->output_dim();
  const std::size_t levels = ladder.level_count();

  // seed-averaged per-point estimates; the per-seed runs share nothing but
  // the evaluator
  struct Row {
    double x;
    std::size_t component;
    double y, v, s2y, s2v;
    std::vector<double> lvl_y_mean, lvl_y_var, lvl_v_mean, lvl_v_var;
  };
  std::vector<Row> rows(xs.size() * dim);
  std::uint64_t evals_coupled_per_seed = 0;
  std::uint64_t evals_uncoupled_per_seed = 0;
  std::vector<double> norm_acc_y(dim, 0.0), norm_acc_v(dim, 0.0);

  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) {
      Row& row = rows[i * dim + c];
      row.x = xs[i];
      row.component = c;
      row.y = row.v = row.s2y = row.s2v = 0.0;
      row.lvl_y_mean.assign(levels, 0.0);
      row.lvl_y_var.assign(levels, 0.0);
      row.lvl_v_mean.assign(levels, 0.0);
      row.lvl_v_var.assign(levels, 0.0);
    }

  const double inv_seeds = 1.0 / static_cast<double>(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    std::vector<GridFunction> gy(dim), gv(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      gy[c].xs = xs;
      gv[c].xs = xs;
      gy[c].values.resize(xs.size());
      gv[c].values.resize(xs.size());
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto est = mlmc_estimate(*ev.counted, {&xs[i], 1}, ladder, ms,
                                     derive_seed(seeds[s], i));
      if (s == 0 && i == 0) {
        evals_coupled_per_seed = est.evals_coupled;
        evals_uncoupled_per_seed = est.evals_uncoupled_equivalent;
      }
      for (std::size_t c = 0; c < dim; ++c) {
        Row& row = rows[i * dim + c];
        require_finite(est.y_mlmc[c], "estimate");
        row.y += est.y_mlmc[c] * inv_seeds;
        row.v += est.v_mlmc[c] * inv_seeds;
        row.s2y += est.s2_y[c] * inv_seeds;
        row.s2v += est.s2_v[c] * inv_seeds;
        for (std::size_t l = 0; l < levels; ++l) {
          row.lvl_y_mean[l] += est.level_stats[l].y_mean[c] * inv_seeds;
          row.lvl_y_var[l] += est.level_stats[l].y_var[c] * inv_seeds;
          row.lvl_v_mean[l] += est.level_stats[l].v_mean[c] * inv_seeds;
          row.lvl_v_var[l] += est.level_stats[l].v_var[c] * inv_seeds;
        }
        gy[c].values[i] = est.s2_y[c];
        gv[c].values[i] = est.s2_v[c];
      }
    }
    for (std::size_t c = 0; c < dim; ++c) {
      norm_acc_y[c] += l1_norm(gy[c]) * inv_seeds;
      norm_acc_v[c] += l1_norm(gv[c]) * inv_seeds;
    }
  }

  const std::uint64_t per_seed_total = evals_coupled_per_seed * xs.size();
  const std::uint64_t expected_calls = per_seed_total * seeds.size();
  if (ev.counted->count() != expected_calls)
    throw NumericFailure("evaluation counter mismatch: counted " +
                         std::to_string(ev.counted->count()) + ", expected " +
                         std::to_string(expected_calls));

  std::vector<std::string> header = {"x",   "component", "y_mlmc",
                                     "v_mlmc", "s2_y",  "s2_v"};
  for (std::size_t l = 0; l < levels; ++l) {
    const std::string p = "l" + std::to_string(l) + "_";
    header.push_back(p + "y_mean");
    header.push_back(p + "y_var");
    header.push_back(p + "v_mean");
    header.push_back(p + "v_var");
    header.push_back(p + "m");
  }
  CsvWriter csv(header);
  for (const Row& row : rows) {
    std::vector<std::string> cells = {fmt_double(row.x),
                                      std::to_string(row.component),
                                      fmt_double(row.y),
                                      fmt_double(row.v),
                                      fmt_double(row.s2y),
                                      fmt_double(row.s2v)};
    for (std::size_t l = 0; l < levels; ++l) {
      cells.push_back(fmt_double(row.lvl_y_mean[l]));
      cells.push_back(fmt_double(row.lvl_y_var[l]));
      cells.push_back(fmt_double(row.lvl_v_mean[l]));
      cells.push_back(fmt_double(row.lvl_v_var[l]));
      cells.push_back(std::to_string(ms[l]));
    }
    csv.append_row(cells);
  }

  json env = envelope_base("estimate", cfg);
  env["evaluator"] = ev.description;
  env["grid"] = {{"points", cfg.grid.points},
                 {"xmin", cfg.grid.xmin},
                 {"xmax", cfg.grid.xmax}};
  env["ladder"] = ladder.ts;
  env["allocation"] = ms;
  env["seeds"] = seeds;
  env["costs"] = {
      {"evals_coupled_per_seed", per_seed_total},
      {"evals_uncoupled_equivalent_per_seed",
       evals_uncoupled_per_seed * xs.size()},
      {"evals_counted_total", ev.counted->count()}};
  env["summary"] = {{"norm_s2_y", norm_acc_y}, {"norm_s2_v", norm_acc_v}};
  json points = json::array();
  for (const Row& row : rows)
    points.push_back({{"x", row.x},
                      {"component", row.component},
                      {"y_mlmc", row.y},
                      {"v_mlmc", row.v},
                      {"s2_y", row.s2y},
                      {"s2_v", row.s2v}});
  env["estimates"] = points;

  const fs::path dir = prepare_output_dir(cfg, no_timestamp, config_text);
  *out_dir = dir;
  csv.write(dir / "estimates.csv");
  write_text_file(dir / "result.json", env.dump(2) + "\n");
  std::cout << "estimate: wrote " << (dir / "estimates.csv").string() << "\n";
  return 0;
}

int cmd_rate_study(const RunConfig& cfg, const std::string& config_text,
                   bool no_timestamp, fs::path* out_dir) {
  const auto seeds = seeds_or_throw(cfg);
  if (!cfg.rate) throw ConfigError("rate", "section required");
  EvaluatorBundle ev = build_evaluator(cfg);
  const auto xs = make_uniform_grid(cfg.grid.points, cfg.grid.xmin,
                                    cfg.grid.xmax);
  const auto study = rate_study(*ev.counted, xs, cfg.rate->t_list,
                                cfg.rate->m_outer, seeds);
  const std::size_t dim = ev.counted->output_dim();

  CsvWriter rate_csv({"seed", "component", "t", "norm_s2_y", "norm_s2_v"});
  for (std::size_t s = 0; s < seeds.size(); ++s)
    for (std::size_t k = 0; k < study.ts.size(); ++k)
      for (std::size_t c = 0; c < dim; ++c)
        rate_csv.append_row({std::to_string(seeds[s]), std::to_string(c),
                             std::to_string(study.ts[k]),
                             fmt_double(study.norm_s2_y[s][k][c]),
                             fmt_double(study.norm_s2_v[s][k][c])});
  for (std::size_t k = 0; k < study.ts.size(); ++k)
    for (std::size_t c = 0; c < dim; ++c)
      rate_csv.append_row({"mean", std::to_string(c),
                           std::to_string(study.ts[k]),
                           fmt_double(study.avg_norm_s2_y[k][c]),
                           fmt_double(study.avg_norm_s2_v[k][c])});

  CsvWriter slopes_csv(
      {"component", "target", "slope", "ci_lower", "ci_upper", "confidence"});
  for (std::size_t c = 0; c < dim; ++c) {
    if (study.fit_y[c])
      slopes_csv.append_row({std::to_string(c), "s2_y",
                             fmt_double(study.fit_y[c]->slope),
                             fmt_double(study.fit_y[c]->ci_lower),
                             fmt_double(study.fit_y[c]->ci_upper),
                             fmt_double(study.fit_y[c]->confidence)});
    if (study.fit_v[c])
      slopes_csv.append_row({std::to_string(c), "s2_v",
                             fmt_double(study.fit_v[c]->slope),
                             fmt_double(study.fit_v[c]->ci_lower),
                             fmt_double(study.fit_v[c]->ci_upper),
                             fmt_double(study.fit_v[c]->confidence)});
  }

  json env = envelope_base("rate-study", cfg);
  env["evaluator"] = ev.description;
  env["t_list"] = cfg.rate->t_list;
  env["m_outer"] = cfg.rate->m_outer;
  env["seeds"] = seeds;
  env["degenerate"] = study.degenerate;
  env["evals_counted_total"] = ev.counted->count();

  const fs::path dir = prepare_output_dir(cfg, no_timestamp, config_text);
  *out_dir = dir;
  rate_csv.write(dir / "rate.csv");
  slopes_csv.write(dir / "slopes.csv");
  write_text_file(dir / "result.json", env.dump(2) + "\n");
  std::cout << "rate-study: wrote " << (dir / "slopes.csv").string() << "\n";
  return 0;
}

int cmd_allocate(const RunConfig& cfg, const std::string& config_text,
                 bool no_timestamp, fs::path* out_dir) {
  if (!cfg.ladder) throw ConfigError("ladder", "section required");
  if (!cfg.allocation || !cfg.allocation->budget || !cfg.allocation->target)
    throw ConfigError("allocation", "need budget and target");
  const FidelityLadder ladder = cfg.ladder->build();
  const AllocationConfig& a = *cfg.allocation;

  Allocation cont;
  std::optional<MomentSet> moments;
  if (a.mu2 && a.mu4) moments = MomentSet{0.0, *a.mu2, *a.mu4};
  if (*a.target == AllocationTarget::mean)
    cont = allocate_mean(ladder, *a.budget, a.cost_model);
  else
    cont = allocate_variance(ladder, *a.budget, a.cost_model, moments);

  Allocation rounded;
  try {
    rounded = round_allocation(cont, ladder, *a.budget, a.cost_model);
  } catch (const std::invalid_argument& e) {
    throw Infeasible(e.what());
  }
  const auto counts = rounded.counts();

  const MomentSet pred_moments =
      moments ? *moments : MomentSet{0.0, 1.0, 3.0};
  const auto pred_cont =
      theoretical_mlmc_variances(pred_moments, ladder, cont.ms);
  std::vector<double> rounded_d(rounded.ms.begin(), rounded.ms.end());
  const auto pred_round =
      theoretical_mlmc_variances(pred_moments, ladder, rounded_d);

  json out;
  out["artifact_version"] = kVersion;
  out["config_echo"] = emit_config(cfg);
  out["ladder"] = ladder.ts;
  out["budget"] = *a.budget;
  out["target"] =
      *a.target == AllocationTarget::mean ? "mean" : "variance";
  out["cost_model"] = cost_model_name(a.cost_model);
  out["moments"] =
      moments ? json{{"mu2", *a.mu2}, {"mu4", *a.mu4}}
              : json{{"closure", "zero_excess_kurtosis_normalised"}};
  out["continuous"] = cont.ms;
  out["rounded"] = counts;
  out["cost"] = {
      {"coupled", cost(ladder, counts, CostModelKind::coupled)},
      {"uncoupled", cost(ladder, counts, CostModelKind::uncoupled)}};
  out["predicted_e_s2"] = {
      {"continuous", {{"e_s2_y", pred_cont.e_s2_y},
                      {"e_s2_v", pred_cont.e_s2_v}}},
      {"rounded", {{"e_s2_y", pred_round.e_s2_y},
                   {"e_s2_v", pred_round.e_s2_v}}}};

  const fs::path dir = prepare_output_dir(cfg, no_timestamp, config_text);
  *out_dir = dir;
  write_text_file(dir / "allocation.json", out.dump(2) + "\n");
  std::cout << "allocate: wrote " << (dir / "allocation.json").string()
            << "\n";
  return 0;
}

int cmd_fixed_cost(const RunConfig& cfg, const std::string& config_text,
                   bool no_timestamp, fs::path* out_dir) {
  const auto seeds = seeds_or_throw(cfg);
  if (!cfg.ladder) throw ConfigError("ladder", "section required");
  if (!cfg.allocation || !cfg.allocation->budget)
    throw ConfigError("allocation.budget", "required");
  const FidelityLadder ladder = cfg.ladder->build();
  const AllocationConfig& a = *cfg.allocation;
  const double budget_d = *a.budget;
  if (budget_d != std::floor(budget_d) || budget_d < 1.0)
    throw ConfigError("allocation.budget",
                      "fixed-cost enumeration needs a whole budget");
  const std::uint64_t budget = static_cast<std::uint64_t>(budget_d);
  EvaluatorBundle ev = build_evaluator(cfg);
  const auto xs = make_uniform_grid(cfg.grid.points, cfg.grid.xmin,
                                    cfg.grid.xmax);

  VarianceSurface surface;
  try {
    surface = variance_surface(*ev.counted, xs, ladder, budget, a.cost_model,
                               a.min_m, seeds);
  } catch (const std::invalid_argument& e) {
    throw Infeasible(e.what());
  }
  const std::size_t dim = ev.counted->output_dim();
  const std::size_t levels = ladder.level_count();

  std::vector<std::string> header;
  for (std::size_t l = 0; l < levels; ++l)
    header.push_back("m" + std::to_string(l));
  header.insert(header.end(),
                {"component", "norm_s2_y", "norm_s2_v", "row_kind"});
  CsvWriter csv(header);
  auto emit_row = [&](const SurfaceRow& row, std::size_t c,
                      const std::string& kind) {
    std::vector<std::string> cells;
    for (std::uint64_t m : row.ms) cells.push_back(std::to_string(m));
    cells.push_back(std::to_string(c));
    cells.push_back(fmt_double(row.norm_s2_y[c]));
    cells.push_back(fmt_double(row.norm_s2_v[c]));
    cells.push_back(kind);
    csv.append_row(cells);
  };
  for (const SurfaceRow& row : surface.rows)
    for (std::size_t c = 0; c < dim; ++c) emit_row(row, c, "data");
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t r : surface.argmin_y[c])
      emit_row(surface.rows[r], c, "argmin_y");
    for (std::size_t r : surface.argmin_v[c])
      emit_row(surface.rows[r], c, "argmin_v");
  }
  auto emit_optimum = [&](const Allocation& alloc, const std::string& kind) {
    std::vector<std::string> cells;
    for (double m : alloc.ms) cells.push_back(fmt_double(m));
    cells.insert(cells.end(), {"", "", "", kind});
    csv.append_row(cells);
  };
  emit_optimum(surface.continuous_mean, "optimum_mean");
  emit_optimum(surface.continuous_variance, "optimum_variance");

  json env = envelope_base("fixed-cost", cfg);
  env["evaluator"] = ev.description;
  env["ladder"] = ladder.ts;
  env["budget"] = budget;
  env["cost_model"] = cost_model_name(a.cost_model);
  env["min_m"] = a.min_m;
  env["seeds"] = seeds;
  env["feasible_allocations"] = surface.rows.size();
  env["evals_counted_total"] = ev.counted->count();

  const fs::path dir = prepare_output_dir(cfg, no_timestamp, config_text);
  *out_dir = dir;
  csv.write(dir / "surface.csv");
  write_text_file(dir / "result.json", env.dump(2) + "\n");
  std::cout << "fixed-cost: wrote " << (dir / "surface.csv").string() << "\n";
  return 0;
}

int cmd_ladder(const RunConfig& cfg, const std::string& config_text,
               bool no_timestamp, fs::path* out_dir) {
  if (!cfg.ladder) throw ConfigError("ladder", "section required");
  const FidelityLadder ladder = cfg.ladder->build();

  json out;
  out["artifact_version"] = kVersion;
  out["config_echo"] = emit_config(cfg);
  out["ts"] = ladder.ts;
  out["levels"] = ladder.level_count();
  // closure-normalised level weights: the per-level increment variances up
  // to the common factors mu2 (mean) and 2 mu2^2 (variance)
  json weights;
  {
    std::vector<double> mean_w(ladder.level_count());
    std::vector<double> var_w(ladder.level_count());
    mean_w[0] = 1.0 / ladder.ts[0];
    var_w[0] = 1.0 / (ladder.ts[0] - 1.0);
    for (std::size_t l = 1; l < ladder.level_count(); ++l) {
      mean_w[l] = 1.0 / ladder.ts[l - 1] - 1.0 / ladder.ts[l];
      var_w[l] = 1.0 / (ladder.ts[l - 1] - 1.0) - 1.0 / (ladder.ts[l] - 1.0);
    }
    weights = {{"mean", mean_w}, {"variance_closure", var_w}};
  }
  out["level_weights"] = weights;

  const fs::path dir = prepare_output_dir(cfg, no_timestamp, config_text);
  *out_dir = dir;
  write_text_file(dir / "ladder.json", out.dump(2) + "\n");
  std::cout << "ladder: wrote " << (dir / "ladder.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multilevel Monte Carlo for dropout-induced moments"};
  app.require_subcommand(1);

  std::string config_path;
  bool no_timestamp = false;
  const char* names[] = {"estimate", "rate-study", "allocate", "fixed-cost",
                         "ladder"};
  const char* descs[] = {
      "MLMC mean/variance estimates over the evaluation grid",
      "sampling-variance decay versus inner fidelity, with slope fits",
      "continuous and rounded optimal sample allocations",
      "empirical variance surface over all allocations at fixed cost",
      "build and inspect a fidelity ladder"};
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--config", config_path, "run configuration file")
        ->required();
    sub->add_flag("--no-timestamp", no_timestamp,
                  "write into the output dir itself (golden-file runs)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  const auto started = std::chrono::steady_clock::now();
  std::string command;
  int rc = 0;
  try {
    std::string config_text = read_text_file(config_path);
    RunConfig cfg = parse_config(config_text);
    if (const char* env_seed = std::getenv("MLMCDROP_SEED")) {
      cfg.seeds = {detail::parse_uint("env.MLMCDROP_SEED", env_seed)};
      // keep the echoed config true to what actually ran
      config_text = emit_config(cfg);
    }

    command = app.get_subcommands().front()->get_name();
    fs::path out_dir;
    if (command == "estimate")
      rc = cmd_estimate(cfg, config_text, no_timestamp, &out_dir);
    else if (command == "rate-study")
      rc = cmd_rate_study(cfg, config_text, no_timestamp, &out_dir);
    else if (command == "allocate")
      rc = cmd_allocate(cfg, config_text, no_timestamp, &out_dir);
    else if (command == "fixed-cost")
      rc = cmd_fixed_cost(cfg, config_text, no_timestamp, &out_dir);
    else if (command == "ladder")
      rc = cmd_ladder(cfg, config_text, no_timestamp, &out_dir);

    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    // wall clock lives in run.log, not result.json, so reruns stay
    // byte-identical in the tracked artifacts
    std::ostringstream log;
    log << "command: " << command << "\n"
        << "wall_clock_seconds: " << elapsed << "\n";
    if (!out_dir.empty()) write_text_file(out_dir / "run.log", log.str());
    std::cout << command << ": wall_clock_seconds " << elapsed << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return rc;
}
