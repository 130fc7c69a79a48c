// Command-line driver: run, sweep, aggregate, plot-data and verify.

#include "idlearn/config.hpp"
#include "idlearn/io.hpp"
#include "idlearn/verify.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using idlearn::ConfigError;
using idlearn::IoError;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kRuntimeAbort = 2, kVerifyFailed = 3 };

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file (defaults when omitted)");
  cmd->add_option("--set", args.overrides, "Override a config value, key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "Seed override (grid base seed for sweeps)");
}

idlearn::LoadedConfig load(const CommonArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  idlearn::LoadedConfig loaded =
      args.config_path.empty() ? idlearn::load_config_json(json::object(), overrides)
                               : idlearn::load_config(args.config_path, overrides);
  if (args.seed) {
    loaded.config.seed = *args.seed;
    if (loaded.grid) {
      loaded.grid->base.seed = *args.seed;
      loaded.grid->base_seed = *args.seed;
    }
  }
  return loaded;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text)) throw IoError("cannot write '" + path.string() + "'");
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  fn(os);
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string run_dir_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return buf;
}

int cmd_run(const CommonArgs& args, bool traces) {
  const auto loaded = load(args);
  const fs::path out = args.out_dir;
  idlearn::ensure_writable_dir(out);
  write_text(out / "config.json", idlearn::config_to_json(loaded.config).dump(2) + "\n");

  idlearn::ErrorModel last_model;
  const auto run = idlearn::run_learning(
      loaded.config, [&](int k, const idlearn::EpisodeResult& ep, const idlearn::ErrorModel& model,
                         const idlearn::Dataset&) {
        last_model = model;
        if (traces) {
          char name[32];
          std::snprintf(name, sizeof(name), "trace_%02d.csv", k);
          write_with(out / name, [&](std::ostream& os) { idlearn::write_trace_csv(ep.trace, os); });
        }
      });
  write_with(out / "metrics.csv",
             [&](std::ostream& os) { idlearn::write_metrics_csv(run.iterations, os); });
  if (last_model.trained()) idlearn::save_checkpoint(last_model, out / "model.json");

  for (const auto& m : run.iterations) {
    std::printf("iter %2d  pos_err %.5f  fb %.4f  converged %d  steps %d%s\n", m.iteration,
                m.pos_err_mean, m.fb_mag_mean, int(m.converged), m.steps_used,
                m.aborted ? "  ABORTED" : "");
  }
  return run.aborted ? kRuntimeAbort : kOk;
}

idlearn::AggregateResult aggregate_and_write(const std::vector<idlearn::RunMetrics>& runs,
                                             const std::vector<std::string>& group_by,
                                             const fs::path& out) {
  const auto agg = idlearn::aggregate(runs, group_by);
  write_with(out / "aggregate.csv", [&](std::ostream& os) { idlearn::write_aggregate_csv(agg, os); });
  return agg;
}

int cmd_sweep(const CommonArgs& args, int threads, const std::string& group_by) {
  const auto loaded = load(args);
  const idlearn::SweepGrid grid = loaded.grid ? *loaded.grid : idlearn::SweepGrid::single(loaded.config);
  const auto configs = grid.expand();
  const auto groups = split_list(group_by);
  for (const auto& cfg : configs) idlearn::group_key(cfg, groups);  // rejects unknown fields early

  const fs::path out = args.out_dir;
  idlearn::ensure_writable_dir(out);
  idlearn::ensure_writable_dir(out / "runs");
  idlearn::ensure_writable_dir(out / "plot");
  auto resolved = idlearn::config_to_json(grid.base);
  resolved["grid"] = idlearn::grid_to_json(grid);
  write_text(out / "config.json", resolved.dump(2) + "\n");

  std::fprintf(stderr, "sweep: %zu runs\n", configs.size());
  const auto runs = idlearn::run_sweep(configs, threads);
  int failures = 0;
  int aborted = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path dir = out / "runs" / run_dir_name(i);
    idlearn::ensure_writable_dir(dir);
    write_text(dir / "config.json", idlearn::config_to_json(runs[i].config).dump(2) + "\n");
    write_with(dir / "metrics.csv",
               [&](std::ostream& os) { idlearn::write_metrics_csv(runs[i].iterations, os); });
    if (!runs[i].error.empty()) {
      write_text(dir / "error.txt", runs[i].error + "\n");
      ++failures;
    }
    aborted += runs[i].aborted ? 1 : 0;
  }
  const auto agg = aggregate_and_write(runs, groups, out);
  idlearn::write_plot_data(agg, out / "plot");
  std::fprintf(stderr, "sweep: %zu runs, %d aborted, %d failed\n", runs.size(), aborted, failures);
  return failures > 0 ? kRuntimeAbort : kOk;
}

// Loads every runs/<n>/ directory written by `sweep`.
std::vector<idlearn::RunMetrics> load_runs(const fs::path& in) {
  const fs::path runs_dir = in / "runs";
  if (!fs::is_directory(runs_dir)) throw IoError("'" + runs_dir.string() + "' is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<idlearn::RunMetrics> runs;
  for (const auto& dir : dirs) {
    idlearn::RunMetrics run;
    run.config = idlearn::load_config(dir / "config.json").config;
    std::ifstream is(dir / "metrics.csv");
    if (!is) throw IoError("cannot read '" + (dir / "metrics.csv").string() + "'");
    run.iterations = idlearn::read_metrics_csv(is);
    run.aborted = std::any_of(run.iterations.begin(), run.iterations.end(),
                              [](const idlearn::IterationMetrics& m) { return m.aborted; });
    if (fs::exists(dir / "error.txt")) run.error = "recorded failure";
    runs.push_back(std::move(run));
  }
  if (runs.empty()) throw IoError("no runs under '" + runs_dir.string() + "'");
  return runs;
}

int cmd_aggregate(const std::string& in, const std::string& out_dir, const std::string& group_by) {
  const fs::path out = out_dir;
  idlearn::ensure_writable_dir(out);
  const auto runs = load_runs(in);
  const auto agg = aggregate_and_write(runs, split_list(group_by), out);
  std::fprintf(stderr, "aggregate: %zu runs, %zu groups\n", runs.size(), agg.groups.size());
  return kOk;
}

int cmd_plot_data(const std::string& in, const std::string& out_dir, const std::string& group_by) {
  const fs::path out = out_dir;
  idlearn::ensure_writable_dir(out);
  const auto agg = idlearn::aggregate(load_runs(in), split_list(group_by));
  for (const auto& p : idlearn::write_plot_data(agg, out)) std::printf("%s\n", p.string().c_str());
  return kOk;
}

int cmd_verify(const CommonArgs& args) {
  const auto loaded = load(args);
  std::optional<fs::path> out;
  if (!args.out_dir.empty()) {
    out = args.out_dir;
    idlearn::ensure_writable_dir(*out);
    write_text(*out / "config.json", idlearn::config_to_json(loaded.config).dump(2) + "\n");
  }
  const auto checks = idlearn::run_checks(loaded.config);
  json report;
  bool all = true;
  report["checks"] = json::array();
  for (const auto& c : checks) {
    report["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    all = all && c.passed;
  }
  report["passed"] = all;
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (out) write_text(*out / "verify.json", text);
  return all ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative inverse-dynamics error-model learning on a simulated 2D system"};
  app.require_subcommand(1);

  CommonArgs run_args;
  bool traces = false;
  auto* run = app.add_subcommand("run", "Execute one learning run");
  add_config_options(run, run_args);
  run->add_option("--out", run_args.out_dir, "Output directory")->required();
  run->add_flag("--trace", traces, "Also write per-iteration step traces");

  CommonArgs sweep_args;
  int threads = 0;
  std::string sweep_group = "controller,gain,data_source";
  auto* sweep = app.add_subcommand("sweep", "Execute every run of the config's grid");
  add_config_options(sweep, sweep_args);
  sweep->add_option("--out", sweep_args.out_dir, "Output directory")->required();
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");
  sweep->add_option("--group-by", sweep_group, "Comma-separated grouping fields")->capture_default_str();

  std::string agg_in, agg_out, agg_group = "controller,gain,data_source";
  auto* agg = app.add_subcommand("aggregate", "Aggregate the runs of a sweep directory");
  agg->add_option("--in", agg_in, "Sweep output directory")->required();
  agg->add_option("--out", agg_out, "Output directory")->required();
  agg->add_option("--group-by", agg_group, "Comma-separated grouping fields")->capture_default_str();

  std::string plot_in, plot_out, plot_group = "controller,gain,data_source";
  auto* plot = app.add_subcommand("plot-data", "Write per-group learning curves of a sweep");
  plot->add_option("--in", plot_in, "Sweep output directory")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();
  plot->add_option("--group-by", plot_group, "Comma-separated grouping fields")->capture_default_str();

  CommonArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Run the oracle checks and print a JSON report");
  add_config_options(verify, verify_args);
  verify->add_option("--out", verify_args.out_dir, "Optional directory for the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_args, traces);
    if (*sweep) return cmd_sweep(sweep_args, threads, sweep_group);
    if (*agg) return cmd_aggregate(agg_in, agg_out, agg_group);
    if (*plot) return cmd_plot_data(plot_in, plot_out, plot_group);
    if (*verify) return cmd_verify(verify_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const IoError& e) {
    std::fprintf(stderr, "output error: %s\n", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kRuntimeAbort;
  }
  return kOk;
}
