// Command-line front end for the federated training simulator.
//
// Exit codes: 0 success; 2 configuration problems (bad config text, invalid
// values); 3 runtime problems (missing or corrupt data files, partition
// failure, numeric blowup, unwritable output); CLI11 reports its own usage
// errors.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedvr/config.hpp"
#include "fedvr/csv.hpp"

namespace {

using namespace fedvr;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value pairs
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file (key = value lines)");
  cmd->add_option("--set", opts.overrides, "override one key, e.g. --set rounds=20")
      ->take_all();
  cmd->add_option("--out", opts.out_dir, "output directory for CSV files");
  cmd->add_option("--seed", opts.seed, "master seed override");
}

ExperimentConfig build_config(const CommonOpts& opts, ExperimentConfig base) {
  if (!opts.config_path.empty()) base = parse_config(opts.config_path, std::move(base));
  for (const auto& kv : opts.overrides) base = parse_config_text(kv, std::move(base));
  if (opts.seed) base.seed = *opts.seed;
  base.validate();
  return base;
}

std::string out_path(const CommonOpts& opts, const std::string& name) {
  std::filesystem::create_directories(opts.out_dir);
  return (std::filesystem::path(opts.out_dir) / name).string();
}

void print_summary(const char* label, const ExperimentResult& res) {
  if (res.metrics.empty()) {
    std::printf("%s: no evaluated rounds\n", label);
    return;
  }
  const RoundMetrics& last = res.metrics.back();
  std::printf("%s: round %lld  train_loss %.4f  train_acc %.4f  test_acc %.4f  "
              "grad_norm_sq %.3e  params %lld\n",
              label, static_cast<long long>(last.round), last.train_loss, last.train_acc,
              last.test_acc, last.grad_norm_sq, static_cast<long long>(res.param_dim));
}

int run_cmd(const CommonOpts& opts) {
  const ExperimentConfig cfg = build_config(opts, ExperimentConfig{});
  const ExperimentResult res = run_experiment(cfg);
  const std::string path = out_path(opts, "metrics.csv");
  write_metrics_csv(path, res.metrics);
  print_summary("run", res);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int ablate_cmd(const CommonOpts& opts, int row, bool paper_scale) {
  const ExperimentConfig cfg = build_config(opts, preset_ablation(row, paper_scale));
  const ExperimentResult res = run_experiment(cfg);
  const std::string path = out_path(opts, "ablation_row" + std::to_string(row) + ".csv");
  write_metrics_csv(path, res.metrics);
  print_summary(("row" + std::to_string(row)).c_str(), res);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int compare_cmd(const CommonOpts& opts, double target_acc) {
  static constexpr Algorithm algs[] = {Algorithm::proposed, Algorithm::fedavg, Algorithm::fedprox};
  static constexpr const char* names[] = {"proposed", "fedavg", "fedprox"};
  std::printf("%-10s %-10s %-12s %-12s\n", "algorithm", "final_acc", "rounds_to", "floats/round");
  for (int i = 0; i < 3; ++i) {
    ExperimentConfig cfg = build_config(opts, preset_desk());
    cfg.algorithm = algs[i];
    const ExperimentResult res = run_experiment(cfg);
    write_metrics_csv(out_path(opts, std::string("compare_") + names[i] + ".csv"), res.metrics);
    const auto hit = rounds_to_threshold(res.metrics, MetricField::test_acc, target_acc);
    const RoundMetrics& last = res.metrics.back();
    std::printf("%-10s %-10.4f %-12s %-12lld\n", names[i], last.test_acc,
                hit ? std::to_string(*hit).c_str() : "never",
                static_cast<long long>(last.floats_sent));
  }
  return 0;
}

int probe_cmd(const CommonOpts& opts, int pairs) {
  const ExperimentConfig cfg = build_config(opts, ExperimentConfig{});
  const Dataset train = load_train_dataset(cfg);
  const auto shards = partition_train(cfg, train);
  Rng rng(derive_stream(cfg.seed, stream_tag::probe));
  const AssumptionEstimate est =
      probe_assumptions(model_spec(cfg), train, shards, pairs, rng, cfg.batch_size);
  std::printf("L_hat          %.6g\n", est.L_hat);
  std::printf("sigma_hat      %.6g\n", est.sigma_hat);
  std::printf("G_hat          %.6g\n", est.G_hat);
  std::printf("global_var_hat %.6g\n", est.global_var_hat);
  return 0;
}

int partition_stats_cmd(const CommonOpts& opts) {
  const ExperimentConfig cfg = build_config(opts, ExperimentConfig{});
  const Dataset train = load_train_dataset(cfg);
  const auto shards = partition_train(cfg, train);
  std::fputs(partition_stats_report(train, shards).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated training simulator"};
  app.require_subcommand(1);

  CommonOpts run_opts, ablate_opts, compare_opts, probe_opts, pstats_opts;
  int row = 7;
  bool paper_scale = false;
  double target_acc = 0.85;
  int pairs = 8;

  CLI::App* run = app.add_subcommand("run", "one experiment from a config");
  add_common(run, run_opts);

  CLI::App* ablate = app.add_subcommand("ablate", "one mechanism-grid row");
  ablate->add_option("--row", row, "grid row 1..7")->required()->check(CLI::Range(1, 7));
  ablate->add_flag("--paper-scale", paper_scale, "full-size schedule instead of desk scale");
  add_common(ablate, ablate_opts);

  CLI::App* compare = app.add_subcommand("compare", "proposed vs fedavg vs fedprox");
  compare->add_option("--target-acc", target_acc, "accuracy threshold for rounds-to table");
  add_common(compare, compare_opts);

  CLI::App* probe = app.add_subcommand("probe", "empirical smoothness/noise estimates");
  probe->add_option("--pairs", pairs, "parameter points sampled")->check(CLI::PositiveNumber);
  add_common(probe, probe_opts);

  CLI::App* pstats = app.add_subcommand("partition-stats", "shard sizes and class skew");
  add_common(pstats, pstats_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_cmd(run_opts);
    if (ablate->parsed()) return ablate_cmd(ablate_opts, row, paper_scale);
    if (compare->parsed()) return compare_cmd(compare_opts, target_acc);
    if (probe->parsed()) return probe_cmd(probe_opts, pairs);
    if (pstats->parsed()) return partition_stats_cmd(pstats_opts);
  } catch (const FedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    const bool config_side = e.code() == Errc::config_error || e.code() == Errc::invalid_argument;
    return config_side ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
