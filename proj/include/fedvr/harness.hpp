#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedvr/server_update.hpp"

namespace fedvr {

enum class Algorithm { proposed, fedavg, fedprox };
enum class DataSource { synthetic, mnist };
enum class Weighting { uniform, sample_size };

// Everything a run needs, flat so the text config maps onto it one key per
// field. `algorithm` overrides the mechanism flags: fedavg and fedprox force
// plain SGD locally and plain averaging globally (fedprox adds its proximal
// term); proposed uses the four flags as given.
struct ExperimentConfig {
  // model
  ModelKind model = ModelKind::mlp2;
  int input_dim = 784;
  int hidden_dim = 600;
  int num_classes = 10;
  double l2_lambda = 1e-4;
  // data
  DataSource data = DataSource::synthetic;
  std::string mnist_dir = "data/mnist";
  std::int64_t train_limit = 0;  // 0 = whole file
  std::int64_t test_limit = 0;
  std::int64_t synth_train = 512;
  std::int64_t synth_test = 256;
  double synth_noise = 0.15;
  // partition
  int clients = 10;
  double alpha = 0.5;
  std::uint64_t partition_seed = 0;  // 0 = derive from seed
  // algorithm
  Algorithm algorithm = Algorithm::proposed;
  bool adaptive_lr = true;
  bool local_momentum = true;
  bool local_mvr = true;
  bool global_mvr = true;
  double k = 0.1;
  double w = 1.0;
  double fixed_lr = 0.1;
  double local_momentum_beta = 0.1;
  double fedprox_mu = 0.1;  // read only when algorithm = fedprox
  BetaMode beta_mode = BetaMode::constant;
  double beta0 = 0.9;
  // schedule
  std::int64_t batch_size = 50;
  std::int64_t epochs = 2;
  std::int64_t rounds = 60;
  int participants = 5;
  Weighting weighting = Weighting::uniform;
  std::uint64_t seed = 1;
  std::int64_t eval_every = 1;
  int parallelism = 0;  // client workers; 0 = hardware concurrency

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// The flags-after-algorithm-override view of a config.
LocalHyper local_hyper(const ExperimentConfig& cfg);
ServerHyper server_hyper(const ExperimentConfig& cfg);
ModelSpec model_spec(const ExperimentConfig& cfg);

// One evaluated round. floats_sent counts this round's upload volume:
// 2*d*R when the server consumes both delta and delta_diff, d*R when it
// averages deltas only. local_steps_total accumulates every client update
// since round 1 (including rounds that were not evaluated), so progress can
// be plotted against local work instead of rounds; it is not serialized.
struct RoundMetrics {
  std::int64_t round = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double grad_norm_sq = 0.0;  // full training objective at the post-update iterate
  double mean_lr = 0.0;
  std::int64_t participating = 0;
  std::int64_t floats_sent = 0;
  std::int64_t local_steps_total = 0;
};

struct ExperimentResult {
  std::vector<RoundMetrics> metrics;
  ParamVector final_params;
  std::int64_t param_dim = 0;
};

// Called once per client report each round, after the deterministic sort.
using ReportObserver = std::function<void(std::int64_t round, const ClientReport&)>;

// Data access shared by the loop and the CLI inspection verbs. Synthetic
// train and test are split from one draw, so they share centroids.
Dataset load_train_dataset(const ExperimentConfig& cfg);
Dataset load_test_dataset(const ExperimentConfig& cfg);
std::vector<ClientShard> partition_train(const ExperimentConfig& cfg, const Dataset& train);

// The full loop: load data, partition, init, then per round sample
// participants, run their local rounds (worker threads; results identical for
// any worker count), aggregate by the configured rule, apply, and evaluate
// the post-update iterate every eval_every rounds.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ReportObserver& observer = {});

// Loss and accuracy over a whole dataset.
LossReport evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& ds);

// Crude empirical stand-ins for the analysis constants, probed at random
// parameter points near the origin: L_hat bounds the gradient's Lipschitz
// ratio, sigma_hat the per-batch gradient noise (sqrt of the worst observed
// variance), G_hat the largest stochastic-gradient coordinate, and
// global_var_hat the mean squared client-vs-global gradient gap.
struct AssumptionEstimate {
  double L_hat = 0.0;
  double sigma_hat = 0.0;
  double G_hat = 0.0;
  double global_var_hat = 0.0;
};

AssumptionEstimate probe_assumptions(const ModelSpec& spec, const Dataset& ds,
                                     const std::vector<ClientShard>& shards, int n_pairs,
                                     Rng& rng, std::int64_t batch_size = 16);

enum class MetricField { train_loss, train_acc, test_loss, test_acc, grad_norm_sq };

// First evaluated round where the field crosses the threshold: >= for the
// accuracies, <= for the losses and the gradient norm. nullopt if never.
std::optional<std::int64_t> rounds_to_threshold(const std::vector<RoundMetrics>& metrics,
                                                MetricField field, double threshold);

}  // namespace fedvr
