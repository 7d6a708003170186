#include "fedvr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "fedvr/mnist_idx.hpp"

namespace fedvr {

namespace {

Dataset take_rows(const Dataset& ds, std::int64_t from, std::int64_t count) {
  Dataset out;
  out.x = ds.x.middleRows(from, count);
  out.y.assign(ds.y.begin() + from, ds.y.begin() + from + count);
  out.num_classes = ds.num_classes;
  return out;
}

Batch whole_dataset_batch(const Dataset& ds) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(ds.size()));
  std::iota(idx.begin(), idx.end(), 0);
  return make_batch(ds, idx);
}

double metric_value(const RoundMetrics& m, MetricField f) {
  switch (f) {
    case MetricField::train_loss: return m.train_loss;
    case MetricField::train_acc: return m.train_acc;
    case MetricField::test_loss: return m.test_loss;
    case MetricField::test_acc: return m.test_acc;
    case MetricField::grad_norm_sq: return m.grad_norm_sq;
  }
  fail(Errc::invalid_argument, "unknown metric field");
}

}  // namespace

ModelSpec model_spec(const ExperimentConfig& cfg) {
  ModelSpec s;
  s.kind = cfg.model;
  s.input_dim = cfg.input_dim;
  s.hidden_dim = cfg.hidden_dim;
  s.num_classes = cfg.num_classes;
  s.l2_lambda = cfg.l2_lambda;
  return s;
}

LocalHyper local_hyper(const ExperimentConfig& cfg) {
  LocalHyper h;
  h.lr_k = cfg.k;
  h.lr_w = cfg.w;
  h.batch_size = cfg.batch_size;
  h.epochs = cfg.epochs;
  h.local_momentum_beta = cfg.local_momentum_beta;
  h.fixed_lr = cfg.fixed_lr;
  switch (cfg.algorithm) {
    case Algorithm::proposed:
      h.adaptive_lr = cfg.adaptive_lr;
      h.local_momentum = cfg.local_momentum;
      h.local_mvr = cfg.local_mvr;
      h.fedprox_mu = 0.0;
      break;
    case Algorithm::fedavg:
      h.adaptive_lr = false;
      h.local_momentum = false;
      h.local_mvr = false;
      h.fedprox_mu = 0.0;
      break;
    case Algorithm::fedprox:
      h.adaptive_lr = false;
      h.local_momentum = false;
      h.local_mvr = false;
      require(cfg.fedprox_mu > 0.0, Errc::invalid_argument,
              "fedprox needs fedprox_mu > 0");
      h.fedprox_mu = cfg.fedprox_mu;
      break;
  }
  h.validate();
  return h;
}

ServerHyper server_hyper(const ExperimentConfig& cfg) {
  ServerHyper h;
  h.num_clients = cfg.clients;
  h.participants = cfg.participants;
  h.beta_mode = cfg.beta_mode;
  h.beta0 = cfg.beta0;
  h.global_mvr = cfg.algorithm == Algorithm::proposed && cfg.global_mvr;
  h.validate();
  return h;
}

void ExperimentConfig::validate() const {
  model_spec(*this).validate();
  local_hyper(*this);
  server_hyper(*this);
  require(rounds >= 1, Errc::invalid_argument, "rounds must be positive");
  require(eval_every >= 1, Errc::invalid_argument, "eval_every must be positive");
  require(parallelism >= 0, Errc::invalid_argument, "parallelism must be nonnegative");
  require(alpha > 0.0 && std::isfinite(alpha), Errc::invalid_argument, "alpha must be positive");
  require(train_limit >= 0 && test_limit >= 0, Errc::invalid_argument,
          "data limits must be nonnegative");
  if (data == DataSource::synthetic)
    require(synth_train > 0 && synth_test > 0, Errc::invalid_argument,
            "synthetic sizes must be positive");
}

LossReport evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& ds) {
  return eval_loss(spec, params, whole_dataset_batch(ds));
}

Dataset load_train_dataset(const ExperimentConfig& cfg) {
  if (cfg.data == DataSource::mnist) {
    Dataset train = load_mnist_idx(cfg.mnist_dir + "/train-images-idx3-ubyte",
                                   cfg.mnist_dir + "/train-labels-idx1-ubyte", cfg.train_limit);
    require(train.dim() == cfg.input_dim, Errc::dimension_mismatch,
            "image files have " + std::to_string(train.dim()) + " pixels, config says " +
                std::to_string(cfg.input_dim));
    require(cfg.num_classes == train.num_classes, Errc::invalid_argument,
            "digit data has 10 classes");
    return train;
  }
  // One draw covers train + test so both splits share the same centroids;
  // the train prefix is identical to generating synth_train alone.
  const Dataset all = gen_synthetic(cfg.seed, cfg.synth_train + cfg.synth_test, cfg.input_dim,
                                    cfg.num_classes, cfg.synth_noise);
  return take_rows(all, 0, cfg.synth_train);
}

Dataset load_test_dataset(const ExperimentConfig& cfg) {
  if (cfg.data == DataSource::mnist)
    return load_mnist_idx(cfg.mnist_dir + "/t10k-images-idx3-ubyte",
                          cfg.mnist_dir + "/t10k-labels-idx1-ubyte", cfg.test_limit);
  const Dataset all = gen_synthetic(cfg.seed, cfg.synth_train + cfg.synth_test, cfg.input_dim,
                                    cfg.num_classes, cfg.synth_noise);
  return take_rows(all, cfg.synth_train, cfg.synth_test);
}

std::vector<ClientShard> partition_train(const ExperimentConfig& cfg, const Dataset& train) {
  PartitionConfig pc;
  pc.num_clients = cfg.clients;
  pc.alpha = cfg.alpha;
  pc.seed = cfg.partition_seed != 0 ? cfg.partition_seed
                                    : derive_stream(cfg.seed, stream_tag::partition);
  return dirichlet_partition(train, pc);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ReportObserver& observer) {
  cfg.validate();
  const ModelSpec spec = model_spec(cfg);
  const Dataset train = load_train_dataset(cfg);
  const Dataset test = load_test_dataset(cfg);
  const std::vector<ClientShard> shards = partition_train(cfg, train);

  Rng init_rng(derive_stream(cfg.seed, stream_tag::init_params));
  ParamVector p0 = init_params(spec, init_rng);
  ServerState server;
  server.omega_t = p0;
  server.omega_tm1 = std::move(p0);
  server.round = 1;

  const LocalHyper lh = local_hyper(cfg);
  const ServerHyper sh = server_hyper(cfg);
  const Batch full_train = whole_dataset_batch(train);
  const Batch full_test = whole_dataset_batch(test);

  int workers = cfg.parallelism;
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;

  ExperimentResult result;
  result.param_dim = spec.param_dim();
  std::int64_t steps_total = 0;

  for (std::int64_t t = 1; t <= cfg.rounds; ++t) {
    Rng part_rng(derive_stream(cfg.seed, stream_tag::participants, static_cast<std::uint64_t>(t)));
    const std::vector<int> parts = sample_participants(sh, part_rng);

    std::vector<ClientReport> reports(parts.size());
    const auto run_one = [&](std::size_t slot) {
      const int cid = parts[slot];
      Rng crng(derive_stream(cfg.seed, stream_tag::client, static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(cid)));
      reports[slot] = run_local_round(server.omega_t, server.omega_tm1, spec, train,
                                      shards[static_cast<std::size_t>(cid)], lh, crng);
    };
    const int nw = std::min<int>(workers, static_cast<int>(parts.size()));
    if (nw <= 1) {
      for (std::size_t s = 0; s < parts.size(); ++s) run_one(s);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr first_error;
      std::mutex error_mu;
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(nw));
      for (int wi = 0; wi < nw; ++wi) {
        pool.emplace_back([&] {
          for (;;) {
            const std::size_t s = next.fetch_add(1);
            if (s >= parts.size()) return;
            try {
              run_one(s);
            } catch (...) {
              std::lock_guard<std::mutex> lock(error_mu);
              if (!first_error) first_error = std::current_exception();
              return;
            }
          }
        });
      }
      for (auto& th : pool) th.join();
      if (first_error) std::rethrow_exception(first_error);
    }

    std::sort(reports.begin(), reports.end(),
              [](const ClientReport& a, const ClientReport& b) { return a.client_id < b.client_id; });
    for (const auto& r : reports) steps_total += r.steps_taken;
    if (observer)
      for (const auto& r : reports) observer(t, r);

    ParamVector m_hat;
    if (sh.global_mvr) {
      m_hat = (t == 1 || !server.m_hat_prev)
                  ? aggregate_first(reports)
                  : aggregate_mvr(reports, *server.m_hat_prev, beta_schedule(sh, t));
    } else {
      std::vector<double> weights;
      if (cfg.weighting == Weighting::sample_size) {
        double total = 0.0;
        for (const auto& r : reports)
          total += static_cast<double>(shards[static_cast<std::size_t>(r.client_id)].size());
        weights.reserve(reports.size());
        for (const auto& r : reports)
          weights.push_back(
              static_cast<double>(shards[static_cast<std::size_t>(r.client_id)].size()) / total);
      }
      m_hat = fedavg_aggregate(reports, weights);
    }
    server = apply_global(server, m_hat);

    if (t % cfg.eval_every == 0) {
      RoundMetrics m;
      m.round = t;
      const LossReport tr = eval_loss(spec, server.omega_t, full_train);
      const LossReport te = eval_loss(spec, server.omega_t, full_test);
      m.train_loss = tr.loss;
      m.train_acc = tr.accuracy;
      m.test_loss = te.loss;
      m.test_acc = te.accuracy;
      m.grad_norm_sq = grad_norm_sq(grad(spec, server.omega_t, full_train));
      double lr_sum = 0.0;
      for (const auto& r : reports) lr_sum += r.mean_lr;
      m.mean_lr = lr_sum / static_cast<double>(reports.size());
      m.participating = static_cast<std::int64_t>(reports.size());
      m.floats_sent = (sh.global_mvr ? 2 : 1) * spec.param_dim() *
                      static_cast<std::int64_t>(reports.size());
      m.local_steps_total = steps_total;
      result.metrics.push_back(m);
    }
  }

  result.final_params = server.omega_t;
  return result;
}

AssumptionEstimate probe_assumptions(const ModelSpec& spec, const Dataset& ds,
                                     const std::vector<ClientShard>& shards, int n_pairs,
                                     Rng& rng, std::int64_t batch_size) {
  spec.validate();
  ds.validate();
  require(n_pairs > 0, Errc::invalid_argument, "n_pairs must be positive");
  require(!shards.empty(), Errc::invalid_argument, "need at least one shard");
  require(batch_size > 0, Errc::invalid_argument, "batch_size must be positive");
  const std::int64_t b = std::min(batch_size, ds.size());

  ClientShard everything;
  everything.client_id = 0;
  everything.indices.resize(static_cast<std::size_t>(ds.size()));
  std::iota(everything.indices.begin(), everything.indices.end(), 0);
  const Batch full = make_batch(ds, everything.indices);

  const std::int64_t d = spec.param_dim();
  const auto draw_point = [&] {
    ParamVector p(d);
    for (std::int64_t i = 0; i < d; ++i) p[i] = 0.1 * rng.next_gauss();
    return p;
  };

  // All parameter points are drawn before any batch, so the batch stream is
  // the same for every model size.
  std::vector<ParamVector> xs, ys;
  xs.reserve(static_cast<std::size_t>(n_pairs));
  ys.reserve(static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    xs.push_back(draw_point());
    ys.push_back(draw_point());
  }

  AssumptionEstimate est;
  for (int i = 0; i < n_pairs; ++i) {
    const ParamVector gx = grad(spec, xs[static_cast<std::size_t>(i)], full);
    const ParamVector gy = grad(spec, ys[static_cast<std::size_t>(i)], full);
    const double dist = (xs[static_cast<std::size_t>(i)] - ys[static_cast<std::size_t>(i)]).norm();
    if (dist > 1e-12) est.L_hat = std::max(est.L_hat, (gx - gy).norm() / dist);
  }

  constexpr int batches_per_point = 8;
  double worst_var = 0.0;
  double gv_sum = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const ParamVector& x = xs[static_cast<std::size_t>(i)];
    const ParamVector gfull = grad(spec, x, full);
    double var = 0.0;
    for (int bi = 0; bi < batches_per_point; ++bi) {
      const Batch bb = sample_batch(ds, everything, b, rng);
      const ParamVector gb = grad(spec, x, bb);
      var += (gb - gfull).squaredNorm();
      est.G_hat = std::max(est.G_hat, gb.cwiseAbs().maxCoeff());
    }
    worst_var = std::max(worst_var, var / batches_per_point);
    for (const auto& shard : shards) {
      const Batch sb = make_batch(ds, shard.indices);
      gv_sum += (grad(spec, x, sb) - gfull).squaredNorm();
    }
  }
  est.sigma_hat = std::sqrt(worst_var);
  est.global_var_hat = gv_sum / (static_cast<double>(n_pairs) * static_cast<double>(shards.size()));
  return est;
}

std::optional<std::int64_t> rounds_to_threshold(const std::vector<RoundMetrics>& metrics,
                                                MetricField field, double threshold) {
  const bool upward = field == MetricField::train_acc || field == MetricField::test_acc;
  for (const auto& m : metrics) {
    const double v = metric_value(m, field);
    if (upward ? v >= threshold : v <= threshold) return m.round;
  }
  return std::nullopt;
}

}  // namespace fedvr
