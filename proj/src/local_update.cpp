#include "fedvr/local_update.hpp"

#include <cmath>
#include <numeric>

namespace fedvr {

namespace {

// Batch gradient plus the proximal pull mu * (params - anchor). The branch is
// skipped entirely at mu = 0 so the plain path stays bitwise identical to a
// bare gradient.
ParamVector local_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                       const ParamVector& anchor, double mu) {
  ParamVector g = grad(spec, params, batch);
  if (mu > 0.0) {
    g += mu * (params - anchor);
    check_finite(g, "proximal gradient");
  }
  return g;
}

// Moves both sequences one step with a shared step size and advances the
// counters. Pre-step copies are taken first; they are what the next
// variance-reduced correction differences against.
void apply_update(ClientRoundState& st, double eta, const ParamVector& dir_cur,
                  const ParamVector& dir_hat) {
  st.omega_prev = st.omega_cur;
  st.omega_hat_prev = st.omega_hat;
  st.omega_cur -= eta * dir_cur;
  st.omega_hat -= eta * dir_hat;
  st.lr_trace.push_back(eta);
  st.j += 1;
}

std::int64_t effective_batch(const LocalHyper& hyper, const ClientShard& shard) {
  return std::min(hyper.batch_size, shard.size());
}

}  // namespace

void LocalHyper::validate() const {
  require(lr_k > 0.0 && std::isfinite(lr_k), Errc::invalid_argument, "lr_k must be positive");
  require(lr_w > 0.0 && std::isfinite(lr_w), Errc::invalid_argument, "lr_w must be positive");
  require(batch_size > 0, Errc::invalid_argument, "batch_size must be positive");
  require(epochs > 0, Errc::invalid_argument, "epochs must be positive");
  require(local_momentum_beta >= 0.0 && local_momentum_beta <= 1.0, Errc::invalid_argument,
          "local_momentum_beta must lie in [0, 1]");
  require(fedprox_mu >= 0.0 && std::isfinite(fedprox_mu), Errc::invalid_argument,
          "fedprox_mu must be finite and nonnegative");
  require(fixed_lr > 0.0 && std::isfinite(fixed_lr), Errc::invalid_argument,
          "fixed_lr must be positive");
}

double adaptive_lr(const LocalHyper& hyper, double accum) {
  require(accum >= 0.0 && std::isfinite(accum), Errc::invalid_argument,
          "accum must be finite and nonnegative");
  if (!hyper.adaptive_lr) return hyper.fixed_lr;
  return hyper.lr_k / std::cbrt(hyper.lr_w + accum);
}

ClientRoundState init_client_round(const ParamVector& omega_t, const ParamVector& omega_tm1,
                                   const ModelSpec& spec, const Dataset& ds,
                                   const ClientShard& shard, const LocalHyper& hyper) {
  hyper.validate();
  check_same_dim(omega_t, omega_tm1, "broadcast iterates");
  require(shard.size() > 0, Errc::invalid_argument, "shard is empty");

  const Batch full = make_batch(ds, shard.indices);
  ClientRoundState st;
  st.anchor_t = omega_t;
  st.anchor_tm1 = omega_tm1;
  st.m_cur = local_grad(spec, omega_t, full, omega_t, hyper.fedprox_mu);
  st.m_hat = local_grad(spec, omega_tm1, full, omega_tm1, hyper.fedprox_mu);
  st.omega_cur = omega_t;
  st.omega_prev = omega_t;
  st.omega_hat = omega_tm1;
  st.omega_hat_prev = omega_tm1;
  st.accum = st.m_cur.squaredNorm();
  st.j = 1;
  return st;
}

void mvr_step(ClientRoundState& st, const ModelSpec& spec, const Dataset& ds,
              const ClientShard& shard, const LocalHyper& hyper, Rng& rng) {
  require(st.j >= 1, Errc::invalid_argument, "state not initialized");
  const Batch batch = sample_batch(ds, shard, effective_batch(hyper, shard), rng);
  const double mu = hyper.fedprox_mu;
  const ParamVector g_cur = local_grad(spec, st.omega_cur, batch, st.anchor_t, mu);
  const ParamVector g_cur_prev = local_grad(spec, st.omega_prev, batch, st.anchor_t, mu);
  const ParamVector g_hat = local_grad(spec, st.omega_hat, batch, st.anchor_tm1, mu);
  const ParamVector g_hat_prev = local_grad(spec, st.omega_hat_prev, batch, st.anchor_tm1, mu);

  st.m_cur += g_cur - g_cur_prev;
  st.m_hat += g_hat - g_hat_prev;
  check_finite(st.m_cur, "momentum");
  check_finite(st.m_hat, "shadow momentum");
  st.accum += g_cur.squaredNorm();

  apply_update(st, adaptive_lr(hyper, st.accum), st.m_cur, st.m_hat);
}

ClientReport run_local_round(const ParamVector& omega_t, const ParamVector& omega_tm1,
                             const ModelSpec& spec, const Dataset& ds, const ClientShard& shard,
                             const LocalHyper& hyper, Rng& rng) {
  hyper.validate();
  const std::int64_t steps = local_step_count(hyper.epochs, shard.size(), hyper.batch_size);

  ClientRoundState st;
  if (hyper.local_mvr) {
    st = init_client_round(omega_t, omega_tm1, spec, ds, shard, hyper);
    // Update 1 spends the full-shard momentum directly; no batch is drawn.
    apply_update(st, adaptive_lr(hyper, st.accum), st.m_cur, st.m_hat);
    for (std::int64_t s = 2; s <= steps; ++s) mvr_step(st, spec, ds, shard, hyper, rng);
  } else {
    check_same_dim(omega_t, omega_tm1, "broadcast iterates");
    require(shard.size() > 0, Errc::invalid_argument, "shard is empty");
    st.anchor_t = omega_t;
    st.anchor_tm1 = omega_tm1;
    st.omega_cur = omega_t;
    st.omega_prev = omega_t;
    st.omega_hat = omega_tm1;
    st.omega_hat_prev = omega_tm1;
    st.m_cur = ParamVector::Zero(omega_t.size());
    st.m_hat = ParamVector::Zero(omega_t.size());
    const double beta = hyper.local_momentum_beta;
    for (std::int64_t s = 1; s <= steps; ++s) {
      const Batch batch = sample_batch(ds, shard, effective_batch(hyper, shard), rng);
      const ParamVector g = local_grad(spec, st.omega_cur, batch, st.anchor_t, hyper.fedprox_mu);
      const ParamVector g_hat =
          local_grad(spec, st.omega_hat, batch, st.anchor_tm1, hyper.fedprox_mu);
      st.accum += g.squaredNorm();
      const double eta = adaptive_lr(hyper, st.accum);
      if (hyper.local_momentum) {
        st.m_cur = (1.0 - beta) * st.m_cur + beta * g;
        st.m_hat = (1.0 - beta) * st.m_hat + beta * g_hat;
        apply_update(st, eta, st.m_cur, st.m_hat);
      } else {
        apply_update(st, eta, g, g_hat);
      }
    }
  }

  ClientReport rep;
  rep.client_id = shard.client_id;
  rep.delta = omega_t - st.omega_cur;
  rep.delta_diff = rep.delta - (omega_tm1 - st.omega_hat);
  check_finite(rep.delta, "delta");
  check_finite(rep.delta_diff, "delta_diff");
  const Batch full = make_batch(ds, shard.indices);
  rep.local_loss = eval_loss(spec, st.omega_cur, full).loss;
  rep.steps_taken = st.j - 1;
  rep.lr_trace = std::move(st.lr_trace);
  rep.mean_lr = rep.lr_trace.empty()
                    ? 0.0
                    : std::accumulate(rep.lr_trace.begin(), rep.lr_trace.end(), 0.0) /
                          static_cast<double>(rep.lr_trace.size());
  return rep;
}

}  // namespace fedvr
