#pragma once

#include <cstdint>
#include <vector>

#include "fedvr/partition.hpp"

namespace fedvr {

// Per-client optimizer settings for one round. The mechanism flags select the
// local rule: variance-reduced momentum when local_mvr is on, otherwise an
// exponential moving average when local_momentum is on, otherwise plain SGD.
// fedprox_mu > 0 adds a proximal pull toward the broadcast point under any
// rule.
struct LocalHyper {
  double lr_k = 0.1;  // adaptive step numerator
  double lr_w = 1.0;  // adaptive step offset, keeps the first step bounded
  std::int64_t batch_size = 50;
  std::int64_t epochs = 2;
  bool adaptive_lr = true;
  bool local_momentum = true;
  bool local_mvr = true;
  double local_momentum_beta = 0.1;  // weight on the fresh gradient in the EMA
  double fedprox_mu = 0.0;           // 0 disables the proximal term
  double fixed_lr = 0.1;             // used when adaptive_lr is off

  void validate() const;
};

// Working state for one client's round. Two parameter sequences evolve in
// lockstep on the same batches: the current sequence starts from the newest
// global iterate, the shadow sequence from the previous one. Each keeps its
// pre-step copy so the recursion can difference gradients at consecutive
// points, and each keeps its own momentum.
struct ClientRoundState {
  ParamVector omega_cur, omega_prev;
  ParamVector omega_hat, omega_hat_prev;
  ParamVector m_cur, m_hat;
  ParamVector anchor_t, anchor_tm1;  // broadcast points; proximal anchors
  double accum = 0.0;  // sum of squared fresh current-sequence gradient norms
  std::int64_t j = 1;  // 1-based update counter
  std::vector<double> lr_trace;  // one eta per applied update
};

// What a client uploads. delta encodes its movement from the newest global
// iterate; delta_diff is the cross-round correction, delta minus the shadow
// sequence's movement from the previous global iterate.
struct ClientReport {
  int client_id = 0;
  ParamVector delta;       // omega_t - final omega_cur
  ParamVector delta_diff;  // delta - (omega_tm1 - final omega_hat)
  double local_loss = 0.0;  // full-shard loss at the final omega_cur
  std::int64_t steps_taken = 0;
  double mean_lr = 0.0;
  std::vector<double> lr_trace;
};

// Full-shard gradients at both broadcast points seed the momenta; no
// parameters move. accum starts at ||m_cur||^2, the step counter at 1.
ClientRoundState init_client_round(const ParamVector& omega_t, const ParamVector& omega_tm1,
                                   const ModelSpec& spec, const Dataset& ds,
                                   const ClientShard& shard, const LocalHyper& hyper);

// k / (w + accum)^(1/3) when adaptive, fixed_lr otherwise. Nonincreasing in
// accum, so the applied steps never grow within a round.
double adaptive_lr(const LocalHyper& hyper, double accum);

// One variance-reduced update: sample a batch, evaluate both sequences'
// gradients at their current and previous points on that same batch, fold the
// corrections into both momenta, grow accum by the fresh current-sequence
// gradient, then move both sequences with one shared step size. Momenta are
// updated as m += (g - g_prev), so a step that did not move leaves them
// bitwise unchanged.
void mvr_step(ClientRoundState& st, const ModelSpec& spec, const Dataset& ds,
              const ClientShard& shard, const LocalHyper& hyper, Rng& rng);

// Runs one client's whole round: exactly local_step_count(epochs, N_i,
// batch_size) updates under the rule the flags select. With local_mvr on, the
// first update applies the full-shard momentum from init_client_round
// directly (no batch is drawn for it); the remaining updates are mvr_steps.
// Batches never exceed the shard, so the effective batch is
// min(batch_size, N_i). The shadow sequence consumes no extra randomness.
ClientReport run_local_round(const ParamVector& omega_t, const ParamVector& omega_tm1,
                             const ModelSpec& spec, const Dataset& ds, const ClientShard& shard,
                             const LocalHyper& hyper, Rng& rng);

}  // namespace fedvr
