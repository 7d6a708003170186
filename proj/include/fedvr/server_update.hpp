#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedvr/local_update.hpp"

namespace fedvr {

enum class BetaMode { constant, decaying };

struct ServerHyper {
  int num_clients = 10;  // N
  int participants = 5;  // R, drawn uniformly per round, R <= N
  BetaMode beta_mode = BetaMode::constant;
  double beta0 = 0.9;
  bool global_mvr = true;  // off = plain (weighted) averaging of deltas

  void validate() const;
};

// The server's view between rounds: the two newest global iterates plus the
// global momentum once a first aggregate exists. round counts 1-based.
struct ServerState {
  ParamVector omega_t, omega_tm1;
  std::optional<ParamVector> m_hat_prev;
  std::int64_t round = 1;
};

// R distinct client ids from [0, N), ascending. Uniform over subsets.
std::vector<int> sample_participants(const ServerHyper& hyper, Rng& rng);

// All aggregation walks reports in ascending client_id and divides once at
// the end, so the reduction is deterministic for any arrival order.

// Mean of deltas; seeds the global momentum on the first round.
ParamVector aggregate_first(const std::vector<ClientReport>& reports);

// beta * mean(delta) + (1-beta) * m_hat_prev + (1-beta) * mean(delta_diff).
// At beta = 1 this reduces to aggregate_first.
ParamVector aggregate_mvr(const std::vector<ClientReport>& reports, const ParamVector& m_hat_prev,
                          double beta);

// constant: beta0. decaying: min(1, beta0 * (2/(round+1))^(2/3)).
double beta_schedule(const ServerHyper& hyper, std::int64_t round);

// Weighted mean of deltas. Empty weights = uniform (bitwise equal to
// aggregate_first); otherwise one nonnegative weight per report in ascending
// client_id order, summing to 1.
ParamVector fedavg_aggregate(const std::vector<ClientReport>& reports,
                             const std::vector<double>& weights = {});

// Shifts the window: omega_tm1 takes the old omega_t, omega_t moves by
// -m_hat, the momentum is stored, the round advances.
ServerState apply_global(const ServerState& st, const ParamVector& m_hat);

}  // namespace fedvr
