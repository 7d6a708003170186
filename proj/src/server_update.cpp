#include "fedvr/server_update.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedvr {

namespace {

// Stable order for a deterministic reduction regardless of arrival order.
std::vector<const ClientReport*> by_client_id(const std::vector<ClientReport>& reports) {
  require(!reports.empty(), Errc::invalid_argument, "no reports to aggregate");
  std::vector<const ClientReport*> ptrs;
  ptrs.reserve(reports.size());
  for (const auto& r : reports) ptrs.push_back(&r);
  std::sort(ptrs.begin(), ptrs.end(),
            [](const ClientReport* a, const ClientReport* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 1; i < ptrs.size(); ++i)
    require(ptrs[i]->client_id != ptrs[i - 1]->client_id, Errc::invalid_argument,
            "duplicate client_id " + std::to_string(ptrs[i]->client_id));
  for (std::size_t i = 1; i < ptrs.size(); ++i)
    check_same_dim(ptrs[i]->delta, ptrs[0]->delta, "report deltas");
  return ptrs;
}

ParamVector weighted_mean_delta(const std::vector<ClientReport>& reports,
                                const std::vector<double>& weights) {
  const auto ptrs = by_client_id(reports);
  ParamVector acc = ParamVector::Zero(ptrs[0]->delta.size());
  if (weights.empty()) {
    for (const auto* r : ptrs) acc += r->delta;
    acc /= static_cast<double>(ptrs.size());
  } else {
    require(weights.size() == ptrs.size(), Errc::invalid_argument,
            "weight count does not match report count");
    double sum = 0.0;
    for (const auto w : weights) {
      require(w >= 0.0 && std::isfinite(w), Errc::invalid_argument,
              "weights must be finite and nonnegative");
      sum += w;
    }
    require(std::abs(sum - 1.0) <= 1e-9, Errc::invalid_argument,
            "weights must sum to 1, got " + std::to_string(sum));
    for (std::size_t i = 0; i < ptrs.size(); ++i) acc += weights[i] * ptrs[i]->delta;
  }
  check_finite(acc, "aggregated delta");
  return acc;
}

}  // namespace

void ServerHyper::validate() const {
  require(num_clients > 0, Errc::invalid_argument, "num_clients must be positive");
  require(participants > 0 && participants <= num_clients, Errc::invalid_argument,
          "participants must lie in [1, num_clients]");
  require(beta0 > 0.0 && beta0 <= 1.0, Errc::invalid_argument, "beta0 must lie in (0, 1]");
}

std::vector<int> sample_participants(const ServerHyper& hyper, Rng& rng) {
  hyper.validate();
  std::vector<int> pool(static_cast<std::size_t>(hyper.num_clients));
  for (int i = 0; i < hyper.num_clients; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < hyper.participants; ++i) {
    const auto j =
        i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hyper.num_clients - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(hyper.participants));
  std::sort(pool.begin(), pool.end());
  return pool;
}

ParamVector aggregate_first(const std::vector<ClientReport>& reports) {
  return weighted_mean_delta(reports, {});
}

ParamVector aggregate_mvr(const std::vector<ClientReport>& reports, const ParamVector& m_hat_prev,
                          double beta) {
  require(beta >= 0.0 && beta <= 1.0, Errc::invalid_argument, "beta must lie in [0, 1]");
  const auto ptrs = by_client_id(reports);
  check_same_dim(m_hat_prev, ptrs[0]->delta, "previous momentum vs deltas");
  ParamVector mean_delta = ParamVector::Zero(ptrs[0]->delta.size());
  ParamVector mean_diff = ParamVector::Zero(ptrs[0]->delta.size());
  for (const auto* r : ptrs) {
    check_same_dim(r->delta_diff, r->delta, "delta_diff");
    mean_delta += r->delta;
    mean_diff += r->delta_diff;
  }
  mean_delta /= static_cast<double>(ptrs.size());
  mean_diff /= static_cast<double>(ptrs.size());
  ParamVector m = beta * mean_delta;
  m += (1.0 - beta) * m_hat_prev;
  m += (1.0 - beta) * mean_diff;
  check_finite(m, "global momentum");
  return m;
}

double beta_schedule(const ServerHyper& hyper, std::int64_t round) {
  hyper.validate();
  require(round >= 1, Errc::invalid_argument, "rounds count from 1");
  if (hyper.beta_mode == BetaMode::constant) return hyper.beta0;
  const double decay = std::pow(2.0 / static_cast<double>(round + 1), 2.0 / 3.0);
  return std::min(1.0, hyper.beta0 * decay);
}

ParamVector fedavg_aggregate(const std::vector<ClientReport>& reports,
                             const std::vector<double>& weights) {
  return weighted_mean_delta(reports, weights);
}

ServerState apply_global(const ServerState& st, const ParamVector& m_hat) {
  check_same_dim(st.omega_t, m_hat, "iterate vs momentum");
  check_finite(m_hat, "global momentum");
  ServerState next;
  next.omega_tm1 = st.omega_t;
  next.omega_t = st.omega_t - m_hat;
  check_finite(next.omega_t, "updated iterate");
  next.m_hat_prev = m_hat;
  next.round = st.round + 1;
  return next;
}

}  // namespace fedvr
