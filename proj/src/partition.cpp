#include "fedvr/partition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedvr {

void PartitionConfig::validate() const {
  require(num_clients > 0, Errc::invalid_argument, "num_clients must be positive");
  require(alpha > 0.0 && std::isfinite(alpha), Errc::invalid_argument,
          "alpha must be positive and finite");
  require(max_retries >= 0, Errc::invalid_argument, "max_retries must be nonnegative");
}

std::vector<std::vector<double>> dirichlet_proportions(int num_clients, int num_classes,
                                                       double alpha, Rng& rng) {
  std::vector<std::vector<double>> props(static_cast<std::size_t>(num_classes));
  for (auto& row : props) {
    row.resize(static_cast<std::size_t>(num_clients));
    double sum = 0.0;
    for (auto& p : row) {
      p = rng.next_gamma(alpha);
      sum += p;
    }
    if (sum <= 0.0) {
      // All draws underflowed to zero (possible only at extreme alpha);
      // fall back to a uniform row rather than divide by zero.
      for (auto& p : row) p = 1.0 / num_clients;
    } else {
      for (auto& p : row) p /= sum;
    }
  }
  return props;
}

std::vector<ClientShard> dirichlet_partition(const Dataset& ds, const PartitionConfig& cfg) {
  ds.validate();
  cfg.validate();
  require(ds.size() >= cfg.num_clients, Errc::invalid_argument,
          "fewer samples than clients");

  std::vector<std::vector<std::int64_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::int64_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.y[static_cast<std::size_t>(i)])].push_back(i);

  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    Rng rng(derive_stream(cfg.seed, stream_tag::partition, static_cast<std::uint64_t>(attempt)));
    const auto props = dirichlet_proportions(cfg.num_clients, ds.num_classes, cfg.alpha, rng);

    std::vector<ClientShard> shards(static_cast<std::size_t>(cfg.num_clients));
    for (int k = 0; k < cfg.num_clients; ++k) shards[static_cast<std::size_t>(k)].client_id = k;

    for (int c = 0; c < ds.num_classes; ++c) {
      const auto& members = by_class[static_cast<std::size_t>(c)];
      const auto m = static_cast<std::int64_t>(members.size());
      if (m == 0) continue;
      // Contiguous blocks cut at round(cum * m); the last client absorbs any
      // rounding drift so every member lands exactly once.
      double cum = 0.0;
      std::int64_t prev = 0;
      for (int k = 0; k < cfg.num_clients; ++k) {
        cum += props[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
        std::int64_t bound = (k == cfg.num_clients - 1)
                                 ? m
                                 : std::llround(cum * static_cast<double>(m));
        bound = std::clamp(bound, prev, m);
        auto& dst = shards[static_cast<std::size_t>(k)].indices;
        dst.insert(dst.end(), members.begin() + prev, members.begin() + bound);
        prev = bound;
      }
    }

    const bool all_nonempty =
        std::all_of(shards.begin(), shards.end(), [](const ClientShard& s) { return s.size() > 0; });
    if (!all_nonempty) continue;
    for (auto& s : shards) std::sort(s.indices.begin(), s.indices.end());
    return shards;
  }
  fail(Errc::retries_exhausted,
       "no nonempty partition after " + std::to_string(cfg.max_retries + 1) + " draws");
}

Batch sample_batch(const Dataset& ds, const ClientShard& shard, std::int64_t batch_size,
                   Rng& rng) {
  require(shard.size() > 0, Errc::invalid_argument, "shard is empty");
  require(batch_size >= 1 && batch_size <= shard.size(), Errc::invalid_argument,
          "batch_size " + std::to_string(batch_size) + " outside [1, " +
              std::to_string(shard.size()) + "]");
  require(std::is_sorted(shard.indices.begin(), shard.indices.end()) &&
              std::adjacent_find(shard.indices.begin(), shard.indices.end()) ==
                  shard.indices.end(),
          Errc::invalid_argument, "shard indices must be sorted and unique");

  // Partial Fisher-Yates picks a uniform subset; sorting afterwards makes the
  // row order canonical (and hands back the whole shard when batch_size = N).
  std::vector<std::int64_t> pool = shard.indices;
  for (std::int64_t i = 0; i < batch_size; ++i) {
    const auto j = i + static_cast<std::int64_t>(
                           rng.next_below(static_cast<std::uint64_t>(pool.size() - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(batch_size));
  std::sort(pool.begin(), pool.end());
  return make_batch(ds, pool);
}

std::int64_t local_step_count(std::int64_t epochs, std::int64_t shard_size,
                              std::int64_t batch_size) {
  require(epochs > 0, Errc::invalid_argument, "epochs must be positive");
  require(shard_size > 0, Errc::invalid_argument, "shard_size must be positive");
  require(batch_size > 0, Errc::invalid_argument, "batch_size must be positive");
  return std::max<std::int64_t>(1, (epochs * shard_size) / batch_size);
}

std::vector<std::vector<std::int64_t>> class_histograms(const Dataset& ds,
                                                        const std::vector<ClientShard>& shards) {
  std::vector<std::vector<std::int64_t>> hists(
      shards.size(), std::vector<std::int64_t>(static_cast<std::size_t>(ds.num_classes), 0));
  for (std::size_t k = 0; k < shards.size(); ++k)
    for (const auto idx : shards[k].indices) {
      require(idx >= 0 && idx < ds.size(), Errc::invalid_argument, "shard index out of range");
      ++hists[k][static_cast<std::size_t>(ds.y[static_cast<std::size_t>(idx)])];
    }
  return hists;
}

double mean_pairwise_tv(const std::vector<std::vector<std::int64_t>>& hists) {
  require(hists.size() >= 2, Errc::invalid_argument, "need at least two clients");
  std::vector<std::vector<double>> probs(hists.size());
  for (std::size_t k = 0; k < hists.size(); ++k) {
    double total = 0.0;
    for (const auto v : hists[k]) total += static_cast<double>(v);
    require(total > 0.0, Errc::invalid_argument, "client histogram is empty");
    probs[k].resize(hists[k].size());
    for (std::size_t c = 0; c < hists[k].size(); ++c)
      probs[k][c] = static_cast<double>(hists[k][c]) / total;
  }
  double sum = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t a = 0; a < probs.size(); ++a)
    for (std::size_t b = a + 1; b < probs.size(); ++b) {
      double tv = 0.0;
      for (std::size_t c = 0; c < probs[a].size(); ++c) tv += std::abs(probs[a][c] - probs[b][c]);
      sum += 0.5 * tv;
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

}  // namespace fedvr
