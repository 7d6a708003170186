#pragma once

#include <cstdint>
#include <vector>

#include "fedvr/dataset.hpp"
#include "fedvr/rng.hpp"

namespace fedvr {

// One client's slice of the training set: sorted unique sample indices,
// never empty once a partition succeeds.
struct ClientShard {
  int client_id = 0;
  std::vector<std::int64_t> indices;

  std::int64_t size() const { return static_cast<std::int64_t>(indices.size()); }
};

struct PartitionConfig {
  int num_clients = 10;
  double alpha = 0.5;  // Dirichlet concentration; small = skewed shards
  std::uint64_t seed = 1;
  int max_retries = 8;  // redraws allowed before giving up on empty shards

  void validate() const;
};

// Label-skew partition: for every class, proportions are drawn from
// Dirichlet(alpha) and that class's samples (in dataset order) are cut into
// contiguous blocks sized by cumulative rounding, one block per client. A
// draw that leaves any client empty is discarded and redone with the attempt
// counter folded into the stream, up to max_retries redraws.
std::vector<ClientShard> dirichlet_partition(const Dataset& ds, const PartitionConfig& cfg);

// Also used by tests to cross-check a partition against its own draws.
std::vector<std::vector<double>> dirichlet_proportions(int num_clients, int num_classes,
                                                       double alpha, Rng& rng);

// Uniform sample of batch_size shard members without replacement, returned in
// ascending index order, so batch_size == shard size reproduces the whole
// shard exactly. Consumes batch_size draws' worth of stream state.
Batch sample_batch(const Dataset& ds, const ClientShard& shard, std::int64_t batch_size, Rng& rng);

// max(1, floor(epochs * shard_size / batch_size)): the number of local
// parameter updates a client runs per round.
std::int64_t local_step_count(std::int64_t epochs, std::int64_t shard_size,
                              std::int64_t batch_size);

// Per-client class counts: hists[client][class].
std::vector<std::vector<std::int64_t>> class_histograms(const Dataset& ds,
                                                        const std::vector<ClientShard>& shards);

// Mean over client pairs of the total-variation distance between their
// normalized class histograms. 0 = identical mixes, 1 = fully disjoint.
double mean_pairwise_tv(const std::vector<std::vector<std::int64_t>>& hists);

}  // namespace fedvr
