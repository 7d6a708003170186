#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedvr/model.hpp"

namespace fedvr {

// In-memory dataset, one row per sample, features already scaled.
struct Dataset {
  Eigen::MatrixXd x;            // n x dim
  std::vector<std::int32_t> y;  // n labels in [0, num_classes)
  int num_classes = 0;

  std::int64_t size() const { return x.rows(); }
  int dim() const { return static_cast<int>(x.cols()); }
  void validate() const;
};

// Copies the listed rows into a Batch. Indices must be in range; order is
// preserved, so sorted indices give a canonical sample order.
Batch make_batch(const Dataset& ds, std::span<const std::int64_t> indices);

// Gaussian blobs: one N(0,1)^dim centroid per class, labels assigned
// round-robin (i mod classes, so class counts differ by at most one), sample
// = centroid + noise * N(0,1)^dim. Centroids are drawn before any sample, so
// the same seed and shape give an identical dataset regardless of n.
Dataset gen_synthetic(std::uint64_t seed, std::int64_t n, int dim, int classes, double noise);

}  // namespace fedvr
