#include "fedvr/dataset.hpp"

#include <string>

#include "fedvr/rng.hpp"

namespace fedvr {

void Dataset::validate() const {
  require(size() > 0, Errc::invalid_argument, "dataset is empty");
  require(num_classes >= 2, Errc::invalid_argument, "dataset needs at least 2 classes");
  require(static_cast<std::int64_t>(y.size()) == size(), Errc::dimension_mismatch,
          "label count does not match row count");
  require(x.allFinite(), Errc::non_finite, "dataset features contain NaN or Inf");
  for (const auto label : y)
    require(label >= 0 && label < num_classes, Errc::invalid_argument,
            "label " + std::to_string(label) + " outside [0, " + std::to_string(num_classes) + ")");
}

Batch make_batch(const Dataset& ds, std::span<const std::int64_t> indices) {
  require(!indices.empty(), Errc::invalid_argument, "batch index list is empty");
  Batch b;
  b.x.resize(static_cast<Eigen::Index>(indices.size()), ds.x.cols());
  b.y.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto idx = indices[i];
    require(idx >= 0 && idx < ds.size(), Errc::invalid_argument,
            "sample index " + std::to_string(idx) + " outside dataset of " +
                std::to_string(ds.size()));
    b.x.row(static_cast<Eigen::Index>(i)) = ds.x.row(static_cast<Eigen::Index>(idx));
    b.y[i] = ds.y[static_cast<std::size_t>(idx)];
  }
  return b;
}

Dataset gen_synthetic(std::uint64_t seed, std::int64_t n, int dim, int classes, double noise) {
  require(n > 0, Errc::invalid_argument, "sample count must be positive");
  require(dim > 0, Errc::invalid_argument, "feature dim must be positive");
  require(classes >= 2, Errc::invalid_argument, "need at least 2 classes");
  require(noise >= 0.0 && std::isfinite(noise), Errc::invalid_argument,
          "noise must be finite and nonnegative");
  Rng rng(derive_stream(seed, stream_tag::synthetic));
  Eigen::MatrixXd centroids(classes, dim);
  for (int c = 0; c < classes; ++c)
    for (int j = 0; j < dim; ++j) centroids(c, j) = rng.next_gauss();
  Dataset ds;
  ds.x.resize(n, dim);
  ds.y.resize(static_cast<std::size_t>(n));
  ds.num_classes = classes;
  for (std::int64_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    ds.y[static_cast<std::size_t>(i)] = label;
    for (int j = 0; j < dim; ++j)
      ds.x(i, j) = centroids(label, j) + noise * rng.next_gauss();
  }
  ds.validate();
  return ds;
}

}  // namespace fedvr
