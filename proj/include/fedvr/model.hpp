#pragma once

#include <cstdint>
#include <vector>

#include "fedvr/param_vector.hpp"
#include "fedvr/rng.hpp"

namespace fedvr {

enum class ModelKind { logistic, mlp2 };

// Architecture and loss constants for the two supported classifiers.
// Parameters live in one flat column-major vector:
//   logistic: [W (input x classes) | b (classes)]
//   mlp2:     [W1 (input x hidden) | b1 (hidden) | W2 (hidden x classes) | b2 (classes)]
// The loss is mean softmax cross entropy plus (l2_lambda/2)*||params||^2 with
// every parameter regularized, biases included.
struct ModelSpec {
  ModelKind kind = ModelKind::mlp2;
  int input_dim = 784;
  int hidden_dim = 600;  // ignored by logistic
  int num_classes = 10;
  double l2_lambda = 1e-4;

  std::int64_t param_dim() const;
  void validate() const;
};

// Dense sample block, one row per sample. Owns its storage so batches stay
// valid independently of the dataset they were cut from.
struct Batch {
  Eigen::MatrixXd x;            // n x input_dim
  std::vector<std::int32_t> y;  // n labels in [0, num_classes)

  std::int64_t size() const { return x.rows(); }
};

struct LossReport {
  double loss = 0.0;      // mean cross entropy + (lambda/2)*||params||^2, always >= 0
  double accuracy = 0.0;  // argmax with lowest-index tie break
};

LossReport eval_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Analytic gradient of eval_loss's loss field. ReLU uses subgradient 0 at
// exactly zero, matching the strict a > 0 mask in the forward pass.
ParamVector grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Central differences, coordinate by coordinate. Test oracle; O(d) loss evals.
ParamVector finite_diff_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                             double h = 1e-6);

// Glorot-uniform weights drawn in storage order, zero biases. Fully
// determined by the stream.
ParamVector init_params(const ModelSpec& spec, Rng& rng);

}  // namespace fedvr
