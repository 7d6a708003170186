#include "fedvr/model.hpp"

#include <cmath>
#include <string>

namespace fedvr {

namespace {

using Eigen::MatrixXd;
using MapMat = Eigen::Map<Eigen::MatrixXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapMat = Eigen::Map<const Eigen::MatrixXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

void check_inputs(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  spec.validate();
  require(params.size() == spec.param_dim(), Errc::dimension_mismatch,
          "params has " + std::to_string(params.size()) + " entries, model needs " +
              std::to_string(spec.param_dim()));
  require(batch.size() > 0, Errc::invalid_argument, "batch is empty");
  require(batch.x.cols() == spec.input_dim, Errc::dimension_mismatch,
          "batch has " + std::to_string(batch.x.cols()) + " features, model needs " +
              std::to_string(spec.input_dim));
  require(static_cast<std::int64_t>(batch.y.size()) == batch.size(), Errc::dimension_mismatch,
          "batch labels do not match row count");
  for (const auto label : batch.y)
    require(label >= 0 && label < spec.num_classes, Errc::invalid_argument,
            "label " + std::to_string(label) + " outside [0, " +
                std::to_string(spec.num_classes) + ")");
}

// Mean cross entropy and accuracy from raw logits. Log-sum-exp subtracts the
// row max, so any finite logits are safe. Tie break on argmax: first index.
LossReport ce_from_logits(const MatrixXd& z, const std::vector<std::int32_t>& y) {
  const auto n = z.rows();
  const auto c = z.cols();
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = z(i, 0);
    Eigen::Index arg = 0;
    for (Eigen::Index k = 1; k < c; ++k) {
      if (z(i, k) > m) {
        m = z(i, k);
        arg = k;
      }
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) s += std::exp(z(i, k) - m);
    loss_sum += std::log(s) + m - z(i, y[static_cast<std::size_t>(i)]);
    if (arg == y[static_cast<std::size_t>(i)]) ++correct;
  }
  LossReport r;
  r.loss = loss_sum / static_cast<double>(n);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return r;
}

// d(mean CE)/d(logits): softmax minus one-hot, scaled by 1/n.
MatrixXd softmax_delta(const MatrixXd& z, const std::vector<std::int32_t>& y) {
  const auto n = z.rows();
  const auto c = z.cols();
  MatrixXd d(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
      d(i, k) = std::exp(z(i, k) - m);
      s += d(i, k);
    }
    d.row(i) /= s;
    d(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  d /= static_cast<double>(n);
  return d;
}

struct LogisticView {
  CMapMat w;
  CMapVec b;
  LogisticView(const ModelSpec& s, const ParamVector& p)
      : w(p.data(), s.input_dim, s.num_classes), b(p.data() + s.input_dim * s.num_classes, s.num_classes) {}
};

struct Mlp2View {
  CMapMat w1;
  CMapVec b1;
  CMapMat w2;
  CMapVec b2;
  Mlp2View(const ModelSpec& s, const ParamVector& p)
      : w1(p.data(), s.input_dim, s.hidden_dim),
        b1(p.data() + s.input_dim * s.hidden_dim, s.hidden_dim),
        w2(p.data() + s.input_dim * s.hidden_dim + s.hidden_dim, s.hidden_dim, s.num_classes),
        b2(p.data() + s.input_dim * s.hidden_dim + s.hidden_dim + s.hidden_dim * s.num_classes,
           s.num_classes) {}
};

}  // namespace

std::int64_t ModelSpec::param_dim() const {
  const std::int64_t in = input_dim;
  const std::int64_t hid = hidden_dim;
  const std::int64_t cls = num_classes;
  return kind == ModelKind::logistic ? (in + 1) * cls : (in + 1) * hid + (hid + 1) * cls;
}

void ModelSpec::validate() const {
  require(input_dim > 0, Errc::invalid_argument, "input_dim must be positive");
  require(num_classes >= 2, Errc::invalid_argument, "num_classes must be at least 2");
  require(kind == ModelKind::logistic || hidden_dim > 0, Errc::invalid_argument,
          "hidden_dim must be positive");
  require(l2_lambda >= 0.0 && std::isfinite(l2_lambda), Errc::invalid_argument,
          "l2_lambda must be finite and nonnegative");
}

LossReport eval_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params, batch);
  MatrixXd z;
  if (spec.kind == ModelKind::logistic) {
    const LogisticView v(spec, params);
    z = (batch.x * v.w).rowwise() + v.b.transpose();
  } else {
    const Mlp2View v(spec, params);
    MatrixXd h = ((batch.x * v.w1).rowwise() + v.b1.transpose()).cwiseMax(0.0);
    z = (h * v.w2).rowwise() + v.b2.transpose();
  }
  LossReport r = ce_from_logits(z, batch.y);
  r.loss += 0.5 * spec.l2_lambda * params.squaredNorm();
  require(std::isfinite(r.loss), Errc::non_finite, "loss is not finite");
  return r;
}

ParamVector grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params, batch);
  ParamVector g(params.size());
  if (spec.kind == ModelKind::logistic) {
    const LogisticView v(spec, params);
    const MatrixXd z = (batch.x * v.w).rowwise() + v.b.transpose();
    const MatrixXd d = softmax_delta(z, batch.y);
    MapMat gw(g.data(), spec.input_dim, spec.num_classes);
    MapVec gb(g.data() + spec.input_dim * spec.num_classes, spec.num_classes);
    gw.noalias() = batch.x.transpose() * d;
    gb = d.colwise().sum().transpose();
  } else {
    const Mlp2View v(spec, params);
    const MatrixXd a1 = (batch.x * v.w1).rowwise() + v.b1.transpose();
    const MatrixXd h = a1.cwiseMax(0.0);
    const MatrixXd z = (h * v.w2).rowwise() + v.b2.transpose();
    const MatrixXd d = softmax_delta(z, batch.y);
    const std::int64_t off1 = static_cast<std::int64_t>(spec.input_dim) * spec.hidden_dim;
    const std::int64_t off2 = off1 + spec.hidden_dim;
    const std::int64_t off3 = off2 + static_cast<std::int64_t>(spec.hidden_dim) * spec.num_classes;
    MapMat gw1(g.data(), spec.input_dim, spec.hidden_dim);
    MapVec gb1(g.data() + off1, spec.hidden_dim);
    MapMat gw2(g.data() + off2, spec.hidden_dim, spec.num_classes);
    MapVec gb2(g.data() + off3, spec.num_classes);
    gw2.noalias() = h.transpose() * d;
    gb2 = d.colwise().sum().transpose();
    MatrixXd back = d * v.w2.transpose();
    back.array() *= (a1.array() > 0.0).cast<double>();  // subgradient 0 at the kink
    gw1.noalias() = batch.x.transpose() * back;
    gb1 = back.colwise().sum().transpose();
  }
  g += spec.l2_lambda * params;
  check_finite(g, "gradient");
  return g;
}

ParamVector finite_diff_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                             double h) {
  check_inputs(spec, params, batch);
  require(h > 0.0 && std::isfinite(h), Errc::invalid_argument, "step h must be positive");
  ParamVector g(params.size());
  ParamVector p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    p[i] = params[i] + h;
    const double up = eval_loss(spec, p, batch).loss;
    p[i] = params[i] - h;
    const double down = eval_loss(spec, p, batch).loss;
    p[i] = params[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector p = ParamVector::Zero(spec.param_dim());
  const auto fill_uniform = [&rng](double* dst, std::int64_t count, double limit) {
    for (std::int64_t i = 0; i < count; ++i) dst[i] = (2.0 * rng.next_unit() - 1.0) * limit;
  };
  if (spec.kind == ModelKind::logistic) {
    fill_uniform(p.data(), static_cast<std::int64_t>(spec.input_dim) * spec.num_classes,
                 std::sqrt(6.0 / (spec.input_dim + spec.num_classes)));
  } else {
    const std::int64_t n1 = static_cast<std::int64_t>(spec.input_dim) * spec.hidden_dim;
    fill_uniform(p.data(), n1, std::sqrt(6.0 / (spec.input_dim + spec.hidden_dim)));
    fill_uniform(p.data() + n1 + spec.hidden_dim,
                 static_cast<std::int64_t>(spec.hidden_dim) * spec.num_classes,
                 std::sqrt(6.0 / (spec.hidden_dim + spec.num_classes)));
  }
  return p;
}

}  // namespace fedvr
