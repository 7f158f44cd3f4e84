#include "shiftlab/debias.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "shiftlab/errors.hpp"
#include "shiftlab/rng.hpp"

namespace shiftlab {
namespace debias {

Vector group_equal_weights(const std::vector<int>& groups) {
  if (groups.empty()) {
    throw InvalidInputError("group_equal_weights: no examples");
  }
  std::map<int, std::size_t> sizes;
  for (int g : groups) sizes[g] += 1;
  const double n = static_cast<double>(groups.size());
  const double g_count = static_cast<double>(sizes.size());
  Vector weights(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    weights[i] = n / (g_count * static_cast<double>(sizes[groups[i]]));
  }
  return weights;
}

LastLayer retrain_last_layer(const Matrix& scores,
                             const std::vector<int>& labels,
                             const Vector& example_weights,
                             const LastLayer& init,
                             const logreg::GDConfig& cfg) {
  const std::size_t n = scores.rows;
  const std::size_t k = scores.cols;
  if (n == 0 || labels.size() != n || example_weights.size() != n) {
    throw InvalidInputError("retrain_last_layer: bad input lengths");
  }
  if (init.weights.size() != k) {
    throw InvalidInputError("retrain_last_layer: init width mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 1 && labels[i] != -1) {
      throw InvalidInputError("retrain_last_layer: labels must be +1/-1");
    }
    if (!(example_weights[i] >= 0.0) || !std::isfinite(example_weights[i])) {
      throw InvalidInputError("retrain_last_layer: weights must be >= 0");
    }
  }
  if (!(cfg.grad_tol > 0.0) || !(cfg.divergence_norm > 0.0)) {
    throw InvalidInputError("retrain_last_layer: bad termination config");
  }

  // The weighted problem's curvature bound is that of rows sqrt(c_i) *
  // (scores_i, 1), so the auto step reuses the unweighted machinery on that
  // scaled matrix.
  double step;
  if (cfg.step_size) {
    if (!(*cfg.step_size > 0.0)) {
      throw InvalidInputError("retrain_last_layer: step_size must be positive");
    }
    step = *cfg.step_size;
  } else {
    Matrix scaled(n, k + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double root = std::sqrt(example_weights[i]);
      auto dst = scaled.row(i);
      const auto src = scores.row(i);
      for (std::size_t j = 0; j < k; ++j) dst[j] = root * src[j];
      dst[k] = root;
    }
    const double op = operator_norm(scaled, 1e-8);
    step = op > 0.0 ? 4.0 / (op * op * (1.0 + 1e-6)) : 1.0;
  }

  Vector w = init.weights;
  double b = init.intercept;
  Vector grad(k, 0.0);
  std::size_t t = 0;
  for (; t < cfg.max_steps; ++t) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = scores.row(i);
      const double margin = labels[i] * (dot(x, std::span<const double>(w)) + b);
      const double pull =
          -example_weights[i] * labels[i] * logreg::margin_slope(margin);
      axpy(pull, x, grad);
      grad_b += pull;
    }
    double grad_sq = grad_b * grad_b;
    for (double g : grad) grad_sq += g * g;
    if (std::sqrt(grad_sq) <= cfg.grad_tol) break;

    axpy(-step, std::span<const double>(grad), w);
    b -= step * grad_b;

    double norm_sq = b * b;
    for (double v : w) norm_sq += v * v;
    if (!std::isfinite(norm_sq) || std::sqrt(norm_sq) > cfg.divergence_norm) {
      throw NoMinimumError(
          "retrain_last_layer: weighted problem has no finite minimizer");
    }
  }

  LastLayer out;
  out.weights = std::move(w);
  out.intercept = b;
  out.steps = t;
  return out;
}

DfrModel dfr_retrain(const Vector& base_model, const LabeledDataset& validation,
                     const logreg::GDConfig& cfg) {
  validate(validation);
  if (!validation.group) {
    throw InvalidInputError("dfr_retrain: validation set carries no group tags");
  }
  if (base_model.size() != validation.dim()) {
    throw InvalidInputError("dfr_retrain: base model width mismatch");
  }

  Matrix scores(validation.size(), 1);
  for (std::size_t i = 0; i < validation.size(); ++i) {
    scores.at(i, 0) =
        dot(validation.features.row(i), std::span<const double>(base_model));
  }
  const Vector weights = group_equal_weights(*validation.group);

  LastLayer init;
  init.weights = {1.0};
  const LastLayer layer =
      retrain_last_layer(scores, validation.labels, weights, init, cfg);

  DfrModel model;
  model.scale = layer.weights[0];
  model.intercept = layer.intercept;
  model.steps = layer.steps;
  model.weights = base_model;
  scale(model.weights, model.scale);
  return model;
}

LabeledDataset balance_training_data(const LabeledDataset& data,
                                     const shiftgen::ShiftSpec& shift,
                                     std::uint64_t seed) {
  validate(data);
  if (shift.kind != shiftgen::ShiftKind::spurious &&
      shift.kind != shiftgen::ShiftKind::combined) {
    throw InvalidInputError(
        "balance_training_data: shift kind has no spurious coordinate");
  }
  if (shift.spurious_dim >= data.dim()) {
    throw InvalidInputError("balance_training_data: spurious_dim out of range");
  }
  LabeledDataset out = data;
  Rng rng(mix_seed(seed, 0xBA, 0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.features.at(i, shift.spurious_dim) = rng.uniform(-1.0, 1.0);
  }
  return out;
}

}  // namespace debias
}  // namespace shiftlab
