#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "shiftlab/dataset.hpp"
#include "shiftlab/subspace.hpp"

// Unregularized logistic regression on +1/-1 labels, trained by full-batch
// gradient descent, plus the span decomposition the lab's experiments rest
// on: gradients live in the row span of the data, so the component of the
// initialization orthogonal to that span never moves.

namespace shiftlab {
namespace logreg {

using WeightVector = Vector;

struct GDConfig {
  // Empty means automatic: 4 / ||X||_op^2, the inverse of the gradient's
  // Lipschitz bound, which makes plain descent monotone.
  std::optional<double> step_size;
  std::size_t max_steps = 500000;
  double grad_tol = 1e-9;          // terminate when ||grad||_2 <= grad_tol
  double divergence_norm = 1e6;    // declare no-minimum when ||w|| passes this
};

enum class GDTermination { converged, step_limit, diverged };

struct GDTrace {
  std::vector<double> losses;      // losses[t] = loss before step t; final appended
  std::vector<double> grad_norms;  // gradient norm at each recorded loss
  WeightVector final_weights;
  GDTermination reason = GDTermination::step_limit;
  std::size_t steps = 0;
};

// Per-margin pieces of the loss, shared with the calibration and reweighting
// code paths. margin_loss(m) = log(1 + exp(-m)); margin_slope(m) =
// 1 / (1 + exp(m)), the magnitude of d(margin_loss)/dm. Both overflow-safe.
double margin_loss(double margin);
double margin_slope(double margin);

// Sum over examples of log(1 + exp(-y * w.x)), in the overflow-safe form
// log1p(exp(-|m|)) + max(0, -m).
double logistic_loss(const WeightVector& w, const LabeledDataset& data);

// grad = -sum_i x_i y_i / (1 + exp(y_i * w.x_i)). Always lies in the row
// span of the feature matrix.
WeightVector loss_gradient(const WeightVector& w, const LabeledDataset& data);

// X^T D X with D_ii = 1 / (2 + exp(m_i) + exp(-m_i)); symmetric PSD.
Matrix loss_hessian(const WeightVector& w, const LabeledDataset& data);

// Observers run after each update with (step index, current weights).
using StepObserver = std::function<void(std::size_t, const WeightVector&)>;

GDTrace gradient_descent(const WeightVector& w_init, const LabeledDataset& data,
                         const GDConfig& cfg,
                         const StepObserver& observer = nullptr);

// Row span of the feature matrix as an orthonormal subspace.
Subspace data_subspace(const LabeledDataset& data, double rank_tol = 1e-10);

// Minimizer over the data subspace: GD from the zero vector (which starts in
// the span and never leaves it). Throws NoMinimumError when training
// diverges, i.e. the restricted problem has no finite minimizer.
WeightVector reference_minimizer(const LabeledDataset& data,
                                 const GDConfig& cfg);

struct Decomposition {
  WeightVector trained;          // GD endpoint from w_init
  WeightVector in_span;          // projection of trained onto the data span
  WeightVector orthogonal;       // trained - in_span
  WeightVector reference;        // minimizer from the zero init
  WeightVector init_orthogonal;  // w_init's component outside the span
  double residual = 0.0;         // ||in_span - reference|| + ||orthogonal - init_orthogonal||
};

// Decomposes the GD endpoint as reference minimizer + untouched orthogonal
// part of the initialization, and reports how far the identity is from
// holding on this instance.
Decomposition theorem_decompose(const WeightVector& w_init,
                                const LabeledDataset& data,
                                const GDConfig& cfg);

// Fraction with y * w.x > 0; a zero score counts as incorrect.
double accuracy(const WeightVector& w, const LabeledDataset& data);

// Per-example correctness indicators (1 = correct), same convention.
std::vector<std::uint8_t> per_example_correct(const WeightVector& w,
                                              const LabeledDataset& data);

}  // namespace logreg
}  // namespace shiftlab
