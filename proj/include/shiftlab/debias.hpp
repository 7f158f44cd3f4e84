#pragma once

#include <cstdint>
#include <vector>

#include "shiftlab/logreg.hpp"
#include "shiftlab/matrix.hpp"
#include "shiftlab/shiftgen.hpp"

// Interventions against dataset bias: group-equal reweighting with
// last-layer retraining over a frozen score (the linear-model reading of
// feature reweighting), and the balancing oracle that re-randomizes the
// spurious coordinate.
namespace shiftlab {
namespace debias {

// weight(example in group g) = n / (G * n_g): per-group totals all equal
// n / G, grand total n. Throws on an empty group list.
Vector group_equal_weights(const std::vector<int>& groups);

// Weighted logistic model over a frozen k-score feature map plus intercept,
// trained by full-batch descent at the weighted problem's Lipschitz step.
struct LastLayer {
  Vector weights;          // one per score column
  double intercept = 0.0;
  std::size_t steps = 0;
};

// Minimizes sum_i c_i * margin_loss(y_i * (w.scores_i + b)) from the given
// init. Divergence (separable weighted data) throws NoMinimumError.
LastLayer retrain_last_layer(const Matrix& scores,
                             const std::vector<int>& labels,
                             const Vector& example_weights,
                             const LastLayer& init,
                             const logreg::GDConfig& cfg);

// Retrained (scale, intercept) over the frozen score base_model.x with
// group-equal weights; the returned full-dimensional weights are exactly
// scale * base_model, so the frozen direction is preserved.
struct DfrModel {
  Vector weights;
  double intercept = 0.0;
  double scale = 1.0;
  std::size_t steps = 0;
};

DfrModel dfr_retrain(const Vector& base_model, const LabeledDataset& validation,
                     const logreg::GDConfig& cfg);

// Copy of `data` with the spurious coordinate re-drawn uniformly from
// [-1, 1] for every example; all other coordinates bitwise unchanged. Only
// kinds that designate a spurious coordinate are accepted.
LabeledDataset balance_training_data(const LabeledDataset& data,
                                     const shiftgen::ShiftSpec& shift,
                                     std::uint64_t seed);

}  // namespace debias
}  // namespace shiftlab
