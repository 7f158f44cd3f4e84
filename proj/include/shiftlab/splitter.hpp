#pragma once

#include <cstdint>
#include <vector>

#include "shiftlab/logreg.hpp"
#include "shiftlab/matrix.hpp"

// Splits a shifted dataset into in-/out-of-support parts via a cross-fitted
// domain classifier: logistic model distinguishing shifted from reference
// inputs, temperature-scaled on held-out data, converted to the density
// ratio p_ref/p_shift, thresholded. Includes calibration-curve diagnostics.
namespace shiftlab {
namespace splitter {

// Linear logit over raw features: score(x) = weights.x + intercept, trained
// on the pooled set with labels shifted=+1 / reference=-1 via an appended
// constant-1 coordinate.
struct DomainClassifier {
  Vector weights;
  double intercept = 0.0;
  std::size_t iterations = 0;
  std::size_t fold = 0;
  // Pooled data was separable: training stopped at the divergence guard or
  // reached perfect pooled accuracy. Scores are still usable; ratios saturate.
  bool separable_warning = false;

  double logit(std::span<const double> x) const;
};

DomainClassifier train_domain_classifier(const LabeledDataset& reference,
                                         const LabeledDataset& shifted,
                                         const logreg::GDConfig& cfg);

struct TemperatureScale {
  double alpha = 1.0;
  // alpha ran into the positivity floor (uninformative scores) or the upper
  // cap (separable calibration data).
  bool floored = false;
  bool capped = false;
};

// Floor and cap for the 1-D temperature search.
inline constexpr double kAlphaFloor = 1e-6;
inline constexpr double kAlphaCap = 1e12;

// Minimizes sum_i margin_loss(alpha * logit_i * label_i) over alpha > 0 by
// Newton's method with a bisection fallback, to |d loss/d alpha| <= 1e-10
// or the floating-point resolution of alpha. Labels are +1/-1; at least one
// of each is required.
TemperatureScale fit_temperature(const Vector& logits,
                                 const std::vector<int>& labels);

// Weighted sum of margin_loss(alpha * logit * label); the quantity
// fit_temperature minimizes. Exposed for calibration-improvement checks.
double scaled_logit_loss(const Vector& logits, const std::vector<int>& labels,
                         double alpha);

struct Priors {
  double p_ref = 0.5;
  double p_shift = 0.5;
};

struct RatioEstimate {
  Vector ratio;             // p_ref/p_shift per example
  Vector p_shift_posterior; // calibrated p(shifted | x) per example
  Priors priors;
};

// ratio(x) = ((1 - q)/q) * (p_shift/p_ref) with q = sigmoid(alpha * logit).
// Logits are clamped to +/-700 after scaling so every stored field is finite
// and the ratio identity holds exactly from the stored posterior.
RatioEstimate estimate_ratios(const DomainClassifier& classifier,
                              const TemperatureScale& scale,
                              const LabeledDataset& shifted,
                              const Priors& priors);

// Per-fold bookkeeping kept so cross-fit hygiene is checkable after the
// fact: shifted_train/calibration are indices into the shifted dataset, and
// no index in `scored` appears in either.
struct FoldInfo {
  std::vector<std::size_t> scored;
  std::vector<std::size_t> shifted_train;
  std::vector<std::size_t> calibration_shifted;
  std::vector<std::size_t> calibration_reference;
  Vector calibration_probs;        // posterior on the holdout, both domains
  std::vector<int> calibration_labels;  // +1 shifted / -1 reference
  TemperatureScale scale;
  Priors priors;
  bool separable_warning = false;
};

struct SplitResult {
  std::vector<std::size_t> in_support;
  std::vector<std::size_t> out_of_support;
  double threshold = 0.2;
  Vector ratios;              // per shifted example
  std::vector<std::size_t> fold_of;  // which fold scored each example
  std::vector<FoldInfo> folds;
  bool separable_warning = false;    // any fold flagged
};

// Cross-fitted split: shifted examples are dealt into `folds` folds after a
// seeded shuffle; each fold is scored by a classifier trained on the other
// folds plus the whole reference set, with 10% of that training pool (per
// domain) held out to fit the temperature. Examples with ratio < threshold
// go out-of-support.
SplitResult split_shifted(const LabeledDataset& shifted,
                          const LabeledDataset& reference, std::size_t folds,
                          double threshold, const logreg::GDConfig& cfg,
                          std::uint64_t seed);

struct CalibrationBin {
  double mean_pred = 0.0;
  double rate = 0.0;   // empirical fraction of +1 labels
  double lo = 0.0;     // Clopper-Pearson bounds on the rate
  double hi = 1.0;
  std::size_t count = 0;
};

// Reliability diagram with quantile bin edges over the predictions; bins
// whose edges coincide (fewer distinct predictions than bins) are merged.
// Labels are +1/-1.
std::vector<CalibrationBin> calibration_curve(const Vector& probabilities,
                                              const std::vector<int>& labels,
                                              std::size_t bins, double level);

}  // namespace splitter
}  // namespace shiftlab
