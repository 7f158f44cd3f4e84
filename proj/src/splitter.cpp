#include "shiftlab/splitter.hpp"

#include <algorithm>
#include <cmath>

#include "shiftlab/errors.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/stats.hpp"

namespace shiftlab {
namespace splitter {

double DomainClassifier::logit(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw InvalidInputError("domain classifier: feature length mismatch");
  }
  return dot(std::span<const double>(weights), x) + intercept;
}

namespace {

// Pooled two-sample set with an appended constant-1 coordinate so the
// intercept trains through the same descent path as the weights.
LabeledDataset pool_with_bias(const LabeledDataset& reference,
                              const LabeledDataset& shifted) {
  if (reference.dim() != shifted.dim()) {
    throw InvalidInputError("domain classifier: dimension mismatch");
  }
  if (reference.size() == 0 || shifted.size() == 0) {
    throw InvalidInputError("domain classifier: both datasets must be non-empty");
  }
  const std::size_t d = reference.dim();
  LabeledDataset pooled;
  pooled.features = Matrix(reference.size() + shifted.size(), d + 1);
  pooled.labels.reserve(pooled.features.rows);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    auto row = pooled.features.row(i);
    std::copy_n(reference.features.row(i).data(), d, row.data());
    row[d] = 1.0;
    pooled.labels.push_back(-1);
  }
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    auto row = pooled.features.row(reference.size() + i);
    std::copy_n(shifted.features.row(i).data(), d, row.data());
    row[d] = 1.0;
    pooled.labels.push_back(1);
  }
  return pooled;
}

}  // namespace

DomainClassifier train_domain_classifier(const LabeledDataset& reference,
                                         const LabeledDataset& shifted,
                                         const logreg::GDConfig& cfg) {
  const LabeledDataset pooled = pool_with_bias(reference, shifted);
  const Vector zero(pooled.dim(), 0.0);
  const logreg::GDTrace trace = logreg::gradient_descent(zero, pooled, cfg);

  DomainClassifier classifier;
  classifier.weights.assign(trace.final_weights.begin(),
                            trace.final_weights.end() - 1);
  classifier.intercept = trace.final_weights.back();
  classifier.iterations = trace.steps;
  classifier.separable_warning =
      trace.reason == logreg::GDTermination::diverged ||
      logreg::accuracy(trace.final_weights, pooled) == 1.0;
  return classifier;
}

namespace {

double temperature_dloss(const Vector& margins, double alpha) {
  double g = 0.0;
  for (double m : margins) g -= m * logreg::margin_slope(alpha * m);
  return g;
}

double temperature_d2loss(const Vector& margins, double alpha) {
  double h = 0.0;
  for (double m : margins) {
    const double s = logreg::margin_slope(alpha * m);
    h += m * m * s * (1.0 - s);
  }
  return h;
}

}  // namespace

double scaled_logit_loss(const Vector& logits, const std::vector<int>& labels,
                         double alpha) {
  if (logits.size() != labels.size()) {
    throw InvalidInputError("scaled_logit_loss: length mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    loss += logreg::margin_loss(alpha * logits[i] * labels[i]);
  }
  return loss;
}

TemperatureScale fit_temperature(const Vector& logits,
                                 const std::vector<int>& labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw InvalidInputError("fit_temperature: bad input lengths");
  }
  bool has_pos = false, has_neg = false;
  Vector margins(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] != 1 && labels[i] != -1) {
      throw InvalidInputError("fit_temperature: labels must be +1/-1");
    }
    if (!std::isfinite(logits[i])) {
      throw InvalidInputError("fit_temperature: non-finite logit");
    }
    (labels[i] == 1 ? has_pos : has_neg) = true;
    margins[i] = logits[i] * labels[i];
  }
  if (!has_pos || !has_neg) {
    throw InvalidInputError("fit_temperature: need both labels present");
  }

  constexpr double kDerivTol = 1e-10;
  const auto finish = [](double alpha) {
    TemperatureScale scale;
    if (alpha <= kAlphaFloor) {
      scale.alpha = kAlphaFloor;
      scale.floored = true;
    } else if (alpha >= kAlphaCap) {
      scale.alpha = kAlphaCap;
      scale.capped = true;
    } else {
      scale.alpha = alpha;
    }
    return scale;
  };

  // Newton from 1; the objective is convex in alpha so this usually lands in
  // a handful of iterations. Any misstep falls through to bisection.
  double alpha = 1.0;
  bool newton_ok = true;
  for (int iter = 0; iter < 100; ++iter) {
    const double g = temperature_dloss(margins, alpha);
    if (std::abs(g) <= kDerivTol) return finish(alpha);
    const double h = temperature_d2loss(margins, alpha);
    if (!(h > 0.0) || !std::isfinite(h)) {
      newton_ok = false;
      break;
    }
    const double next = alpha - g / h;
    if (!std::isfinite(next) || next <= 0.0) {
      newton_ok = false;
      break;
    }
    if (std::abs(next - alpha) <= 4e-16 * std::max(1.0, std::abs(alpha))) {
      return finish(next);
    }
    alpha = next;
  }
  if (newton_ok) return finish(alpha);

  // Bisection on the increasing derivative: bracket a sign change, halve,
  // then let Newton polish the result.
  if (temperature_dloss(margins, kAlphaFloor) > 0.0) {
    TemperatureScale scale;
    scale.alpha = kAlphaFloor;
    scale.floored = true;
    return scale;
  }
  double hi = 1.0;
  while (temperature_dloss(margins, hi) < 0.0) {
    hi *= 2.0;
    if (hi >= kAlphaCap) {
      TemperatureScale scale;
      scale.alpha = kAlphaCap;
      scale.capped = true;
      return scale;
    }
  }
  double lo = kAlphaFloor;
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-15 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (temperature_dloss(margins, mid) < 0.0 ? lo : hi) = mid;
  }
  alpha = 0.5 * (lo + hi);
  for (int iter = 0; iter < 8; ++iter) {
    const double g = temperature_dloss(margins, alpha);
    if (std::abs(g) <= kDerivTol) break;
    const double h = temperature_d2loss(margins, alpha);
    if (!(h > 0.0)) break;
    const double next = alpha - g / h;
    if (!std::isfinite(next) || next <= 0.0) break;
    alpha = next;
  }
  return finish(alpha);
}

namespace {

// Posterior p(shifted | x) with the scaled logit clamped so downstream
// ratios stay finite.
double clamped_posterior(double logit, double alpha) {
  const double z = std::clamp(alpha * logit, -700.0, 700.0);
  return logreg::margin_slope(-z);  // sigmoid(z)
}

}  // namespace

RatioEstimate estimate_ratios(const DomainClassifier& classifier,
                              const TemperatureScale& scale,
                              const LabeledDataset& shifted,
                              const Priors& priors) {
  if (!(priors.p_ref > 0.0 && priors.p_shift > 0.0)) {
    throw InvalidInputError("estimate_ratios: priors must be positive");
  }
  RatioEstimate out;
  out.priors = priors;
  out.ratio.reserve(shifted.size());
  out.p_shift_posterior.reserve(shifted.size());
  const double prior_factor = priors.p_shift / priors.p_ref;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    const double q = clamped_posterior(classifier.logit(shifted.features.row(i)),
                                       scale.alpha);
    out.p_shift_posterior.push_back(q);
    out.ratio.push_back((1.0 - q) / q * prior_factor);
  }
  return out;
}

namespace {

// First ceil(share * n) elements of a seeded shuffle of `pool`; both halves
// returned in ascending order for deterministic downstream assembly.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> hold_out(
    const std::vector<std::size_t>& pool, double share, Rng& rng) {
  std::vector<std::size_t> order = pool;
  rng.shuffle(order);
  const auto take = static_cast<std::size_t>(
      std::ceil(share * static_cast<double>(pool.size())));
  std::vector<std::size_t> held(order.begin(), order.begin() + take);
  std::vector<std::size_t> kept(order.begin() + take, order.end());
  std::sort(held.begin(), held.end());
  std::sort(kept.begin(), kept.end());
  return {held, kept};
}

}  // namespace

SplitResult split_shifted(const LabeledDataset& shifted,
                          const LabeledDataset& reference, std::size_t folds,
                          double threshold, const logreg::GDConfig& cfg,
                          std::uint64_t seed) {
  if (shifted.dim() != reference.dim()) {
    throw InvalidInputError("split_shifted: dimension mismatch");
  }
  if (folds < 2) {
    throw InvalidInputError("split_shifted: need at least two folds");
  }
  if (shifted.size() < folds) {
    throw InvalidInputError("split_shifted: fewer shifted examples than folds");
  }
  if (reference.size() < 2 || shifted.size() < 2 * folds) {
    // Each fold must leave enough shifted data for a train/calibration split.
    throw InvalidInputError("split_shifted: datasets too small to cross-fit");
  }
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
    throw InvalidInputError("split_shifted: bad threshold");
  }

  SplitResult result;
  result.threshold = threshold;
  result.ratios.assign(shifted.size(), 0.0);
  result.fold_of.assign(shifted.size(), 0);
  result.folds.resize(folds);

  std::vector<std::size_t> order(shifted.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  {
    Rng fold_rng(mix_seed(seed, 0x5A, 0));
    fold_rng.shuffle(order);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    result.fold_of[order[i]] = i % folds;
  }

  std::vector<std::size_t> all_ref(reference.size());
  for (std::size_t i = 0; i < all_ref.size(); ++i) all_ref[i] = i;

  for (std::size_t f = 0; f < folds; ++f) {
    FoldInfo& info = result.folds[f];
    Rng rng(mix_seed(seed, 0x5B, f));

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < shifted.size(); ++i) {
      (result.fold_of[i] == f ? info.scored : pool).push_back(i);
    }

    auto [cal_shift, train_shift] = hold_out(pool, 0.1, rng);
    auto [cal_ref, train_ref] = hold_out(all_ref, 0.1, rng);
    if (train_shift.empty() || train_ref.empty()) {
      throw InvalidInputError("split_shifted: fold too small after holdout");
    }
    info.shifted_train = train_shift;
    info.calibration_shifted = cal_shift;
    info.calibration_reference = cal_ref;

    const LabeledDataset ref_train = subset(reference, train_ref);
    const LabeledDataset shift_train = subset(shifted, train_shift);
    DomainClassifier classifier =
        train_domain_classifier(ref_train, shift_train, cfg);
    classifier.fold = f;
    info.separable_warning = classifier.separable_warning;

    info.priors.p_shift =
        static_cast<double>(shift_train.size()) /
        static_cast<double>(shift_train.size() + ref_train.size());
    info.priors.p_ref = 1.0 - info.priors.p_shift;

    Vector cal_logits;
    std::vector<int> cal_labels;
    for (std::size_t idx : cal_ref) {
      cal_logits.push_back(classifier.logit(reference.features.row(idx)));
      cal_labels.push_back(-1);
    }
    for (std::size_t idx : cal_shift) {
      cal_logits.push_back(classifier.logit(shifted.features.row(idx)));
      cal_labels.push_back(1);
    }
    info.scale = fit_temperature(cal_logits, cal_labels);

    info.calibration_labels = cal_labels;
    info.calibration_probs.reserve(cal_logits.size());
    for (double logit : cal_logits) {
      info.calibration_probs.push_back(
          clamped_posterior(logit, info.scale.alpha));
    }

    const RatioEstimate scores = estimate_ratios(
        classifier, info.scale, subset(shifted, info.scored), info.priors);
    for (std::size_t i = 0; i < info.scored.size(); ++i) {
      result.ratios[info.scored[i]] = scores.ratio[i];
    }
    result.separable_warning |= info.separable_warning;
  }

  for (std::size_t i = 0; i < shifted.size(); ++i) {
    (result.ratios[i] < threshold ? result.out_of_support : result.in_support)
        .push_back(i);
  }
  return result;
}

std::vector<CalibrationBin> calibration_curve(const Vector& probabilities,
                                              const std::vector<int>& labels,
                                              std::size_t bins, double level) {
  if (probabilities.empty() || probabilities.size() != labels.size()) {
    throw InvalidInputError("calibration_curve: bad input lengths");
  }
  if (bins < 2) {
    throw InvalidInputError("calibration_curve: need at least two bins");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidInputError("calibration_curve: level must lie in (0,1)");
  }
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (!(probabilities[i] >= 0.0 && probabilities[i] <= 1.0)) {
      throw InvalidInputError("calibration_curve: probabilities must lie in [0,1]");
    }
    if (labels[i] != 1 && labels[i] != -1) {
      throw InvalidInputError("calibration_curve: labels must be +1/-1");
    }
  }

  Vector sorted = probabilities;
  std::sort(sorted.begin(), sorted.end());
  Vector edges;
  for (std::size_t j = 1; j < bins; ++j) {
    edges.push_back(sorted_quantile(
        sorted, static_cast<double>(j) / static_cast<double>(bins)));
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  const std::size_t n_bins = edges.size() + 1;
  std::vector<double> pred_sum(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0), positives(n_bins, 0);
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const std::size_t b = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), probabilities[i]) -
        edges.begin());
    pred_sum[b] += probabilities[i];
    count[b] += 1;
    if (labels[i] == 1) positives[b] += 1;
  }

  std::vector<CalibrationBin> curve;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    CalibrationBin bin;
    bin.count = count[b];
    bin.mean_pred = pred_sum[b] / static_cast<double>(count[b]);
    bin.rate = static_cast<double>(positives[b]) / static_cast<double>(count[b]);
    const BinomialInterval ci = clopper_pearson(positives[b], count[b], level);
    bin.lo = ci.lo;
    bin.hi = ci.hi;
    curve.push_back(bin);
  }
  return curve;
}

}  // namespace splitter
}  // namespace shiftlab
