#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "shiftlab/logreg.hpp"
#include "shiftlab/matrix.hpp"
#include "shiftlab/shiftgen.hpp"

// Accuracy-on-the-line machinery: probit-space linear fits over accuracy
// points, effective robustness relative to a fit, bootstrap intervals,
// worst-group accuracy, difficulty-matched reweighting, and the
// corrected-examples overlap analysis.
namespace shiftlab {
namespace robustness {

// One model's evaluation: reference accuracy, shifted accuracy, free-form tag
// (model id, checkpoint, subset size).
struct AccuracyPoint {
  double acc_ref = 0.0;
  double acc_shift = 0.0;
  std::string tag;
};

// Least-squares line in probit space: probit(acc_shift) = a*probit(acc_ref)+b.
// clamp is the accuracy floor/ceiling applied before the probit transform.
struct ProbitFit {
  double a = 1.0;
  double b = 0.0;
  double r_squared = 1.0;
  std::size_t n_points = 0;
  double clamp = 0.0;
};

// Half-count continuity correction: accuracies clamped into
// [1/(2 n_test), 1 - 1/(2 n_test)] before the probit transform.
double default_clamp(std::size_t n_test);

double clamp_probability(double p, double clamp);

// Ordinary least squares of probit(acc_shift) on probit(acc_ref) after
// clamping. Throws DegenerateStatsError when fewer than two points remain
// or all clamped acc_ref coincide.
ProbitFit probit_fit(const std::vector<AccuracyPoint>& points, double clamp);

// The fit's predicted shifted accuracy at a given reference accuracy.
double predict_shifted(const ProbitFit& fit, double acc_ref);

// ER = acc_shift - predicted shifted accuracy. May be negative.
double effective_robustness(const ProbitFit& fit, const AccuracyPoint& point);

struct ErInterval {
  double lo = 0.0;
  double hi = 0.0;
  double mean = 0.0;  // point estimate over eval_points
  std::size_t resamples = 0;
};

// Percentile bootstrap for the mean ER of eval_points: the fit is computed
// once from fit_points and held fixed; eval_points are resampled with
// replacement `trials` times. Requires trials >= 100.
ErInterval er_confidence_interval(const std::vector<AccuracyPoint>& fit_points,
                                  const std::vector<AccuracyPoint>& eval_points,
                                  std::size_t trials, double level,
                                  double clamp, std::uint64_t seed);

struct WorstGroup {
  double accuracy = 0.0;
  int group = 0;
};

// Minimum per-group accuracy; ties break to the lowest group tag.
WorstGroup worst_group_accuracy(const std::vector<std::uint8_t>& correct,
                                const std::vector<int>& groups);

// Per-example difficulty: fraction of models that classify it incorrectly.
Vector difficulty_scores(
    const std::vector<std::vector<std::uint8_t>>& per_model_correct);

// Weighted accuracy of the out-of-support split where each example is
// weighted by p_in(bin)/p_out(bin) over shared equal-width difficulty bins
// on [0,1]. Bins with zero in-support mass contribute weight zero; all-zero
// weights raise DegenerateStatsError.
double difficulty_reweighted_accuracy(
    const std::vector<std::vector<std::uint8_t>>& per_model_correct_out,
    const std::vector<std::vector<std::uint8_t>>& per_model_correct_in,
    const std::vector<std::uint8_t>& eval_correct_out, std::size_t bins);

// Examples usually wrong under the baseline but usually right under the
// intervention, with the per-example correctness fractions that decided it.
struct CorrectedSet {
  std::vector<std::size_t> indices;
  Vector baseline_fraction;      // per example, over trials
  Vector intervention_fraction;  // per example, over trials
};

CorrectedSet corrected_examples(
    const std::vector<std::vector<std::uint8_t>>& baseline_correct,
    const std::vector<std::vector<std::uint8_t>>& intervention_correct,
    double threshold = 0.5);

struct OverlapReport {
  // (name_a, name_b, |A intersect B|) for every unordered pair.
  std::vector<std::tuple<std::string, std::string, std::size_t>> pairwise;
  std::size_t union_size = 0;       // union over the non-combined sets
  std::size_t combined_covered = 0; // |combined intersect union|
  double coverage = 1.0;            // covered/union_size; 1.0 if union empty
};

// Pairwise intersections plus how much of the other sets' union the
// designated combined set covers.
OverlapReport overlap_report(
    const std::vector<std::pair<std::string, CorrectedSet>>& sets,
    const std::string& combined_name);

struct SweepConfig {
  std::vector<double> fractions;        // training-subset fractions, (0,1]
  std::size_t trials_per_fraction = 1;
  std::vector<std::size_t> checkpoint_steps;  // extra points mid-training
  double init_scale = 0.0;  // scratch-init magnitude; 0 = zero init
  logreg::GDConfig gd;
  std::uint64_t seed = 0;
};

// From-scratch baseline: for each (fraction, trial), train on a random
// subset of the reference training rows and record (acc_ref, acc_shift) on
// the held-out evaluation sets, plus any requested mid-training checkpoints.
// max_steps scales inversely with the fraction so every run sees a
// comparable number of examples. Points are ordered by (fraction, trial).
std::vector<AccuracyPoint> baseline_sweep(const shiftgen::GeneratorSpec& gen,
                                          const shiftgen::ShiftSpec& shift,
                                          const SweepConfig& cfg);

}  // namespace robustness
}  // namespace shiftlab
