#include "shiftlab/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "shiftlab/errors.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/stats.hpp"

namespace shiftlab {
namespace robustness {

double default_clamp(std::size_t n_test) {
  if (n_test == 0) throw InvalidInputError("default_clamp: n_test must be positive");
  return 1.0 / (2.0 * static_cast<double>(n_test));
}

double clamp_probability(double p, double clamp) {
  return std::min(1.0 - clamp, std::max(clamp, p));
}

namespace {

void check_clamp(double clamp) {
  if (!(clamp > 0.0 && clamp < 0.5)) {
    throw InvalidInputError("clamp must lie in (0, 0.5)");
  }
}

}  // namespace

ProbitFit probit_fit(const std::vector<AccuracyPoint>& points, double clamp) {
  check_clamp(clamp);
  if (points.size() < 2) {
    throw DegenerateStatsError("probit_fit: need at least two points");
  }

  std::vector<double> xs(points.size()), ys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    xs[i] = probit(clamp_probability(points[i].acc_ref, clamp));
    ys[i] = probit(clamp_probability(points[i].acc_shift, clamp));
  }

  const double n = static_cast<double>(points.size());
  double x_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= n;
  y_mean /= n;

  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
    sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
  }
  if (sxx <= 0.0) {
    throw DegenerateStatsError(
        "probit_fit: all reference accuracies identical after clamping");
  }

  ProbitFit fit;
  fit.a = sxy / sxx;
  fit.b = y_mean - fit.a * x_mean;
  fit.n_points = points.size();
  fit.clamp = clamp;

  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = ys[i] - (fit.a * xs[i] + fit.b);
    ss_res += r * r;
    ss_tot += (ys[i] - y_mean) * (ys[i] - y_mean);
  }
  fit.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return fit;
}

double predict_shifted(const ProbitFit& fit, double acc_ref) {
  check_clamp(fit.clamp);
  const double x = probit(clamp_probability(acc_ref, fit.clamp));
  return normal_cdf(fit.a * x + fit.b);
}

double effective_robustness(const ProbitFit& fit, const AccuracyPoint& point) {
  return point.acc_shift - predict_shifted(fit, point.acc_ref);
}

ErInterval er_confidence_interval(const std::vector<AccuracyPoint>& fit_points,
                                  const std::vector<AccuracyPoint>& eval_points,
                                  std::size_t trials, double level,
                                  double clamp, std::uint64_t seed) {
  if (trials < 100) {
    throw InvalidInputError("er_confidence_interval: need at least 100 trials");
  }
  if (eval_points.empty()) {
    throw InvalidInputError("er_confidence_interval: no evaluation points");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidInputError("er_confidence_interval: level must lie in (0,1)");
  }

  const ProbitFit fit = probit_fit(fit_points, clamp);
  std::vector<double> ers(eval_points.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < eval_points.size(); ++i) {
    ers[i] = effective_robustness(fit, eval_points[i]);
    mean += ers[i];
  }
  mean /= static_cast<double>(ers.size());

  Rng rng(mix_seed(seed, 0xE5, 0));
  std::vector<double> means(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    double total = 0.0;
    for (std::size_t i = 0; i < ers.size(); ++i) {
      total += ers[rng.integer(ers.size())];
    }
    means[t] = total / static_cast<double>(ers.size());
  }
  std::sort(means.begin(), means.end());

  ErInterval interval;
  interval.mean = mean;
  interval.resamples = trials;
  const double tail = (1.0 - level) / 2.0;
  interval.lo = sorted_quantile(means, tail);
  interval.hi = sorted_quantile(means, 1.0 - tail);
  return interval;
}

WorstGroup worst_group_accuracy(const std::vector<std::uint8_t>& correct,
                                const std::vector<int>& groups) {
  if (correct.empty() || correct.size() != groups.size()) {
    throw InvalidInputError("worst_group_accuracy: bad input lengths");
  }
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // hits, total
  for (std::size_t i = 0; i < correct.size(); ++i) {
    auto& entry = counts[groups[i]];
    entry.first += correct[i] ? 1 : 0;
    entry.second += 1;
  }
  WorstGroup worst;
  bool first = true;
  for (const auto& [tag, entry] : counts) {
    const double acc =
        static_cast<double>(entry.first) / static_cast<double>(entry.second);
    // Map iteration is tag-ascending, so strict < breaks ties to lowest tag.
    if (first || acc < worst.accuracy) {
      worst.accuracy = acc;
      worst.group = tag;
      first = false;
    }
  }
  return worst;
}

Vector difficulty_scores(
    const std::vector<std::vector<std::uint8_t>>& per_model_correct) {
  if (per_model_correct.empty()) {
    throw InvalidInputError("difficulty_scores: no models");
  }
  const std::size_t n = per_model_correct.front().size();
  for (const auto& row : per_model_correct) {
    if (row.size() != n) {
      throw InvalidInputError("difficulty_scores: ragged correctness matrix");
    }
  }
  Vector difficulty(n, 0.0);
  for (const auto& row : per_model_correct) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!row[i]) difficulty[i] += 1.0;
    }
  }
  for (double& d : difficulty) d /= static_cast<double>(per_model_correct.size());
  return difficulty;
}

namespace {

std::size_t difficulty_bin(double d, std::size_t bins) {
  const auto raw = static_cast<std::size_t>(d * static_cast<double>(bins));
  return std::min(raw, bins - 1);
}

std::vector<double> bin_density(const Vector& scores, std::size_t bins) {
  std::vector<double> density(bins, 0.0);
  for (double d : scores) density[difficulty_bin(d, bins)] += 1.0;
  for (double& v : density) v /= static_cast<double>(scores.size());
  return density;
}

}  // namespace

double difficulty_reweighted_accuracy(
    const std::vector<std::vector<std::uint8_t>>& per_model_correct_out,
    const std::vector<std::vector<std::uint8_t>>& per_model_correct_in,
    const std::vector<std::uint8_t>& eval_correct_out, std::size_t bins) {
  if (bins < 2) {
    throw InvalidInputError("difficulty_reweighted_accuracy: bins must be >= 2");
  }
  const Vector d_out = difficulty_scores(per_model_correct_out);
  const Vector d_in = difficulty_scores(per_model_correct_in);
  if (d_out.empty() || d_in.empty()) {
    throw InvalidInputError("difficulty_reweighted_accuracy: empty split");
  }
  if (eval_correct_out.size() != d_out.size()) {
    throw InvalidInputError(
        "difficulty_reweighted_accuracy: eval correctness length mismatch");
  }

  const std::vector<double> p_in = bin_density(d_in, bins);
  const std::vector<double> p_out = bin_density(d_out, bins);

  Vector weights(d_out.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    const std::size_t b = difficulty_bin(d_out[i], bins);
    // p_out[b] > 0: example i itself contributes mass to its bin.
    weights[i] = p_in[b] / p_out[b];
    total += weights[i];
  }
  if (total <= 0.0) {
    throw DegenerateStatsError(
        "difficulty_reweighted_accuracy: no in-support mass overlaps the "
        "out-of-support difficulty bins");
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (eval_correct_out[i]) acc += weights[i];
  }
  return acc / total;
}

namespace {

Vector column_fractions(const std::vector<std::vector<std::uint8_t>>& trials,
                        const char* what) {
  if (trials.empty()) {
    throw InvalidInputError(std::string(what) + ": no trials");
  }
  const std::size_t n = trials.front().size();
  Vector fractions(n, 0.0);
  for (const auto& row : trials) {
    if (row.size() != n) {
      throw InvalidInputError(std::string(what) + ": ragged trial matrix");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (row[i]) fractions[i] += 1.0;
    }
  }
  for (double& f : fractions) f /= static_cast<double>(trials.size());
  return fractions;
}

}  // namespace

CorrectedSet corrected_examples(
    const std::vector<std::vector<std::uint8_t>>& baseline_correct,
    const std::vector<std::vector<std::uint8_t>>& intervention_correct,
    double threshold) {
  CorrectedSet out;
  out.baseline_fraction = column_fractions(baseline_correct, "corrected_examples");
  out.intervention_fraction =
      column_fractions(intervention_correct, "corrected_examples");
  if (out.baseline_fraction.size() != out.intervention_fraction.size()) {
    throw InvalidInputError("corrected_examples: example count mismatch");
  }
  for (std::size_t i = 0; i < out.baseline_fraction.size(); ++i) {
    if (out.baseline_fraction[i] < threshold &&
        out.intervention_fraction[i] >= threshold) {
      out.indices.push_back(i);
    }
  }
  return out;
}

OverlapReport overlap_report(
    const std::vector<std::pair<std::string, CorrectedSet>>& sets,
    const std::string& combined_name) {
  if (sets.size() < 2) {
    throw InvalidInputError("overlap_report: need at least two sets");
  }
  std::vector<std::set<std::size_t>> members(sets.size());
  std::ptrdiff_t combined = -1;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    members[i].insert(sets[i].second.indices.begin(),
                      sets[i].second.indices.end());
    if (sets[i].first == combined_name) combined = static_cast<std::ptrdiff_t>(i);
  }
  if (combined < 0) {
    throw InvalidInputError("overlap_report: combined set not found: " +
                            combined_name);
  }

  OverlapReport report;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      std::size_t common = 0;
      for (std::size_t idx : members[i]) common += members[j].count(idx);
      report.pairwise.emplace_back(sets[i].first, sets[j].first, common);
    }
  }

  std::set<std::size_t> pooled;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) == combined) continue;
    pooled.insert(members[i].begin(), members[i].end());
  }
  report.union_size = pooled.size();
  for (std::size_t idx : pooled) {
    report.combined_covered += members[static_cast<std::size_t>(combined)].count(idx);
  }
  report.coverage =
      pooled.empty() ? 1.0
                     : static_cast<double>(report.combined_covered) /
                           static_cast<double>(report.union_size);
  return report;
}

namespace {

std::string sweep_tag(double fraction, std::size_t trial, const char* suffix) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "f%g-t%zu-%s", fraction, trial, suffix);
  return buf;
}

std::string sweep_tag_step(double fraction, std::size_t trial,
                           std::size_t step) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "f%g-t%zu-s%zu", fraction, trial, step);
  return buf;
}

}  // namespace

std::vector<AccuracyPoint> baseline_sweep(const shiftgen::GeneratorSpec& gen,
                                          const shiftgen::ShiftSpec& shift,
                                          const SweepConfig& cfg) {
  for (double f : cfg.fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw InvalidInputError("baseline_sweep: fractions must lie in (0, 1]");
    }
  }
  if (!(cfg.init_scale >= 0.0)) {
    throw InvalidInputError("baseline_sweep: init_scale must be non-negative");
  }

  const shiftgen::DatasetPair pair = shiftgen::generate_pair(gen, shift);
  const LabeledDataset train = shiftgen::reference_train(pair, gen);
  const LabeledDataset eval_ref = shiftgen::reference_eval(pair, gen);
  const LabeledDataset& eval_shift = pair.shifted;

  std::vector<std::size_t> checkpoints = cfg.checkpoint_steps;
  std::sort(checkpoints.begin(), checkpoints.end());

  std::vector<AccuracyPoint> points;
  for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
    const double fraction = cfg.fractions[fi];
    for (std::size_t trial = 0; trial < cfg.trials_per_fraction; ++trial) {
      Rng rng(mix_seed(cfg.seed, fi, trial));

      LabeledDataset subset_data;
      if (fraction >= 1.0) {
        subset_data = train;
      } else {
        const auto want = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::llround(fraction * static_cast<double>(train.size()))));
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        order.resize(std::min(want, train.size()));
        subset_data = subset(train, order);
      }

      Vector init(train.dim(), 0.0);
      if (cfg.init_scale > 0.0) {
        for (double& v : init) v = rng.normal(0.0, cfg.init_scale);
      }

      logreg::GDConfig gd = cfg.gd;
      gd.max_steps = static_cast<std::size_t>(
          std::llround(static_cast<double>(cfg.gd.max_steps) / fraction));

      logreg::StepObserver observer = nullptr;
      if (!checkpoints.empty()) {
        observer = [&](std::size_t step, const logreg::WeightVector& w) {
          if (std::binary_search(checkpoints.begin(), checkpoints.end(), step)) {
            points.push_back({logreg::accuracy(w, eval_ref),
                              logreg::accuracy(w, eval_shift),
                              sweep_tag_step(fraction, trial, step)});
          }
        };
      }

      const logreg::GDTrace trace =
          logreg::gradient_descent(init, subset_data, gd, observer);
      if (trace.reason == logreg::GDTermination::diverged) {
        throw NoMinimumError("baseline_sweep: training diverged (separable subset)");
      }
      points.push_back({logreg::accuracy(trace.final_weights, eval_ref),
                        logreg::accuracy(trace.final_weights, eval_shift),
                        sweep_tag(fraction, trial, "final")});
    }
  }
  return points;
}

}  // namespace robustness
}  // namespace shiftlab
