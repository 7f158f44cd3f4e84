#include "shiftlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "shiftlab/debias.hpp"
#include "shiftlab/errors.hpp"
#include "shiftlab/logreg.hpp"
#include "shiftlab/parallel.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/robustness.hpp"
#include "shiftlab/shiftgen.hpp"
#include "shiftlab/splitter.hpp"
#include "shiftlab/stats.hpp"
#include "shiftlab/subspace.hpp"

namespace shiftlab {
namespace experiments {
namespace {

using config::ResolvedConfig;
using io::Json;
using robustness::AccuracyPoint;
using robustness::ProbitFit;

// Seed-mixing arms, one block per command so derived streams never collide.
// README documents the scheme; changing a constant changes every report.
constexpr std::uint64_t kTheoremData = 0x10, kTheoremInit = 0x11;
constexpr std::uint64_t kGenData = 0x20;
constexpr std::uint64_t kSweepData = 0x30, kSweepAlg = 0x31;
constexpr std::uint64_t kErData = 0x41, kErSweep = 0x42, kErAux = 0x43,
                        kErBootstrap = 0x44;
constexpr std::uint64_t kSplitData = 0x50, kSplitAlg = 0x51;
constexpr std::uint64_t kCombineData = 0x60, kCombineAux = 0x61,
                        kCombineBalance = 0x62, kCombineInit = 0x63,
                        kCombineSweep = 0x64;
constexpr std::uint64_t kCurateData = 0x70, kCurateAux = 0x72,
                        kCurateMain = 0x73, kCurateSizes = 0x74;

Json base_report(const char* command, const ResolvedConfig& cfg) {
  Json report = Json::object();
  report["command"] = command;
  report["seed"] = cfg.seed;
  report["config"] = config::echo_config(cfg);
  return report;
}

const char* termination_name(logreg::GDTermination reason) {
  switch (reason) {
    case logreg::GDTermination::converged: return "converged";
    case logreg::GDTermination::step_limit: return "step_limit";
    case logreg::GDTermination::diverged: return "diverged";
  }
  return "unknown";
}

logreg::WeightVector fit_weights(const logreg::WeightVector& init,
                                 const LabeledDataset& data,
                                 const logreg::GDConfig& cfg) {
  logreg::GDTrace trace = logreg::gradient_descent(init, data, cfg);
  if (trace.reason == logreg::GDTermination::diverged) {
    throw NoMinimumError("training diverged: no finite minimizer");
  }
  return std::move(trace.final_weights);
}

double resolve_clamp(const ResolvedConfig& cfg, std::size_t n_test) {
  return cfg.er.clamp ? *cfg.er.clamp : robustness::default_clamp(n_test);
}

shiftgen::AuxiliarySpec auxiliary_spec(const shiftgen::GeneratorSpec& gen,
                                       const shiftgen::ShiftSpec& shift,
                                       const config::PretrainConfig& pre,
                                       std::uint64_t seed) {
  shiftgen::AuxiliarySpec aux;
  aux.ambient_dim = gen.ambient_dim;
  aux.signal_dims = pre.signal_dims.empty()
                        ? shiftgen::auxiliary_signal_dims(gen, shift)
                        : pre.signal_dims;
  aux.signal = pre.signal;
  aux.noise_sigma = pre.noise_sigma;
  aux.label_noise = pre.label_noise;
  aux.n = pre.n;
  aux.seed = seed;
  return aux;
}

Json fit_json(const ProbitFit& fit) {
  Json out = Json::object();
  out["a"] = fit.a;
  out["b"] = fit.b;
  out["r_squared"] = fit.r_squared;
  out["n_points"] = fit.n_points;
  out["clamp"] = fit.clamp;
  return out;
}

// Percentile bootstrap over scalar values, mirroring the interval the
// point-level helper produces.
std::pair<double, double> percentile_bootstrap(const std::vector<double>& values,
                                               std::size_t trials, double level,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> means(trials, 0.0);
  for (std::size_t t = 0; t < trials; ++t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum += values[rng.integer(values.size())];
    }
    means[t] = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  return {sorted_quantile(means, tail), sorted_quantile(means, 1.0 - tail)};
}

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

// Correlation between one feature column and the labels; 0 when either side
// is constant (an all-zero column is genuinely uncorrelated, not undefined,
// for the audit's purposes).
double label_correlation(const LabeledDataset& data, std::size_t column) {
  const std::size_t n = data.size();
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += data.features.at(i, column);
    mean_y += data.labels[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = data.features.at(i, column) - mean_x;
    const double dy = data.labels[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double group_accuracy(const std::vector<std::uint8_t>& correct,
                      const std::vector<int>& groups, int which) {
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    if (groups[i] != which) continue;
    ++total;
    hits += correct[i];
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

CommandOutcome run_theorem_check(const ResolvedConfig& cfg,
                                 std::size_t workers) {
  CommandOutcome out;
  out.report = base_report("theorem-check", cfg);

  shiftgen::GeneratorSpec gen = cfg.generator;
  gen.seed = mix_seed(cfg.seed, kTheoremData, 0);
  const shiftgen::DatasetPair pair = shiftgen::generate_pair(gen, cfg.shift);
  const LabeledDataset train = shiftgen::reference_train(pair, gen);
  const Subspace span = logreg::data_subspace(train);
  out.report["n_train"] = train.size();
  out.report["subspace_rank"] = span.rank();

  logreg::WeightVector w_ref;
  try {
    w_ref = logreg::reference_minimizer(train, cfg.gd);
  } catch (const NoMinimumError& err) {
    Json error = Json::object();
    error["type"] = "no_minimum";
    error["message"] = err.what();
    out.report["error"] = error;
    out.exit_code = 2;
    out.summary = "theorem-check: no finite minimizer (separable data)";
    return out;
  }

  struct InitResult {
    double residual = 0.0;
    double max_orth_drift = 0.0;
    std::size_t steps = 0;
    const char* termination = "";
  };
  const std::size_t d = gen.ambient_dim;
  const auto one_init = [&](std::size_t i) -> InitResult {
    Rng rng(mix_seed(cfg.seed, kTheoremInit, i));
    Vector w0(d, 0.0);
    if (cfg.theorem.init_norm > 0.0) {
      for (double& value : w0) value = rng.normal();
      const double len = norm(w0);
      if (len > 0.0) scale(w0, cfg.theorem.init_norm / len);
    }
    const Vector orth0 = project_complement(w0, span);

    InitResult result;
    const auto watch_drift = [&](std::size_t, const logreg::WeightVector& w) {
      Vector drift = project_complement(w, span);
      axpy(-1.0, orth0, drift);
      result.max_orth_drift = std::max(result.max_orth_drift, norm(drift));
    };
    logreg::GDTrace trace = logreg::gradient_descent(w0, train, cfg.gd, watch_drift);
    result.steps = trace.steps;
    result.termination = termination_name(trace.reason);

    Vector in_span = project(trace.final_weights, span);
    Vector orth = project_complement(trace.final_weights, span);
    axpy(-1.0, w_ref, in_span);
    axpy(-1.0, orth0, orth);
    result.residual = norm(in_span) + norm(orth);
    return result;
  };
  const std::vector<InitResult> results =
      parallel_map<InitResult>(cfg.theorem.inits, workers, one_init);

  Json rows = Json::array();
  double max_residual = 0.0, max_drift = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const InitResult& r = results[i];
    max_residual = std::max(max_residual, r.residual);
    max_drift = std::max(max_drift, r.max_orth_drift);
    Json row = Json::object();
    row["init"] = i;
    row["residual"] = r.residual;
    row["max_orth_drift"] = r.max_orth_drift;
    row["steps"] = r.steps;
    row["termination"] = r.termination;
    rows.push_back(row);
  }
  const bool pass = max_residual <= cfg.theorem.tolerance &&
                    max_drift <= cfg.theorem.orth_tolerance;
  out.report["inits"] = rows;
  out.report["max_residual"] = max_residual;
  out.report["max_orth_drift"] = max_drift;
  out.report["tolerance"] = cfg.theorem.tolerance;
  out.report["orth_tolerance"] = cfg.theorem.orth_tolerance;
  out.report["pass"] = pass;
  out.exit_code = pass ? 0 : 1;
  out.summary = std::string("theorem-check: max_residual=") +
                io::format_g17(max_residual) + " max_orth_drift=" +
                io::format_g17(max_drift) + (pass ? " pass" : " FAIL");
  return out;
}

CommandOutcome run_gen(const ResolvedConfig& cfg, std::size_t) {
  CommandOutcome out;
  out.report = base_report("gen", cfg);

  shiftgen::GeneratorSpec gen = cfg.generator;
  gen.seed = mix_seed(cfg.seed, kGenData, 0);
  const shiftgen::DatasetPair pair = shiftgen::generate_pair(gen, cfg.shift);
  const shiftgen::SupportReport support =
      shiftgen::support_check(pair.reference, pair.shifted);

  out.report["n_reference"] = pair.reference.size();
  out.report["n_shifted"] = pair.shifted.size();
  out.report["ambient_dim"] = pair.reference.dim();
  Json sup = Json::object();
  sup["max_complement_norm"] = support.max_complement_norm;
  sup["worst_index"] = support.worst_index;
  sup["tol"] = support.tol;
  sup["in_support"] = support.in_support;
  out.report["support"] = sup;

  out.files.emplace_back("reference.csv", io::dataset_to_csv(pair.reference));
  out.files.emplace_back("shifted.csv", io::dataset_to_csv(pair.shifted));
  out.summary = std::string("gen: wrote ") +
                std::to_string(pair.reference.size()) + " reference and " +
                std::to_string(pair.shifted.size()) + " shifted rows, " +
                (support.in_support ? "in-support" : "out-of-support");
  return out;
}

CommandOutcome run_sweep(const ResolvedConfig& cfg, std::size_t) {
  CommandOutcome out;
  out.report = base_report("sweep", cfg);

  shiftgen::GeneratorSpec gen = cfg.generator;
  gen.seed = mix_seed(cfg.seed, kSweepData, 0);
  robustness::SweepConfig sweep = cfg.sweep;
  sweep.gd = cfg.gd;
  sweep.seed = mix_seed(cfg.seed, kSweepAlg, 0);
  const std::vector<AccuracyPoint> points =
      robustness::baseline_sweep(gen, cfg.shift, sweep);

  const double clamp = resolve_clamp(cfg, gen.n_test);
  const ProbitFit fit = robustness::probit_fit(points, clamp);

  io::CsvBuilder csv;
  csv.cell("tag").cell("acc_ref").cell("acc_shift").end_row();
  for (const AccuracyPoint& p : points) {
    csv.cell(p.tag).cell(p.acc_ref).cell(p.acc_shift).end_row();
  }
  out.files.emplace_back("points.csv", csv.str());
  out.report["n_points"] = points.size();
  out.report["fit"] = fit_json(fit);
  out.summary = std::string("sweep: ") + std::to_string(points.size()) +
                " points, fit a=" + io::format_g17(fit.a) +
                " b=" + io::format_g17(fit.b) +
                " r2=" + io::format_g17(fit.r_squared);
  return out;
}

CommandOutcome run_er(const ResolvedConfig& cfg, std::size_t workers) {
  CommandOutcome out;
  out.report = base_report("er", cfg);
  out.report["trials"] = cfg.er.trials;

  io::CsvBuilder scatter;
  scatter.cell("trial").cell("arm").cell("tag").cell("acc_ref").cell("acc_shift")
      .end_row();
  io::CsvBuilder curve;
  curve.cell("trial").cell("acc_ref").cell("acc_shift_pred").end_row();

  if (cfg.er.trials == 0) {
    out.report["per_trial"] = Json::array();
    out.report["mean_er"] = nullptr;
    out.report["ci"] = nullptr;
    out.files.emplace_back("scatter.csv", scatter.str());
    out.files.emplace_back("fit_curve.csv", curve.str());
    out.summary = "er: 0 trials, nothing to estimate";
    return out;
  }

  struct TrialResult {
    std::vector<AccuracyPoint> baseline;
    ProbitFit fit;
    AccuracyPoint pretrained;
    double er = 0.0;
  };
  const auto one_trial = [&](std::size_t t) -> TrialResult {
    shiftgen::GeneratorSpec gen = cfg.generator;
    gen.seed = mix_seed(cfg.seed, kErData, t);
    robustness::SweepConfig sweep = cfg.sweep;
    sweep.gd = cfg.gd;
    sweep.seed = mix_seed(cfg.seed, kErSweep, t);

    TrialResult result;
    result.baseline = robustness::baseline_sweep(gen, cfg.shift, sweep);
    result.fit = robustness::probit_fit(result.baseline,
                                        resolve_clamp(cfg, gen.n_test));

    const shiftgen::AuxiliarySpec aux = auxiliary_spec(
        gen, cfg.shift, cfg.er.pretrain, mix_seed(cfg.seed, kErAux, t));
    const LabeledDataset aux_data = shiftgen::generate_auxiliary(aux);
    const Vector w_pre =
        fit_weights(Vector(gen.ambient_dim, 0.0), aux_data, cfg.gd);

    const shiftgen::DatasetPair pair = shiftgen::generate_pair(gen, cfg.shift);
    const LabeledDataset train = shiftgen::reference_train(pair, gen);
    const LabeledDataset eval_ref = shiftgen::reference_eval(pair, gen);
    const Vector w = fit_weights(w_pre, train, cfg.gd);

    result.pretrained = {logreg::accuracy(w, eval_ref),
                         logreg::accuracy(w, pair.shifted), "pretrained"};
    result.er = robustness::effective_robustness(result.fit, result.pretrained);
    return result;
  };
  const std::vector<TrialResult> trials =
      parallel_map<TrialResult>(cfg.er.trials, workers, one_trial);

  Json per_trial = Json::array();
  std::vector<double> ers;
  ers.reserve(trials.size());
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const TrialResult& r = trials[t];
    ers.push_back(r.er);
    Json row = Json::object();
    row["trial"] = t;
    row["fit"] = fit_json(r.fit);
    row["acc_ref"] = r.pretrained.acc_ref;
    row["acc_shift"] = r.pretrained.acc_shift;
    row["er"] = r.er;
    per_trial.push_back(row);

    for (const AccuracyPoint& p : r.baseline) {
      scatter.cell(t).cell("baseline").cell(p.tag).cell(p.acc_ref)
          .cell(p.acc_shift).end_row();
    }
    scatter.cell(t).cell("pretrained").cell(r.pretrained.tag)
        .cell(r.pretrained.acc_ref).cell(r.pretrained.acc_shift).end_row();
    for (int i = 1; i < 50; ++i) {
      const double acc_ref = 0.02 * i;
      curve.cell(t).cell(acc_ref)
          .cell(robustness::predict_shifted(r.fit, acc_ref)).end_row();
    }
  }

  const double mean_er = mean_of(ers);
  const auto [lo, hi] = percentile_bootstrap(
      ers, cfg.er.bootstrap_trials, cfg.er.level,
      mix_seed(cfg.seed, kErBootstrap, 0));
  out.report["per_trial"] = per_trial;
  out.report["mean_er"] = mean_er;
  Json ci = Json::object();
  ci["lo"] = lo;
  ci["hi"] = hi;
  ci["level"] = cfg.er.level;
  ci["resamples"] = cfg.er.bootstrap_trials;
  ci["method"] = "percentile_bootstrap";
  out.report["ci"] = ci;
  out.files.emplace_back("scatter.csv", scatter.str());
  out.files.emplace_back("fit_curve.csv", curve.str());
  out.summary = std::string("er: trials=") + std::to_string(cfg.er.trials) +
                " mean_er=" + io::format_g17(mean_er) + " ci=[" +
                io::format_g17(lo) + "," + io::format_g17(hi) + "]";
  return out;
}

CommandOutcome run_split(const ResolvedConfig& cfg, std::size_t) {
  CommandOutcome out;
  out.report = base_report("split", cfg);

  shiftgen::GeneratorSpec gen = cfg.generator;
  gen.seed = mix_seed(cfg.seed, kSplitData, 0);
  const shiftgen::DatasetPair pair = shiftgen::generate_pair(gen, cfg.shift);
  const splitter::SplitResult result = splitter::split_shifted(
      pair.shifted, pair.reference, cfg.split.folds, cfg.split.threshold,
      cfg.split.gd, mix_seed(cfg.seed, kSplitAlg, 0));

  std::vector<char> is_in(pair.shifted.size(), 0);
  for (std::size_t i : result.in_support) is_in[i] = 1;
  io::CsvBuilder split_csv;
  split_csv.cell("index").cell("ratio").cell("split").end_row();
  for (std::size_t i = 0; i < result.ratios.size(); ++i) {
    split_csv.cell(i).cell(result.ratios[i]).cell(is_in[i] ? "in" : "out")
        .end_row();
  }
  out.files.emplace_back("split.csv", split_csv.str());

  Vector cal_probs;
  std::vector<int> cal_labels;
  Json fold_rows = Json::array();
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    const splitter::FoldInfo& fold = result.folds[f];
    cal_probs.insert(cal_probs.end(), fold.calibration_probs.begin(),
                     fold.calibration_probs.end());
    cal_labels.insert(cal_labels.end(), fold.calibration_labels.begin(),
                      fold.calibration_labels.end());
    Json row = Json::object();
    row["fold"] = f;
    row["n_scored"] = fold.scored.size();
    row["n_train_shifted"] = fold.shifted_train.size();
    row["n_calibration_shifted"] = fold.calibration_shifted.size();
    row["n_calibration_reference"] = fold.calibration_reference.size();
    row["alpha"] = fold.scale.alpha;
    row["alpha_floored"] = fold.scale.floored;
    row["alpha_capped"] = fold.scale.capped;
    row["separable_warning"] = fold.separable_warning;
    row["p_ref"] = fold.priors.p_ref;
    row["p_shift"] = fold.priors.p_shift;
    fold_rows.push_back(row);
  }
  const std::vector<splitter::CalibrationBin> curve = splitter::calibration_curve(
      cal_probs, cal_labels, cfg.split.calibration_bins, cfg.split.level);

  io::CsvBuilder cal_csv;
  cal_csv.cell("bin").cell("count").cell("mean_pred").cell("rate").cell("lo")
      .cell("hi").end_row();
  double max_dev = 0.0;
  Json cal_rows = Json::array();
  for (std::size_t b = 0; b < curve.size(); ++b) {
    const splitter::CalibrationBin& bin = curve[b];
    max_dev = std::max(max_dev, std::abs(bin.mean_pred - bin.rate));
    cal_csv.cell(b).cell(bin.count).cell(bin.mean_pred).cell(bin.rate)
        .cell(bin.lo).cell(bin.hi).end_row();
    Json row = Json::object();
    row["bin"] = b;
    row["count"] = bin.count;
    row["mean_pred"] = bin.mean_pred;
    row["rate"] = bin.rate;
    row["lo"] = bin.lo;
    row["hi"] = bin.hi;
    cal_rows.push_back(row);
  }
  out.files.emplace_back("calibration.csv", cal_csv.str());

  if (!cfg.split.threshold_sweep.empty()) {
    io::CsvBuilder sweep_csv;
    sweep_csv.cell("threshold").cell("in_count").cell("out_count").end_row();
    for (double t : cfg.split.threshold_sweep) {
      std::size_t in_count = 0;
      for (double ratio : result.ratios) {
        if (!(ratio < t)) ++in_count;
      }
      sweep_csv.cell(t).cell(in_count).cell(result.ratios.size() - in_count)
          .end_row();
    }
    out.files.emplace_back("threshold_sweep.csv", sweep_csv.str());
  }

  out.report["n_shifted"] = pair.shifted.size();
  out.report["n_reference"] = pair.reference.size();
  out.report["threshold"] = result.threshold;
  out.report["in_count"] = result.in_support.size();
  out.report["out_count"] = result.out_of_support.size();
  out.report["separable_warning"] = result.separable_warning;
  out.report["folds"] = fold_rows;
  out.report["calibration"] = cal_rows;
  out.report["calibration_max_dev"] = max_dev;
  out.summary = std::string("split: in=") +
                std::to_string(result.in_support.size()) + " out=" +
                std::to_string(result.out_of_support.size()) +
                " calibration_max_dev=" + io::format_g17(max_dev);
  return out;
}

CommandOutcome run_combine(const ResolvedConfig& cfg, std::size_t workers) {
  CommandOutcome out;
  out.report = base_report("combine", cfg);
  if (cfg.combine.trials == 0) {
    throw ConfigError("combine.trials must be positive");
  }

  shiftgen::GeneratorSpec gen = cfg.generator;
  gen.seed = mix_seed(cfg.seed, kCombineData, 0);
  const shiftgen::DatasetPair pair = shiftgen::generate_pair(gen, cfg.shift);
  const LabeledDataset train = shiftgen::reference_train(pair, gen);
  const LabeledDataset eval_ref = shiftgen::reference_eval(pair, gen);

  robustness::SweepConfig sweep = cfg.sweep;
  sweep.gd = cfg.gd;
  sweep.seed = mix_seed(cfg.seed, kCombineSweep, 0);
  const std::vector<AccuracyPoint> points =
      robustness::baseline_sweep(gen, cfg.shift, sweep);
  const ProbitFit fit =
      robustness::probit_fit(points, resolve_clamp(cfg, gen.n_test));

  static constexpr const char* kArms[] = {"scratch", "pretrained", "debiased",
                                          "pretrained_debiased"};
  constexpr std::size_t kNumArms = 4;
  struct TrialResult {
    AccuracyPoint point[kNumArms];
    double er[kNumArms];
    std::vector<std::uint8_t> correct[kNumArms];
    std::size_t winner = 0;
  };
  const std::size_t d = gen.ambient_dim;
  const auto one_trial = [&](std::size_t t) -> TrialResult {
    const shiftgen::AuxiliarySpec aux =
        auxiliary_spec(gen, cfg.shift, cfg.combine.pretrain,
                       mix_seed(cfg.seed, kCombineAux, t));
    const Vector w_pre =
        fit_weights(Vector(d, 0.0), shiftgen::generate_auxiliary(aux), cfg.gd);

    Rng init_rng(mix_seed(cfg.seed, kCombineInit, t));
    Vector w0(d, 0.0);
    if (cfg.combine.init_scale > 0.0) {
      for (double& value : w0) value = init_rng.normal(0.0, cfg.combine.init_scale);
    }

    const LabeledDataset balanced =
        cfg.combine.intervention == "balance"
            ? debias::balance_training_data(
                  train, cfg.shift, mix_seed(cfg.seed, kCombineBalance, t))
            : train;

    const Vector models[kNumArms] = {
        fit_weights(w0, train, cfg.gd), fit_weights(w_pre, train, cfg.gd),
        fit_weights(w0, balanced, cfg.gd), fit_weights(w_pre, balanced, cfg.gd)};

    TrialResult result;
    for (std::size_t a = 0; a < kNumArms; ++a) {
      result.point[a] = {logreg::accuracy(models[a], eval_ref),
                         logreg::accuracy(models[a], pair.shifted), kArms[a]};
      result.er[a] = robustness::effective_robustness(fit, result.point[a]);
      result.correct[a] = logreg::per_example_correct(models[a], pair.shifted);
      if (result.point[a].acc_shift > result.point[result.winner].acc_shift) {
        result.winner = a;
      }
    }
    return result;
  };
  const std::vector<TrialResult> trials =
      parallel_map<TrialResult>(cfg.combine.trials, workers, one_trial);

  io::CsvBuilder arms_csv;
  arms_csv.cell("trial").cell("arm").cell("acc_ref").cell("acc_shift").cell("er")
      .end_row();
  std::vector<std::vector<std::uint8_t>> correct[kNumArms];
  double mean_acc_ref[kNumArms] = {}, mean_acc_shift[kNumArms] = {},
         mean_er[kNumArms] = {};
  std::size_t wins[kNumArms] = {};
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const TrialResult& r = trials[t];
    ++wins[r.winner];
    for (std::size_t a = 0; a < kNumArms; ++a) {
      arms_csv.cell(t).cell(kArms[a]).cell(r.point[a].acc_ref)
          .cell(r.point[a].acc_shift).cell(r.er[a]).end_row();
      mean_acc_ref[a] += r.point[a].acc_ref;
      mean_acc_shift[a] += r.point[a].acc_shift;
      mean_er[a] += r.er[a];
      correct[a].push_back(r.correct[a]);
    }
  }
  out.files.emplace_back("arms.csv", arms_csv.str());

  const double n_trials = static_cast<double>(trials.size());
  Json arm_rows = Json::array();
  std::size_t best_arm = 0;
  for (std::size_t a = 0; a < kNumArms; ++a) {
    mean_acc_ref[a] /= n_trials;
    mean_acc_shift[a] /= n_trials;
    mean_er[a] /= n_trials;
    if (mean_acc_shift[a] > mean_acc_shift[best_arm]) best_arm = a;
    Json row = Json::object();
    row["arm"] = kArms[a];
    row["mean_acc_ref"] = mean_acc_ref[a];
    row["mean_acc_shift"] = mean_acc_shift[a];
    row["mean_er"] = mean_er[a];
    row["wins"] = wins[a];
    arm_rows.push_back(row);
  }
  out.report["fit"] = fit_json(fit);
  out.report["arms"] = arm_rows;
  out.report["best_arm"] = kArms[best_arm];

  const double threshold = cfg.combine.corrected_threshold;
  const robustness::CorrectedSet corrected[3] = {
      robustness::corrected_examples(correct[0], correct[1], threshold),
      robustness::corrected_examples(correct[0], correct[2], threshold),
      robustness::corrected_examples(correct[0], correct[3], threshold)};
  const robustness::OverlapReport overlap = robustness::overlap_report(
      {{"pretrained", corrected[0]},
       {"debiased", corrected[1]},
       {"pretrained_debiased", corrected[2]}},
      "pretrained_debiased");

  Json corrected_json = Json::object();
  corrected_json["pretrained"] = corrected[0].indices.size();
  corrected_json["debiased"] = corrected[1].indices.size();
  corrected_json["pretrained_debiased"] = corrected[2].indices.size();
  out.report["corrected"] = corrected_json;
  Json overlap_json = Json::object();
  Json pair_rows = Json::array();
  for (const auto& [name_a, name_b, count] : overlap.pairwise) {
    Json row = Json::object();
    row["a"] = name_a;
    row["b"] = name_b;
    row["intersection"] = count;
    pair_rows.push_back(row);
  }
  overlap_json["pairwise"] = pair_rows;
  overlap_json["union_size"] = overlap.union_size;
  overlap_json["combined_covered"] = overlap.combined_covered;
  overlap_json["coverage"] = overlap.coverage;
  out.report["overlap"] = overlap_json;

  io::CsvBuilder corrected_csv;
  corrected_csv.cell("example").cell("scratch_fraction")
      .cell("pretrained_fraction").cell("debiased_fraction")
      .cell("pretrained_debiased_fraction").end_row();
  for (std::size_t i = 0; i < pair.shifted.size(); ++i) {
    corrected_csv.cell(i).cell(corrected[0].baseline_fraction[i])
        .cell(corrected[0].intervention_fraction[i])
        .cell(corrected[1].intervention_fraction[i])
        .cell(corrected[2].intervention_fraction[i]).end_row();
  }
  out.files.emplace_back("corrected.csv", corrected_csv.str());

  out.summary = std::string("combine: best_arm=") + kArms[best_arm] +
                " coverage=" + io::format_g17(overlap.coverage);
  return out;
}

CommandOutcome run_curate(const ResolvedConfig& cfg, std::size_t workers) {
  CommandOutcome out;
  out.report = base_report("curate", cfg);
  if (cfg.shift.kind != shiftgen::ShiftKind::group_imbalance) {
    throw ConfigError("curate requires shift.kind \"group_imbalance\"");
  }
  if (cfg.curate.curated_n == 0) {
    throw ConfigError("curate.curated_n must be positive");
  }
  for (std::size_t s : cfg.curate.scratch_sizes) {
    if (s == 0) throw ConfigError("curate.scratch_sizes entries must be positive");
  }

  shiftgen::GeneratorSpec gen = cfg.generator;
  gen.seed = mix_seed(cfg.seed, kCurateData, 0);
  const shiftgen::DatasetPair pair = shiftgen::generate_pair(gen, cfg.shift);
  const LabeledDataset train = shiftgen::reference_train(pair, gen);
  const LabeledDataset eval_ref = shiftgen::reference_eval(pair, gen);
  const LabeledDataset& eval_balanced = pair.shifted;

  const shiftgen::AuxiliarySpec aux = auxiliary_spec(
      gen, cfg.shift, cfg.curate.pretrain, mix_seed(cfg.seed, kCurateAux, 0));
  const Vector w_pre = fit_weights(Vector(gen.ambient_dim, 0.0),
                                   shiftgen::generate_auxiliary(aux), cfg.gd);

  const LabeledDataset curated = shiftgen::build_counterfactual_dataset(
      train, cfg.curate.curated_n, cfg.curate.group,
      mix_seed(cfg.seed, kCurateMain, 0), cfg.curate.class_dim);

  struct Arm {
    std::string name;
    const LabeledDataset* data;
    Vector init;
  };
  std::vector<LabeledDataset> scratch_sets;
  scratch_sets.reserve(cfg.curate.scratch_sizes.size());
  for (std::size_t i = 0; i < cfg.curate.scratch_sizes.size(); ++i) {
    scratch_sets.push_back(shiftgen::build_counterfactual_dataset(
        train, cfg.curate.scratch_sizes[i], cfg.curate.group,
        mix_seed(cfg.seed, kCurateSizes, 1 + i), cfg.curate.class_dim));
  }
  const Vector zero(gen.ambient_dim, 0.0);
  std::vector<Arm> arms;
  arms.push_back({"scratch_full", &train, zero});
  arms.push_back({"pretrained_full", &train, w_pre});
  arms.push_back({"pretrained_curated", &curated, w_pre});
  for (std::size_t i = 0; i < scratch_sets.size(); ++i) {
    arms.push_back({"scratch_curated_" +
                        std::to_string(cfg.curate.scratch_sizes[i]),
                    &scratch_sets[i], zero});
  }

  struct ArmResult {
    double acc_ref = 0.0;
    double acc_shift = 0.0;
    robustness::WorstGroup worst;
    double group_acc[2] = {0.0, 0.0};
  };
  const auto one_arm = [&](std::size_t a) -> ArmResult {
    const Vector w = fit_weights(arms[a].init, *arms[a].data, cfg.gd);
    ArmResult result;
    result.acc_ref = logreg::accuracy(w, eval_ref);
    result.acc_shift = logreg::accuracy(w, eval_balanced);
    const std::vector<std::uint8_t> correct =
        logreg::per_example_correct(w, eval_balanced);
    result.worst = robustness::worst_group_accuracy(correct,
                                                    *eval_balanced.group);
    result.group_acc[0] = group_accuracy(correct, *eval_balanced.group, 0);
    result.group_acc[1] = group_accuracy(correct, *eval_balanced.group, 1);
    return result;
  };
  const std::vector<ArmResult> results =
      parallel_map<ArmResult>(arms.size(), workers, one_arm);

  io::CsvBuilder arms_csv;
  arms_csv.cell("arm").cell("train_size").cell("acc_ref").cell("acc_shift")
      .cell("worst_group_acc").cell("worst_group").cell("group0_acc")
      .cell("group1_acc").end_row();
  io::CsvBuilder extra_csv;
  extra_csv.cell("arm").cell("group0_acc").cell("group1_acc").end_row();
  Json arm_rows = Json::array();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const ArmResult& r = results[a];
    arms_csv.cell(arms[a].name).cell(arms[a].data->size()).cell(r.acc_ref)
        .cell(r.acc_shift).cell(r.worst.accuracy)
        .cell(static_cast<long long>(r.worst.group)).cell(r.group_acc[0])
        .cell(r.group_acc[1]).end_row();
    extra_csv.cell(arms[a].name).cell(r.group_acc[0]).cell(r.group_acc[1])
        .end_row();
    Json row = Json::object();
    row["arm"] = arms[a].name;
    row["train_size"] = arms[a].data->size();
    row["acc_ref"] = r.acc_ref;
    row["acc_shift"] = r.acc_shift;
    row["worst_group_acc"] = r.worst.accuracy;
    row["worst_group"] = r.worst.group;
    row["group0_acc"] = r.group_acc[0];
    row["group1_acc"] = r.group_acc[1];
    arm_rows.push_back(row);
  }
  out.files.emplace_back("arms.csv", arms_csv.str());
  out.files.emplace_back("extrapolation.csv", extra_csv.str());
  out.report["arms"] = arm_rows;

  // Audit of the curated set: labels balanced, no residual label correlation
  // on any untouched coordinate.
  double label_mean = 0.0;
  for (int label : curated.labels) label_mean += label;
  label_mean /= static_cast<double>(curated.size());
  double max_off_corr = 0.0;
  Json corr_rows = Json::array();
  for (std::size_t j = 0; j < curated.dim(); ++j) {
    const double corr = label_correlation(curated, j);
    Json row = Json::object();
    row["coordinate"] = j;
    row["label_correlation"] = corr;
    corr_rows.push_back(row);
    if (j != cfg.curate.class_dim) {
      max_off_corr = std::max(max_off_corr, std::abs(corr));
    }
  }
  Json audit = Json::object();
  audit["n"] = curated.size();
  audit["label_mean"] = label_mean;
  audit["max_off_class_correlation"] = max_off_corr;
  audit["correlations"] = corr_rows;
  out.report["curated"] = audit;

  // Smallest curated-from-scratch size whose worst-group accuracy reaches the
  // pre-trained curated arm; null when no tested size does.
  const double target = results[2].worst.accuracy;
  out.report["pretrained_curated_worst_group"] = target;
  Json matching = nullptr;
  for (std::size_t i = 0; i < scratch_sets.size(); ++i) {
    if (results[3 + i].worst.accuracy >= target) {
      matching = cfg.curate.scratch_sizes[i];
      break;
    }
  }
  out.report["matching_scratch_size"] = matching;

  out.summary = std::string("curate: pretrained_curated worst_group=") +
                io::format_g17(target) + " matching_scratch_size=" +
                (matching.is_null()
                     ? std::string("none")
                     : std::to_string(matching.get<std::size_t>()));
  return out;
}

}  // namespace experiments
}  // namespace shiftlab
