#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shiftlab/io.hpp"
#include "shiftlab/logreg.hpp"
#include "shiftlab/robustness.hpp"
#include "shiftlab/shiftgen.hpp"

// JSON run configuration. Parsing is strict: unknown keys anywhere are a
// ConfigError, so typos cannot silently fall back to defaults. Fields that
// accept "auto" (gd.step_size, er.clamp) resolve to std::nullopt and the
// consumer picks the data-dependent value.
//
// The CLI derives every dataset and algorithm seed from the single top-level
// seed via mix_seed(seed, arm, trial); generator.seed only matters when the
// library is driven directly.

namespace shiftlab {
namespace config {

struct TheoremConfig {
  std::size_t inits = 10;
  double init_norm = 1.0;        // 0 reproduces the zero-init special case
  double tolerance = 1e-4;       // decomposition residual gate
  double orth_tolerance = 1e-10; // per-step orthogonal drift gate
};

struct PretrainConfig {
  std::size_t n = 4000;
  double signal = 1.0;
  double noise_sigma = 0.5;
  double label_noise = 0.1;
  // Empty means wired automatically from the shift kind.
  std::vector<std::size_t> signal_dims;
};

struct ErConfig {
  std::size_t trials = 20;
  std::optional<double> clamp;   // empty = 1 / (2 n_test)
  std::size_t bootstrap_trials = 1000;
  double level = 0.95;
  PretrainConfig pretrain;
};

struct SplitConfig {
  std::size_t folds = 10;
  double threshold = 0.2;
  std::vector<double> threshold_sweep;
  std::size_t calibration_bins = 20;
  double level = 0.95;
  logreg::GDConfig gd;           // domain-classifier training budget
};

struct CombineConfig {
  std::size_t trials = 64;
  std::string intervention = "balance";  // or "none" (a control arm)
  double corrected_threshold = 0.5;
  double init_scale = 0.05;      // per-trial scratch-init magnitude
  PretrainConfig pretrain;
};

struct CurateConfig {
  std::size_t curated_n = 64;
  std::vector<std::size_t> scratch_sizes{64, 128, 256, 512};
  int group = 0;                 // counterfactual pairs drawn from this group
  std::size_t class_dim = 0;
  PretrainConfig pretrain;
};

struct ResolvedConfig {
  shiftgen::GeneratorSpec generator;
  shiftgen::ShiftSpec shift;
  logreg::GDConfig gd;
  TheoremConfig theorem;
  robustness::SweepConfig sweep;
  ErConfig er;
  SplitConfig split;
  CombineConfig combine;
  CurateConfig curate;
  std::uint64_t seed = 1;
};

ResolvedConfig default_config();

// Strict parse on top of defaults; throws ConfigError on unknown keys, type
// mismatches, or out-of-range values that can be caught shape-only here.
ResolvedConfig parse_config(const io::Json& root);
ResolvedConfig load_config_file(const std::string& path);

// Deterministic echo of every resolved value, embedded in each report.
io::Json echo_config(const ResolvedConfig& cfg);

}  // namespace config
}  // namespace shiftlab
