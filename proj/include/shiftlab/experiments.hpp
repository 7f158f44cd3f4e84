#pragma once

#include <string>
#include <utility>
#include <vector>

#include "shiftlab/config.hpp"
#include "shiftlab/io.hpp"

// The experiment drivers behind the CLI commands. Each returns a JSON report
// plus named CSV payloads; the caller decides where they land on disk.
// Reports embed the resolved config and seed but nothing machine-local, so
// the same config and seed produce byte-identical output at any worker count.

namespace shiftlab {
namespace experiments {

struct CommandOutcome {
  int exit_code = 0;
  io::Json report;
  // (file name, content), in the order they should be written.
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;  // one status line for stdout
};

// Trains from a batch of random inits and checks that every endpoint equals
// the span-restricted minimizer plus the init's untouched orthogonal part,
// tracking per-step drift of the orthogonal component. Separable data yields
// a structured no-minimum report and exit code 2; a violated tolerance exits 1.
CommandOutcome run_theorem_check(const config::ResolvedConfig& cfg,
                                 std::size_t workers);

// Writes the reference/shifted pair as CSV plus a support-check report.
CommandOutcome run_gen(const config::ResolvedConfig& cfg, std::size_t workers);

// From-scratch accuracy-on-the-line sweep with its probit fit.
CommandOutcome run_sweep(const config::ResolvedConfig& cfg, std::size_t workers);

// Per-trial: fresh dataset pair, baseline sweep, probit fit, auxiliary
// pre-training, fine-tune, effective robustness of the pre-trained model.
// Aggregates the mean ER with a percentile-bootstrap interval over trials.
CommandOutcome run_er(const config::ResolvedConfig& cfg, std::size_t workers);

// Cross-fitted density-ratio split of the shifted set with calibration
// diagnostics and an optional threshold sweep.
CommandOutcome run_split(const config::ResolvedConfig& cfg, std::size_t workers);

// Four arms (scratch, pre-trained, debiased, pre-trained+debiased) over
// repeated trials on one dataset pair; reports per-arm accuracy and ER plus
// the corrected-example overlap analysis.
CommandOutcome run_combine(const config::ResolvedConfig& cfg,
                           std::size_t workers);

// Group-imbalance study: full biased data vs a small counterfactual-curated
// subset, from scratch and from the pre-trained init, scored by worst-group
// accuracy on the balanced shifted set.
CommandOutcome run_curate(const config::ResolvedConfig& cfg,
                          std::size_t workers);

}  // namespace experiments
}  // namespace shiftlab
