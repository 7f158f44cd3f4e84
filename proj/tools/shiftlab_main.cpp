#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shiftlab/config.hpp"
#include "shiftlab/errors.hpp"
#include "shiftlab/experiments.hpp"
#include "shiftlab/io.hpp"

// Exit codes: 0 success, 2 model assumption violated (no finite minimizer),
// 3 degenerate statistics, 1 anything else (bad config, bad input, I/O).

namespace {

using shiftlab::config::ResolvedConfig;
using shiftlab::experiments::CommandOutcome;

using Runner = CommandOutcome (*)(const ResolvedConfig&, std::size_t);

struct CommandSpec {
  const char* name;
  const char* description;
  Runner runner;
};

constexpr CommandSpec kCommands[] = {
    {"theorem-check",
     "verify trained weights = span minimizer + untouched init component",
     shiftlab::experiments::run_theorem_check},
    {"gen", "write a reference/shifted dataset pair with a support check",
     shiftlab::experiments::run_gen},
    {"sweep", "from-scratch accuracy-on-the-line sweep and probit fit",
     shiftlab::experiments::run_sweep},
    {"er", "effective robustness of pre-trained models over trials",
     shiftlab::experiments::run_er},
    {"split", "density-ratio split of the shifted set with calibration",
     shiftlab::experiments::run_split},
    {"combine", "scratch/pre-trained/debiased arm comparison",
     shiftlab::experiments::run_combine},
    {"curate", "counterfactual curation under group imbalance",
     shiftlab::experiments::run_curate},
};

int run_command(const CommandSpec& spec, const std::string& config_path,
                bool seed_set, std::uint64_t seed, const std::string& out_dir,
                std::size_t workers) {
  ResolvedConfig cfg = config_path.empty()
                           ? shiftlab::config::default_config()
                           : shiftlab::config::load_config_file(config_path);
  if (seed_set) cfg.seed = seed;

  const CommandOutcome outcome = spec.runner(cfg, workers);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base(out_dir);
  shiftlab::io::write_text_file((base / "report.json").string(),
                                shiftlab::io::render_json(outcome.report));
  for (const auto& [name, content] : outcome.files) {
    shiftlab::io::write_text_file((base / name).string(), content);
  }
  std::cout << outcome.summary << "\n";
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shiftlab: distribution-shift robustness experiments on exact "
               "logistic-regression dynamics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  std::vector<CLI::App*> subs;
  for (const CommandSpec& spec : kCommands) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.description);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads (results identical)");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) {
        return run_command(kCommands[i], config_path,
                           subs[i]->count("--seed") > 0, seed, out_dir,
                           workers);
      }
    }
    std::cerr << "no command selected\n";
    return 1;
  } catch (const shiftlab::NoMinimumError& err) {
    std::cerr << "error (no minimum): " << err.what() << "\n";
    return 2;
  } catch (const shiftlab::DegenerateStatsError& err) {
    std::cerr << "error (degenerate statistics): " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
