#include "shiftlab/config.hpp"

#include <cmath>
#include <initializer_list>
#include <string>

#include "shiftlab/errors.hpp"

namespace shiftlab {
namespace config {
namespace {

using io::Json;

void check_keys(const Json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw ConfigError(section + ": expected a JSON object");
  }
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(section + ": unknown key \"" + item.key() + "\"");
    }
  }
}

template <typename T>
void read_field(const Json& obj, const std::string& section, const char* key,
                T& target) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(section + "." + key + ": wrong JSON type");
  }
}

// "auto" or a positive number.
void read_auto_field(const Json& obj, const std::string& section,
                     const char* key, std::optional<double>& target) {
  if (!obj.contains(key)) return;
  const Json& value = obj.at(key);
  if (value.is_string()) {
    if (value.get<std::string>() != "auto") {
      throw ConfigError(section + "." + key + ": expected \"auto\" or a number");
    }
    target = std::nullopt;
    return;
  }
  if (!value.is_number()) {
    throw ConfigError(section + "." + key + ": expected \"auto\" or a number");
  }
  target = value.get<double>();
}

void parse_gd(const Json& obj, const std::string& section,
              logreg::GDConfig& gd) {
  check_keys(obj, section,
             {"step_size", "max_steps", "grad_tol", "divergence_norm"});
  read_auto_field(obj, section, "step_size", gd.step_size);
  read_field(obj, section, "max_steps", gd.max_steps);
  read_field(obj, section, "grad_tol", gd.grad_tol);
  read_field(obj, section, "divergence_norm", gd.divergence_norm);
  if (gd.step_size && !(*gd.step_size > 0.0)) {
    throw ConfigError(section + ".step_size must be positive");
  }
  if (gd.max_steps == 0) {
    throw ConfigError(section + ".max_steps must be positive");
  }
  if (!(gd.grad_tol > 0.0) || !(gd.divergence_norm > 0.0)) {
    throw ConfigError(section + ": tolerances must be positive");
  }
}

void parse_generator(const Json& obj, shiftgen::GeneratorSpec& gen) {
  check_keys(obj, "generator",
             {"ambient_dim", "subspace_dim", "classes", "core_signal",
              "noise_sigma", "label_noise", "n_train", "n_test", "seed"});
  read_field(obj, "generator", "ambient_dim", gen.ambient_dim);
  read_field(obj, "generator", "subspace_dim", gen.subspace_dim);
  read_field(obj, "generator", "classes", gen.classes);
  read_field(obj, "generator", "core_signal", gen.core_signal);
  read_field(obj, "generator", "noise_sigma", gen.noise_sigma);
  read_field(obj, "generator", "label_noise", gen.label_noise);
  read_field(obj, "generator", "n_train", gen.n_train);
  read_field(obj, "generator", "n_test", gen.n_test);
  read_field(obj, "generator", "seed", gen.seed);
}

void parse_shift(const Json& obj, shiftgen::ShiftSpec& shift) {
  check_keys(obj, "shift",
             {"kind", "p_spurious", "spurious_dim", "p_minority",
              "transform_dims", "transform_offset", "mix_weight",
              "group_rates", "group_signal", "group_shared_fraction"});
  if (obj.contains("kind")) {
    std::string name;
    read_field(obj, "shift", "kind", name);
    try {
      shift.kind = shiftgen::shift_kind_from_string(name);
    } catch (const InvalidInputError& err) {
      throw ConfigError(std::string("shift.kind: ") + err.what());
    }
  }
  read_field(obj, "shift", "p_spurious", shift.p_spurious);
  read_field(obj, "shift", "spurious_dim", shift.spurious_dim);
  read_field(obj, "shift", "p_minority", shift.p_minority);
  read_field(obj, "shift", "transform_dims", shift.transform_dims);
  read_field(obj, "shift", "transform_offset", shift.transform_offset);
  read_field(obj, "shift", "mix_weight", shift.mix_weight);
  if (obj.contains("group_rates")) {
    std::vector<double> rates;
    read_field(obj, "shift", "group_rates", rates);
    if (rates.size() != 2) {
      throw ConfigError("shift.group_rates: expected exactly two rates");
    }
    shift.group_rates = {rates[0], rates[1]};
  }
  read_field(obj, "shift", "group_signal", shift.group_signal);
  read_field(obj, "shift", "group_shared_fraction", shift.group_shared_fraction);
}

void parse_theorem(const Json& obj, TheoremConfig& theorem) {
  check_keys(obj, "theorem",
             {"inits", "init_norm", "tolerance", "orth_tolerance"});
  read_field(obj, "theorem", "inits", theorem.inits);
  read_field(obj, "theorem", "init_norm", theorem.init_norm);
  read_field(obj, "theorem", "tolerance", theorem.tolerance);
  read_field(obj, "theorem", "orth_tolerance", theorem.orth_tolerance);
  if (theorem.inits == 0) {
    throw ConfigError("theorem.inits must be positive");
  }
  if (theorem.init_norm < 0.0 || !std::isfinite(theorem.init_norm)) {
    throw ConfigError("theorem.init_norm must be finite and non-negative");
  }
  if (!(theorem.tolerance > 0.0) || !(theorem.orth_tolerance > 0.0)) {
    throw ConfigError("theorem tolerances must be positive");
  }
}

void parse_sweep(const Json& obj, robustness::SweepConfig& sweep) {
  check_keys(obj, "sweep",
             {"fractions", "trials_per_fraction", "checkpoint_steps",
              "init_scale"});
  read_field(obj, "sweep", "fractions", sweep.fractions);
  read_field(obj, "sweep", "trials_per_fraction", sweep.trials_per_fraction);
  read_field(obj, "sweep", "checkpoint_steps", sweep.checkpoint_steps);
  read_field(obj, "sweep", "init_scale", sweep.init_scale);
  if (sweep.trials_per_fraction == 0) {
    throw ConfigError("sweep.trials_per_fraction must be positive");
  }
}

void parse_pretrain(const Json& obj, const std::string& section,
                    PretrainConfig& pre) {
  check_keys(obj, section,
             {"n", "signal", "noise_sigma", "label_noise", "signal_dims"});
  read_field(obj, section, "n", pre.n);
  read_field(obj, section, "signal", pre.signal);
  read_field(obj, section, "noise_sigma", pre.noise_sigma);
  read_field(obj, section, "label_noise", pre.label_noise);
  read_field(obj, section, "signal_dims", pre.signal_dims);
  if (pre.n == 0) throw ConfigError(section + ".n must be positive");
}

void parse_er(const Json& obj, ErConfig& er) {
  check_keys(obj, "er",
             {"trials", "clamp", "bootstrap_trials", "level", "pretrain"});
  read_field(obj, "er", "trials", er.trials);
  read_auto_field(obj, "er", "clamp", er.clamp);
  read_field(obj, "er", "bootstrap_trials", er.bootstrap_trials);
  read_field(obj, "er", "level", er.level);
  if (obj.contains("pretrain")) {
    parse_pretrain(obj.at("pretrain"), "er.pretrain", er.pretrain);
  }
  if (er.clamp && !(*er.clamp > 0.0 && *er.clamp < 0.5)) {
    throw ConfigError("er.clamp must lie in (0, 0.5)");
  }
  if (!(er.level > 0.0 && er.level < 1.0)) {
    throw ConfigError("er.level must lie in (0, 1)");
  }
}

void parse_split(const Json& obj, SplitConfig& split) {
  check_keys(obj, "split",
             {"folds", "threshold", "threshold_sweep", "calibration_bins",
              "level", "gd"});
  read_field(obj, "split", "folds", split.folds);
  read_field(obj, "split", "threshold", split.threshold);
  read_field(obj, "split", "threshold_sweep", split.threshold_sweep);
  read_field(obj, "split", "calibration_bins", split.calibration_bins);
  read_field(obj, "split", "level", split.level);
  if (obj.contains("gd")) parse_gd(obj.at("gd"), "split.gd", split.gd);
  if (split.folds < 2) throw ConfigError("split.folds must be at least 2");
  if (split.calibration_bins < 2) {
    throw ConfigError("split.calibration_bins must be at least 2");
  }
  if (!(split.threshold >= 0.0) || !std::isfinite(split.threshold)) {
    throw ConfigError("split.threshold must be finite and non-negative");
  }
  for (double t : split.threshold_sweep) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw ConfigError("split.threshold_sweep entries must be non-negative");
    }
  }
}

void parse_combine(const Json& obj, CombineConfig& combine) {
  check_keys(obj, "combine",
             {"trials", "intervention", "corrected_threshold", "init_scale",
              "pretrain"});
  read_field(obj, "combine", "trials", combine.trials);
  read_field(obj, "combine", "intervention", combine.intervention);
  read_field(obj, "combine", "corrected_threshold", combine.corrected_threshold);
  read_field(obj, "combine", "init_scale", combine.init_scale);
  if (obj.contains("pretrain")) {
    parse_pretrain(obj.at("pretrain"), "combine.pretrain", combine.pretrain);
  }
  if (combine.intervention != "balance" && combine.intervention != "none") {
    throw ConfigError("combine.intervention must be \"balance\" or \"none\"");
  }
  if (!(combine.corrected_threshold >= 0.0 &&
        combine.corrected_threshold <= 1.0)) {
    throw ConfigError("combine.corrected_threshold must lie in [0, 1]");
  }
  if (combine.init_scale < 0.0 || !std::isfinite(combine.init_scale)) {
    throw ConfigError("combine.init_scale must be finite and non-negative");
  }
}

void parse_curate(const Json& obj, CurateConfig& curate) {
  check_keys(obj, "curate",
             {"curated_n", "scratch_sizes", "group", "class_dim", "pretrain"});
  read_field(obj, "curate", "curated_n", curate.curated_n);
  read_field(obj, "curate", "scratch_sizes", curate.scratch_sizes);
  read_field(obj, "curate", "group", curate.group);
  read_field(obj, "curate", "class_dim", curate.class_dim);
  if (obj.contains("pretrain")) {
    parse_pretrain(obj.at("pretrain"), "curate.pretrain", curate.pretrain);
  }
}

Json gd_json(const logreg::GDConfig& gd) {
  Json out = Json::object();
  if (gd.step_size) {
    out["step_size"] = *gd.step_size;
  } else {
    out["step_size"] = "auto";
  }
  out["max_steps"] = gd.max_steps;
  out["grad_tol"] = gd.grad_tol;
  out["divergence_norm"] = gd.divergence_norm;
  return out;
}

Json pretrain_json(const PretrainConfig& pre) {
  Json out = Json::object();
  out["n"] = pre.n;
  out["signal"] = pre.signal;
  out["noise_sigma"] = pre.noise_sigma;
  out["label_noise"] = pre.label_noise;
  out["signal_dims"] = pre.signal_dims;
  return out;
}

}  // namespace

ResolvedConfig default_config() {
  ResolvedConfig cfg;
  cfg.sweep.fractions = {0.1, 0.2, 0.4, 0.7, 1.0};
  cfg.sweep.trials_per_fraction = 2;
  cfg.sweep.checkpoint_steps = {5, 15, 40, 100, 250};
  cfg.sweep.init_scale = 0.05;
  cfg.split.gd.max_steps = 5000;
  cfg.split.gd.grad_tol = 1e-7;
  return cfg;
}

ResolvedConfig parse_config(const io::Json& root) {
  ResolvedConfig cfg = default_config();
  check_keys(root, "config",
             {"generator", "shift", "gd", "theorem", "sweep", "er", "split",
              "combine", "curate", "seed"});
  if (root.contains("generator")) parse_generator(root.at("generator"), cfg.generator);
  if (root.contains("shift")) parse_shift(root.at("shift"), cfg.shift);
  if (root.contains("gd")) parse_gd(root.at("gd"), "gd", cfg.gd);
  if (root.contains("theorem")) parse_theorem(root.at("theorem"), cfg.theorem);
  if (root.contains("sweep")) parse_sweep(root.at("sweep"), cfg.sweep);
  if (root.contains("er")) parse_er(root.at("er"), cfg.er);
  if (root.contains("split")) parse_split(root.at("split"), cfg.split);
  if (root.contains("combine")) parse_combine(root.at("combine"), cfg.combine);
  if (root.contains("curate")) parse_curate(root.at("curate"), cfg.curate);
  read_field(root, "config", "seed", cfg.seed);

  // The sweep shares the global training budget; only its shape is its own.
  cfg.sweep.gd = cfg.gd;
  try {
    shiftgen::validate(cfg.generator, cfg.shift);
  } catch (const InvalidInputError& err) {
    throw ConfigError(std::string("generator/shift: ") + err.what());
  }
  return cfg;
}

ResolvedConfig load_config_file(const std::string& path) {
  const std::string text = io::read_text_file(path);
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::exception& err) {
    throw ConfigError(path + ": " + err.what());
  }
  return parse_config(root);
}

io::Json echo_config(const ResolvedConfig& cfg) {
  Json out = Json::object();

  Json gen = Json::object();
  gen["ambient_dim"] = cfg.generator.ambient_dim;
  gen["subspace_dim"] = cfg.generator.subspace_dim;
  gen["classes"] = cfg.generator.classes;
  gen["core_signal"] = cfg.generator.core_signal;
  gen["noise_sigma"] = cfg.generator.noise_sigma;
  gen["label_noise"] = cfg.generator.label_noise;
  gen["n_train"] = cfg.generator.n_train;
  gen["n_test"] = cfg.generator.n_test;
  gen["seed"] = cfg.generator.seed;
  out["generator"] = gen;

  Json shift = Json::object();
  shift["kind"] = shiftgen::to_string(cfg.shift.kind);
  shift["p_spurious"] = cfg.shift.p_spurious;
  shift["spurious_dim"] = cfg.shift.spurious_dim;
  shift["p_minority"] = cfg.shift.p_minority;
  shift["transform_dims"] = cfg.shift.transform_dims;
  shift["transform_offset"] = cfg.shift.transform_offset;
  shift["mix_weight"] = cfg.shift.mix_weight;
  shift["group_rates"] =
      std::vector<double>{cfg.shift.group_rates.first, cfg.shift.group_rates.second};
  shift["group_signal"] = cfg.shift.group_signal;
  shift["group_shared_fraction"] = cfg.shift.group_shared_fraction;
  out["shift"] = shift;

  out["gd"] = gd_json(cfg.gd);

  Json theorem = Json::object();
  theorem["inits"] = cfg.theorem.inits;
  theorem["init_norm"] = cfg.theorem.init_norm;
  theorem["tolerance"] = cfg.theorem.tolerance;
  theorem["orth_tolerance"] = cfg.theorem.orth_tolerance;
  out["theorem"] = theorem;

  Json sweep = Json::object();
  sweep["fractions"] = cfg.sweep.fractions;
  sweep["trials_per_fraction"] = cfg.sweep.trials_per_fraction;
  sweep["checkpoint_steps"] = cfg.sweep.checkpoint_steps;
  sweep["init_scale"] = cfg.sweep.init_scale;
  out["sweep"] = sweep;

  Json er = Json::object();
  er["trials"] = cfg.er.trials;
  if (cfg.er.clamp) {
    er["clamp"] = *cfg.er.clamp;
  } else {
    er["clamp"] = "auto";
  }
  er["bootstrap_trials"] = cfg.er.bootstrap_trials;
  er["level"] = cfg.er.level;
  er["pretrain"] = pretrain_json(cfg.er.pretrain);
  out["er"] = er;

  Json split = Json::object();
  split["folds"] = cfg.split.folds;
  split["threshold"] = cfg.split.threshold;
  split["threshold_sweep"] = cfg.split.threshold_sweep;
  split["calibration_bins"] = cfg.split.calibration_bins;
  split["level"] = cfg.split.level;
  split["gd"] = gd_json(cfg.split.gd);
  out["split"] = split;

  Json combine = Json::object();
  combine["trials"] = cfg.combine.trials;
  combine["intervention"] = cfg.combine.intervention;
  combine["corrected_threshold"] = cfg.combine.corrected_threshold;
  combine["init_scale"] = cfg.combine.init_scale;
  combine["pretrain"] = pretrain_json(cfg.combine.pretrain);
  out["combine"] = combine;

  Json curate = Json::object();
  curate["curated_n"] = cfg.curate.curated_n;
  curate["scratch_sizes"] = cfg.curate.scratch_sizes;
  curate["group"] = cfg.curate.group;
  curate["class_dim"] = cfg.curate.class_dim;
  curate["pretrain"] = pretrain_json(cfg.curate.pretrain);
  out["curate"] = curate;

  out["seed"] = cfg.seed;
  return out;
}

}  // namespace config
}  // namespace shiftlab
