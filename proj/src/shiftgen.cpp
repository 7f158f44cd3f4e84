#include "shiftlab/shiftgen.hpp"

#include <algorithm>
#include <cmath>

#include "shiftlab/errors.hpp"
#include "shiftlab/logreg.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/subspace.hpp"

namespace shiftlab {
namespace shiftgen {

namespace {

// Disjoint sub-streams so the reference-side policy draws never perturb the
// shifted-side ones; pairs stay aligned no matter which side is read first.
constexpr std::uint64_t kBaseStream = 0xA1;
constexpr std::uint64_t kReferencePolicyStream = 0xA2;
constexpr std::uint64_t kShiftedPolicyStream = 0xA3;

bool uses_tint(ShiftKind kind) {
  return kind == ShiftKind::spurious || kind == ShiftKind::combined;
}

bool uses_transform_dims(ShiftKind kind) {
  return kind == ShiftKind::unseen_transform || kind == ShiftKind::combined;
}

}  // namespace

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::spurious: return "spurious";
    case ShiftKind::label_shift: return "label_shift";
    case ShiftKind::unseen_transform: return "unseen_transform";
    case ShiftKind::flip: return "flip";
    case ShiftKind::combined: return "combined";
    case ShiftKind::group_imbalance: return "group_imbalance";
  }
  throw InvalidInputError("to_string: unknown shift kind");
}

ShiftKind shift_kind_from_string(const std::string& name) {
  if (name == "spurious") return ShiftKind::spurious;
  if (name == "label_shift") return ShiftKind::label_shift;
  if (name == "unseen_transform") return ShiftKind::unseen_transform;
  if (name == "flip") return ShiftKind::flip;
  if (name == "combined") return ShiftKind::combined;
  if (name == "group_imbalance") return ShiftKind::group_imbalance;
  throw InvalidInputError("unknown shift kind: " + name);
}

void validate(const GeneratorSpec& gen, const ShiftSpec& shift) {
  if (gen.ambient_dim == 0 || gen.subspace_dim == 0) {
    throw InvalidInputError("generator: dimensions must be positive");
  }
  if (gen.subspace_dim >= gen.ambient_dim) {
    throw InvalidInputError(
        "generator: subspace_dim must be strictly below ambient_dim");
  }
  if (gen.classes != 2) {
    throw InvalidInputError("generator: only binary labels are supported");
  }
  if (!(gen.noise_sigma > 0.0) || !std::isfinite(gen.core_signal)) {
    throw InvalidInputError("generator: bad signal/noise values");
  }
  if (!(gen.label_noise >= 0.0 && gen.label_noise <= 0.5)) {
    throw InvalidInputError("generator: label_noise must lie in [0, 0.5]");
  }
  if (gen.n_train == 0 || gen.n_test == 0) {
    throw InvalidInputError("generator: sample counts must be positive");
  }

  if (uses_tint(shift.kind)) {
    if (!(shift.p_spurious >= 0.0 && shift.p_spurious <= 1.0)) {
      throw InvalidInputError("shift: p_spurious must lie in [0, 1]");
    }
    if (shift.spurious_dim == 0 || shift.spurious_dim >= gen.subspace_dim) {
      throw InvalidInputError(
          "shift: spurious_dim must be an in-span coordinate other than the "
          "class coordinate");
    }
  }
  if (shift.kind == ShiftKind::label_shift) {
    if (!(shift.p_minority > 0.0 && shift.p_minority < 1.0)) {
      throw InvalidInputError("shift: p_minority must lie in (0, 1)");
    }
  }
  if (uses_transform_dims(shift.kind)) {
    if (shift.transform_dims.empty()) {
      throw InvalidInputError("shift: transform_dims required for this kind");
    }
    std::vector<std::size_t> sorted = shift.transform_dims;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidInputError("shift: transform_dims must be distinct");
    }
    for (std::size_t dim : sorted) {
      if (dim < gen.subspace_dim || dim >= gen.ambient_dim) {
        throw InvalidInputError(
            "shift: transform_dims must lie outside the reference span");
      }
    }
    if (!(shift.mix_weight > 0.0 && shift.mix_weight <= 1.0)) {
      throw InvalidInputError("shift: mix_weight must lie in (0, 1]");
    }
    if (!(shift.transform_offset >= 0.0)) {
      throw InvalidInputError("shift: transform_offset must be non-negative");
    }
  }
  if (shift.kind == ShiftKind::flip) {
    // Reversal must map the reference span onto untouched coordinates.
    if (gen.ambient_dim < 2 * gen.subspace_dim) {
      throw InvalidInputError("shift: flip requires ambient_dim >= 2 * subspace_dim");
    }
  }
  if (shift.kind == ShiftKind::group_imbalance) {
    if (gen.subspace_dim < 3) {
      throw InvalidInputError("shift: group_imbalance needs subspace_dim >= 3");
    }
    const auto [rate0, rate1] = shift.group_rates;
    if (!(rate0 > 0.0 && rate0 < 1.0 && rate1 > 0.0 && rate1 < 1.0)) {
      throw InvalidInputError("shift: group rates must lie in (0, 1)");
    }
    if (!(shift.group_shared_fraction >= 0.0 &&
          shift.group_shared_fraction <= 1.0)) {
      throw InvalidInputError("shift: group_shared_fraction must lie in [0, 1]");
    }
  }
}

namespace {

struct BaseRow {
  Vector x;
  int label = 1;  // observed label, after noise
};

int apply_label_noise(int label, double p, Rng& rng) {
  return (p > 0.0 && rng.bernoulli(p)) ? -label : label;
}

// Core sample for the non-group kinds: class signal on coordinate 0,
// Gaussian noise on the other in-span coordinates, exact zeros outside.
// The tint slot, when one exists, is left at zero for a policy to fill.
BaseRow draw_base_row(const GeneratorSpec& gen, int label,
                      std::optional<std::size_t> tint_slot, Rng& rng) {
  BaseRow row;
  row.x.assign(gen.ambient_dim, 0.0);
  row.x[0] = label * gen.core_signal + rng.normal(0.0, gen.noise_sigma);
  const std::size_t skip = tint_slot.value_or(gen.ambient_dim);
  for (std::size_t j = 1; j < gen.subspace_dim; ++j) {
    if (j == skip) continue;
    row.x[j] = rng.normal(0.0, gen.noise_sigma);
  }
  row.label = apply_label_noise(label, gen.label_noise, rng);
  return row;
}

void apply_reference_tint(Vector& x, int label, const ShiftSpec& shift,
                          Rng& rng) {
  x[shift.spurious_dim] = rng.bernoulli(shift.p_spurious)
                              ? static_cast<double>(label)
                              : rng.uniform(-1.0, 1.0);
}

void apply_random_tint(Vector& x, const ShiftSpec& shift, Rng& rng) {
  x[shift.spurious_dim] = rng.uniform(-1.0, 1.0);
}

// Shifted-side content on the unused coordinates: one random offset per
// example (the "color") plus the class-consistent component the auxiliary
// distribution carries, both scaled by the mix weight.
void apply_transform(Vector& x, int label, const GeneratorSpec& gen,
                     const ShiftSpec& shift, Rng& rng) {
  const double offset = rng.uniform(-shift.transform_offset,
                                    shift.transform_offset);
  const double content = label * gen.core_signal + offset;
  for (std::size_t dim : shift.transform_dims) {
    x[dim] = (1.0 - shift.mix_weight) * x[dim] + shift.mix_weight * content;
  }
}

LabeledDataset rows_to_dataset(std::vector<BaseRow> rows, int domain_tag,
                               std::size_t dim) {
  LabeledDataset out;
  out.features = Matrix(rows.size(), dim);
  out.labels.reserve(rows.size());
  out.domain.emplace(rows.size(), domain_tag);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].x.begin(), rows[i].x.end(), out.features.row(i).data());
    out.labels.push_back(rows[i].label);
  }
  return out;
}

DatasetPair make_transform_pair(const GeneratorSpec& gen,
                                const ShiftSpec& shift) {
  Rng rng_base(mix_seed(gen.seed, kBaseStream, 0));
  Rng rng_ref(mix_seed(gen.seed, kReferencePolicyStream, 0));
  Rng rng_shift(mix_seed(gen.seed, kShiftedPolicyStream, 0));

  const std::optional<std::size_t> tint_slot =
      uses_tint(shift.kind) ? std::optional<std::size_t>(shift.spurious_dim)
                            : std::nullopt;

  const std::size_t total = gen.n_train + gen.n_test;
  std::vector<BaseRow> reference_rows;
  reference_rows.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const int clean = rng_base.bernoulli(0.5) ? 1 : -1;
    reference_rows.push_back(draw_base_row(gen, clean, tint_slot, rng_base));
  }

  // The shifted evaluation set transforms the same base draws that sit in
  // the reference evaluation rows.
  std::vector<BaseRow> shifted_rows(reference_rows.begin() + gen.n_train,
                                    reference_rows.end());

  if (tint_slot) {
    for (BaseRow& row : reference_rows) {
      apply_reference_tint(row.x, row.label, shift, rng_ref);
    }
    for (BaseRow& row : shifted_rows) {
      apply_random_tint(row.x, shift, rng_shift);
    }
  }
  if (uses_transform_dims(shift.kind)) {
    for (BaseRow& row : shifted_rows) {
      apply_transform(row.x, row.label, gen, shift, rng_shift);
    }
  }
  if (shift.kind == ShiftKind::flip) {
    for (BaseRow& row : shifted_rows) {
      std::reverse(row.x.begin(), row.x.end());
    }
  }

  DatasetPair pair;
  pair.reference = rows_to_dataset(std::move(reference_rows), 0, gen.ambient_dim);
  pair.shifted = rows_to_dataset(std::move(shifted_rows), 1, gen.ambient_dim);
  return pair;
}

DatasetPair make_label_shift_pair(const GeneratorSpec& gen,
                                  const ShiftSpec& shift) {
  Rng rng_base(mix_seed(gen.seed, kBaseStream, 0));
  Rng rng_shift(mix_seed(gen.seed, kShiftedPolicyStream, 0));

  // Class -1 is the minority in the reference set; the shifted set reverses
  // the priors and keeps the class-conditional recipe untouched.
  std::vector<BaseRow> reference_rows;
  reference_rows.reserve(gen.n_train + gen.n_test);
  for (std::size_t i = 0; i < gen.n_train + gen.n_test; ++i) {
    const int clean = rng_base.bernoulli(shift.p_minority) ? -1 : 1;
    reference_rows.push_back(draw_base_row(gen, clean, std::nullopt, rng_base));
  }
  std::vector<BaseRow> shifted_rows;
  shifted_rows.reserve(gen.n_test);
  for (std::size_t i = 0; i < gen.n_test; ++i) {
    const int clean = rng_shift.bernoulli(1.0 - shift.p_minority) ? -1 : 1;
    shifted_rows.push_back(draw_base_row(gen, clean, std::nullopt, rng_shift));
  }

  DatasetPair pair;
  pair.reference = rows_to_dataset(std::move(reference_rows), 0, gen.ambient_dim);
  pair.shifted = rows_to_dataset(std::move(shifted_rows), 1, gen.ambient_dim);
  return pair;
}

// Group layout: coordinate 0 carries the class signal shared by both groups
// (attenuated to group_shared_fraction for group 1), coordinate 1 is the
// group-1 indicator (group_signal for group 1, exactly zero for group 0),
// coordinate 2 carries the rest of group 1's class signal and is also exactly
// zero for group 0, so group-0-only data spans a strict subspace that misses
// both group-1 coordinates.
BaseRow draw_group_row(const GeneratorSpec& gen, const ShiftSpec& shift,
                       int group, int clean, Rng& rng) {
  BaseRow row;
  row.x.assign(gen.ambient_dim, 0.0);
  const double shared =
      group == 1 ? shift.group_shared_fraction : 1.0;
  row.x[0] = clean * gen.core_signal * shared + rng.normal(0.0, gen.noise_sigma);
  if (group == 1) {
    row.x[1] = shift.group_signal + rng.normal(0.0, gen.noise_sigma);
    row.x[2] = clean * gen.core_signal * (1.0 - shift.group_shared_fraction) +
               rng.normal(0.0, gen.noise_sigma);
  }
  for (std::size_t j = 3; j < gen.subspace_dim; ++j) {
    row.x[j] = rng.normal(0.0, gen.noise_sigma);
  }
  row.label = apply_label_noise(clean, gen.label_noise, rng);
  return row;
}

DatasetPair make_group_pair(const GeneratorSpec& gen, const ShiftSpec& shift) {
  Rng rng_base(mix_seed(gen.seed, kBaseStream, 0));
  Rng rng_shift(mix_seed(gen.seed, kShiftedPolicyStream, 0));

  std::vector<BaseRow> reference_rows;
  std::vector<int> reference_groups;
  reference_rows.reserve(gen.n_train + gen.n_test);
  for (std::size_t i = 0; i < gen.n_train + gen.n_test; ++i) {
    const int group = rng_base.bernoulli(0.5) ? 1 : 0;
    const double p_positive =
        group == 0 ? shift.group_rates.first : shift.group_rates.second;
    const int clean = rng_base.bernoulli(p_positive) ? 1 : -1;
    reference_rows.push_back(draw_group_row(gen, shift, group, clean, rng_base));
    reference_groups.push_back(group);
  }

  // Shifted side: every (group, class) cell equally likely, conditionals
  // identical, so the shift stays inside the reference span.
  std::vector<BaseRow> shifted_rows;
  std::vector<int> shifted_groups;
  shifted_rows.reserve(gen.n_test);
  for (std::size_t i = 0; i < gen.n_test; ++i) {
    const int group = rng_shift.bernoulli(0.5) ? 1 : 0;
    const int clean = rng_shift.bernoulli(0.5) ? 1 : -1;
    shifted_rows.push_back(draw_group_row(gen, shift, group, clean, rng_shift));
    shifted_groups.push_back(group);
  }

  DatasetPair pair;
  pair.reference = rows_to_dataset(std::move(reference_rows), 0, gen.ambient_dim);
  pair.reference.group = std::move(reference_groups);
  pair.shifted = rows_to_dataset(std::move(shifted_rows), 1, gen.ambient_dim);
  pair.shifted.group = std::move(shifted_groups);
  return pair;
}

}  // namespace

DatasetPair generate_pair(const GeneratorSpec& gen, const ShiftSpec& shift) {
  validate(gen, shift);
  DatasetPair pair;
  switch (shift.kind) {
    case ShiftKind::label_shift:
      pair = make_label_shift_pair(gen, shift);
      break;
    case ShiftKind::group_imbalance:
      pair = make_group_pair(gen, shift);
      break;
    default:
      pair = make_transform_pair(gen, shift);
      break;
  }
  shiftlab::validate(pair.reference);
  shiftlab::validate(pair.shifted);
  return pair;
}

LabeledDataset reference_train(const DatasetPair& pair,
                               const GeneratorSpec& gen) {
  std::vector<std::size_t> indices(gen.n_train);
  for (std::size_t i = 0; i < gen.n_train; ++i) indices[i] = i;
  return subset(pair.reference, indices);
}

LabeledDataset reference_eval(const DatasetPair& pair,
                              const GeneratorSpec& gen) {
  std::vector<std::size_t> indices(pair.reference.size() - gen.n_train);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    indices[i] = gen.n_train + i;
  }
  return subset(pair.reference, indices);
}

SupportReport support_check(const LabeledDataset& reference,
                            const LabeledDataset& shifted, double tol) {
  if (reference.dim() != shifted.dim()) {
    throw InvalidInputError("support_check: dimension mismatch");
  }
  const Subspace span = logreg::data_subspace(reference);
  SupportReport report;
  report.tol = tol;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    const auto row = shifted.features.row(i);
    const Vector x(row.begin(), row.end());
    const double complement_norm = norm(project_complement(x, span));
    if (complement_norm > report.max_complement_norm) {
      report.max_complement_norm = complement_norm;
      report.worst_index = i;
    }
  }
  report.in_support = report.max_complement_norm <= tol;
  return report;
}

LabeledDataset generate_auxiliary(const AuxiliarySpec& aux) {
  if (aux.ambient_dim == 0 || aux.n == 0) {
    throw InvalidInputError("auxiliary: dimensions and size must be positive");
  }
  for (std::size_t dim : aux.signal_dims) {
    if (dim >= aux.ambient_dim) {
      throw InvalidInputError("auxiliary: signal dim out of range");
    }
  }
  if (!(aux.label_noise >= 0.0 && aux.label_noise <= 0.5)) {
    throw InvalidInputError("auxiliary: label_noise must lie in [0, 0.5]");
  }

  Rng rng(mix_seed(aux.seed, 0xA6, 0));
  LabeledDataset out;
  out.features = Matrix(aux.n, aux.ambient_dim);
  out.labels.reserve(aux.n);
  for (std::size_t i = 0; i < aux.n; ++i) {
    const int clean = rng.bernoulli(0.5) ? 1 : -1;
    auto row = out.features.row(i);
    for (std::size_t j = 0; j < aux.ambient_dim; ++j) {
      row[j] = rng.normal(0.0, aux.noise_sigma);
    }
    for (std::size_t dim : aux.signal_dims) {
      row[dim] += clean * aux.signal;
    }
    out.labels.push_back(apply_label_noise(clean, aux.label_noise, rng));
  }
  return out;
}

std::vector<std::size_t> auxiliary_signal_dims(const GeneratorSpec& gen,
                                               const ShiftSpec& shift) {
  switch (shift.kind) {
    case ShiftKind::unseen_transform:
    case ShiftKind::combined:
      return shift.transform_dims;
    case ShiftKind::flip:
      // Mirror of the class coordinate: where the signal lands after reversal.
      return {gen.ambient_dim - 1};
    case ShiftKind::group_imbalance:
      return {2};
    case ShiftKind::spurious:
    case ShiftKind::label_shift:
      if (gen.subspace_dim < gen.ambient_dim) return {gen.subspace_dim};
      return {};
  }
  throw InvalidInputError("auxiliary_signal_dims: unknown shift kind");
}

LabeledDataset build_counterfactual_dataset(const LabeledDataset& source,
                                            std::size_t n,
                                            std::optional<int> restrict_group,
                                            std::uint64_t seed,
                                            std::size_t class_dim) {
  shiftlab::validate(source);
  if (n % 2 != 0) {
    throw InvalidInputError("counterfactual: n must be even (pairs)");
  }
  if (class_dim >= source.dim()) {
    throw InvalidInputError("counterfactual: class_dim out of range");
  }
  if (restrict_group && !source.group) {
    throw InvalidInputError("counterfactual: source carries no group tags");
  }

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (restrict_group && (*source.group)[i] != *restrict_group) continue;
    eligible.push_back(i);
  }
  if (eligible.size() < n / 2) {
    throw InvalidInputError("counterfactual: not enough source examples");
  }

  Rng rng(mix_seed(seed, 0xC4, 0));
  rng.shuffle(eligible);
  eligible.resize(n / 2);

  LabeledDataset out;
  out.features = Matrix(n, source.dim());
  out.labels.reserve(n);
  if (source.group) out.group.emplace();
  if (source.domain) out.domain.emplace();

  std::size_t row = 0;
  for (std::size_t src : eligible) {
    for (int copy = 0; copy < 2; ++copy) {
      std::copy_n(source.features.row(src).data(), source.dim(),
                  out.features.row(row).data());
      int label = source.labels[src];
      if (copy == 1) {
        // The counterfactual twin: class coordinate flipped to the other
        // class's value, label flipped, everything else byte-identical.
        out.features.at(row, class_dim) = -out.features.at(row, class_dim);
        label = -label;
      }
      out.labels.push_back(label);
      if (source.group) out.group->push_back((*source.group)[src]);
      if (source.domain) out.domain->push_back((*source.domain)[src]);
      ++row;
    }
  }
  return out;
}

}  // namespace shiftgen
}  // namespace shiftlab
