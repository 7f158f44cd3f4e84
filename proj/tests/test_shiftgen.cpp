#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "shiftlab/dataset.hpp"
#include "shiftlab/errors.hpp"
#include "shiftlab/io.hpp"
#include "shiftlab/logreg.hpp"
#include "shiftlab/shiftgen.hpp"
#include "shiftlab/subspace.hpp"

using namespace shiftlab;
using namespace shiftlab::shiftgen;

namespace {

GeneratorSpec small_gen() {
  GeneratorSpec gen;
  gen.ambient_dim = 12;
  gen.subspace_dim = 5;
  gen.n_train = 300;
  gen.n_test = 400;
  gen.noise_sigma = 0.5;
  gen.label_noise = 0.1;
  gen.seed = 77;
  return gen;
}

ShiftSpec unseen_shift() {
  ShiftSpec shift;
  shift.kind = ShiftKind::unseen_transform;
  shift.transform_dims = {6, 8};
  shift.mix_weight = 0.5;
  return shift;
}

double column_label_mean(const LabeledDataset& data, std::size_t col) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc += data.features.at(i, col) * data.labels[i];
  }
  return acc / data.size();
}

}  // namespace

TEST_CASE("kind names round-trip") {
  for (const ShiftKind kind :
       {ShiftKind::spurious, ShiftKind::label_shift, ShiftKind::unseen_transform,
        ShiftKind::flip, ShiftKind::combined, ShiftKind::group_imbalance}) {
    CHECK(shift_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(shift_kind_from_string("mystery"), InvalidInputError);
}

TEST_CASE("validation rejects malformed specs") {
  const GeneratorSpec gen = small_gen();
  ShiftSpec shift;

  GeneratorSpec flat = gen;
  flat.subspace_dim = flat.ambient_dim;
  CHECK_THROWS_AS(validate(flat, shift), InvalidInputError);

  GeneratorSpec silent = gen;
  silent.noise_sigma = 0.0;
  CHECK_THROWS_AS(validate(silent, shift), InvalidInputError);

  GeneratorSpec noisy = gen;
  noisy.label_noise = 0.7;
  CHECK_THROWS_AS(validate(noisy, shift), InvalidInputError);

  GeneratorSpec empty = gen;
  empty.n_train = 0;
  CHECK_THROWS_AS(validate(empty, shift), InvalidInputError);

  ShiftSpec bad_p = shift;
  bad_p.p_spurious = 1.5;
  CHECK_THROWS_AS(validate(gen, bad_p), InvalidInputError);

  ShiftSpec class_tint = shift;
  class_tint.spurious_dim = 0;
  CHECK_THROWS_AS(validate(gen, class_tint), InvalidInputError);

  ShiftSpec out_tint = shift;
  out_tint.spurious_dim = gen.subspace_dim;
  CHECK_THROWS_AS(validate(gen, out_tint), InvalidInputError);

  ShiftSpec in_span_transform = unseen_shift();
  in_span_transform.transform_dims = {2};
  CHECK_THROWS_AS(validate(gen, in_span_transform), InvalidInputError);

  ShiftSpec no_dims = unseen_shift();
  no_dims.transform_dims = {};
  CHECK_THROWS_AS(validate(gen, no_dims), InvalidInputError);

  ShiftSpec dup_dims = unseen_shift();
  dup_dims.transform_dims = {6, 6};
  CHECK_THROWS_AS(validate(gen, dup_dims), InvalidInputError);

  ShiftSpec heavy_mix = unseen_shift();
  heavy_mix.mix_weight = 1.5;
  CHECK_THROWS_AS(validate(gen, heavy_mix), InvalidInputError);

  ShiftSpec flip;
  flip.kind = ShiftKind::flip;
  GeneratorSpec narrow = gen;
  narrow.ambient_dim = 9;  // < 2 * subspace_dim
  CHECK_THROWS_AS(validate(narrow, flip), InvalidInputError);

  ShiftSpec group;
  group.kind = ShiftKind::group_imbalance;
  GeneratorSpec thin = gen;
  thin.subspace_dim = 2;
  CHECK_THROWS_AS(validate(thin, group), InvalidInputError);

  ShiftSpec bad_rates = group;
  bad_rates.group_rates = {0.0, 0.5};
  CHECK_THROWS_AS(validate(gen, bad_rates), InvalidInputError);

  ShiftSpec bad_shared = group;
  bad_shared.group_shared_fraction = 1.2;
  CHECK_THROWS_AS(validate(gen, bad_shared), InvalidInputError);

  ShiftSpec bad_minority;
  bad_minority.kind = ShiftKind::label_shift;
  bad_minority.p_minority = 0.0;
  CHECK_THROWS_AS(validate(gen, bad_minority), InvalidInputError);
}

TEST_CASE("generation is deterministic in the seed") {
  const GeneratorSpec gen = small_gen();
  for (const ShiftKind kind :
       {ShiftKind::spurious, ShiftKind::label_shift, ShiftKind::flip,
        ShiftKind::group_imbalance}) {
    ShiftSpec shift = kind == ShiftKind::flip ? ShiftSpec{} : ShiftSpec{};
    shift.kind = kind;
    GeneratorSpec wide = gen;
    if (kind == ShiftKind::flip) wide.ambient_dim = 2 * wide.subspace_dim;

    const DatasetPair a = generate_pair(wide, shift);
    const DatasetPair b = generate_pair(wide, shift);
    CHECK(a.reference.features.entries == b.reference.features.entries);
    CHECK(a.reference.labels == b.reference.labels);
    CHECK(a.shifted.features.entries == b.shifted.features.entries);
    CHECK(a.shifted.labels == b.shifted.labels);

    GeneratorSpec reseeded = wide;
    reseeded.seed = wide.seed + 1;
    const DatasetPair c = generate_pair(reseeded, shift);
    CHECK(a.reference.features.entries != c.reference.features.entries);
  }
}

TEST_CASE("reference rows live exactly inside the declared span") {
  const GeneratorSpec gen = small_gen();
  for (const ShiftKind kind :
       {ShiftKind::spurious, ShiftKind::label_shift, ShiftKind::unseen_transform,
        ShiftKind::group_imbalance}) {
    ShiftSpec shift = unseen_shift();
    shift.kind = kind;
    const DatasetPair pair = generate_pair(gen, shift);
    for (std::size_t i = 0; i < pair.reference.size(); ++i) {
      for (std::size_t j = gen.subspace_dim; j < gen.ambient_dim; ++j) {
        CHECK(pair.reference.features.at(i, j) == 0.0);
      }
    }
  }
}

TEST_CASE("train/eval split covers the reference set in order") {
  const GeneratorSpec gen = small_gen();
  const DatasetPair pair = generate_pair(gen, ShiftSpec{});
  const LabeledDataset train = reference_train(pair, gen);
  const LabeledDataset eval = reference_eval(pair, gen);
  CHECK(train.size() == gen.n_train);
  CHECK(eval.size() == gen.n_test);
  CHECK(train.features.at(0, 0) == pair.reference.features.at(0, 0));
  CHECK(eval.features.at(0, 0) == pair.reference.features.at(gen.n_train, 0));
  CHECK(pair.shifted.size() == gen.n_test);
}

TEST_CASE("domain tags distinguish the two sides") {
  const DatasetPair pair = generate_pair(small_gen(), ShiftSpec{});
  REQUIRE(pair.reference.domain.has_value());
  REQUIRE(pair.shifted.domain.has_value());
  CHECK((*pair.reference.domain)[0] == 0);
  CHECK((*pair.shifted.domain)[0] == 1);
}

TEST_CASE("in-support kinds stay inside the reference span") {
  const GeneratorSpec gen = small_gen();
  for (const ShiftKind kind :
       {ShiftKind::spurious, ShiftKind::label_shift, ShiftKind::group_imbalance}) {
    ShiftSpec shift;
    shift.kind = kind;
    const DatasetPair pair = generate_pair(gen, shift);
    const SupportReport report = support_check(pair.reference, pair.shifted);
    CHECK(report.in_support);
    CHECK(report.max_complement_norm <= 1e-10);
  }
}

TEST_CASE("out-of-support kinds leave the reference span") {
  const GeneratorSpec gen = small_gen();
  for (const ShiftKind kind : {ShiftKind::unseen_transform, ShiftKind::combined}) {
    ShiftSpec shift = unseen_shift();
    shift.kind = kind;
    const DatasetPair pair = generate_pair(gen, shift);
    const SupportReport report = support_check(pair.reference, pair.shifted);
    CHECK_FALSE(report.in_support);
    CHECK(report.max_complement_norm > 0.1);
  }

  GeneratorSpec wide = gen;
  wide.ambient_dim = 2 * wide.subspace_dim;
  ShiftSpec flip;
  flip.kind = ShiftKind::flip;
  const DatasetPair pair = generate_pair(wide, flip);
  const SupportReport report = support_check(pair.reference, pair.shifted);
  CHECK_FALSE(report.in_support);
}

TEST_CASE("transform kinds reuse the reference evaluation draws") {
  const GeneratorSpec gen = small_gen();
  const ShiftSpec shift = unseen_shift();
  const DatasetPair pair = generate_pair(gen, shift);
  const LabeledDataset eval = reference_eval(pair, gen);

  REQUIRE(pair.shifted.size() == eval.size());
  for (std::size_t i = 0; i < pair.shifted.size(); ++i) {
    CHECK(pair.shifted.labels[i] == eval.labels[i]);
    for (std::size_t j = 0; j < gen.ambient_dim; ++j) {
      const bool transformed =
          std::find(shift.transform_dims.begin(), shift.transform_dims.end(),
                    j) != shift.transform_dims.end();
      if (!transformed) {
        CHECK(pair.shifted.features.at(i, j) == eval.features.at(i, j));
      }
    }
  }
  // The transform actually moved the targeted coordinates.
  double moved = 0.0;
  for (std::size_t i = 0; i < pair.shifted.size(); ++i) {
    moved += std::fabs(pair.shifted.features.at(i, 6));
  }
  CHECK(moved > 0.0);
}

TEST_CASE("flip reverses each evaluation row exactly") {
  GeneratorSpec gen = small_gen();
  gen.ambient_dim = 2 * gen.subspace_dim;
  ShiftSpec shift;
  shift.kind = ShiftKind::flip;
  const DatasetPair pair = generate_pair(gen, shift);
  const LabeledDataset eval = reference_eval(pair, gen);
  for (std::size_t i = 0; i < pair.shifted.size(); ++i) {
    CHECK(pair.shifted.labels[i] == eval.labels[i]);
    for (std::size_t j = 0; j < gen.ambient_dim; ++j) {
      CHECK(pair.shifted.features.at(i, gen.ambient_dim - 1 - j) ==
            eval.features.at(i, j));
    }
  }
}

TEST_CASE("label shift changes priors but not conditionals") {
  GeneratorSpec gen = small_gen();
  gen.n_train = 2000;
  gen.n_test = 8000;
  gen.label_noise = 0.0;
  ShiftSpec shift;
  shift.kind = ShiftKind::label_shift;
  shift.p_minority = 0.2;
  const DatasetPair pair = generate_pair(gen, shift);

  double ref_minority = 0.0;
  for (const int y : pair.reference.labels) ref_minority += (y == -1);
  ref_minority /= pair.reference.size();
  double shift_minority = 0.0;
  for (const int y : pair.shifted.labels) shift_minority += (y == -1);
  shift_minority /= pair.shifted.size();
  CHECK(ref_minority == doctest::Approx(0.2).epsilon(0.15));
  CHECK(shift_minority == doctest::Approx(0.8).epsilon(0.08));

  // Class-conditional means agree within 4 sigma / sqrt(n) per coordinate.
  for (const int cls : {1, -1}) {
    std::vector<double> ref_mean(gen.subspace_dim, 0.0);
    std::vector<double> shift_mean(gen.subspace_dim, 0.0);
    std::size_t n_ref = 0;
    std::size_t n_shift = 0;
    for (std::size_t i = 0; i < pair.reference.size(); ++i) {
      if (pair.reference.labels[i] != cls) continue;
      ++n_ref;
      for (std::size_t j = 0; j < gen.subspace_dim; ++j) {
        ref_mean[j] += pair.reference.features.at(i, j);
      }
    }
    for (std::size_t i = 0; i < pair.shifted.size(); ++i) {
      if (pair.shifted.labels[i] != cls) continue;
      ++n_shift;
      for (std::size_t j = 0; j < gen.subspace_dim; ++j) {
        shift_mean[j] += pair.shifted.features.at(i, j);
      }
    }
    REQUIRE(n_ref > 100);
    REQUIRE(n_shift > 100);
    const double bound =
        4.0 * gen.noise_sigma * std::sqrt(1.0 / n_ref + 1.0 / n_shift);
    for (std::size_t j = 0; j < gen.subspace_dim; ++j) {
      CHECK(std::fabs(ref_mean[j] / n_ref - shift_mean[j] / n_shift) <= bound);
    }
  }
}

TEST_CASE("reference tint follows the label at the configured rate") {
  GeneratorSpec gen = small_gen();
  gen.n_train = 10000;
  gen.n_test = 2000;
  ShiftSpec shift;
  shift.kind = ShiftKind::spurious;
  shift.p_spurious = 0.8;
  shift.spurious_dim = 1;
  const DatasetPair pair = generate_pair(gen, shift);

  // E[tint * label] = p_spurious: the tint copies the label with probability
  // p and is a centered uniform otherwise.
  const double ref_corr = column_label_mean(pair.reference, 1);
  CHECK(ref_corr == doctest::Approx(0.8).epsilon(0.05));

  const double shifted_corr = column_label_mean(pair.shifted, 1);
  CHECK(std::fabs(shifted_corr) <= 4.0 / std::sqrt(2000.0));

  // Tint values live in [-1, 1] on both sides.
  for (std::size_t i = 0; i < pair.shifted.size(); ++i) {
    CHECK(std::fabs(pair.shifted.features.at(i, 1)) <= 1.0);
  }
}

TEST_CASE("spurious strength grid generates without error") {
  GeneratorSpec gen = small_gen();
  gen.n_train = 50;
  gen.n_test = 50;
  for (const double p : {0.2, 0.35, 0.5, 0.65, 0.8, 0.9}) {
    ShiftSpec shift;
    shift.kind = ShiftKind::spurious;
    shift.p_spurious = p;
    CHECK_NOTHROW(generate_pair(gen, shift));
  }
  for (const double p : {0.05, 0.1, 0.2, 0.3}) {
    ShiftSpec shift;
    shift.kind = ShiftKind::label_shift;
    shift.p_minority = p;
    CHECK_NOTHROW(generate_pair(gen, shift));
  }
}

TEST_CASE("group kind tags both sides and balances the shifted cells") {
  GeneratorSpec gen = small_gen();
  gen.n_train = 4000;
  gen.n_test = 8000;
  gen.label_noise = 0.0;
  ShiftSpec shift;
  shift.kind = ShiftKind::group_imbalance;
  shift.group_rates = {0.24, 0.02};
  const DatasetPair pair = generate_pair(gen, shift);

  REQUIRE(pair.reference.group.has_value());
  REQUIRE(pair.shifted.group.has_value());

  // Reference: groups near 50/50, per-group positive rates near the spec.
  std::size_t n0 = 0;
  std::size_t pos0 = 0;
  std::size_t pos1 = 0;
  for (std::size_t i = 0; i < pair.reference.size(); ++i) {
    if ((*pair.reference.group)[i] == 0) {
      ++n0;
      pos0 += pair.reference.labels[i] == 1;
    } else {
      pos1 += pair.reference.labels[i] == 1;
    }
  }
  const std::size_t n1 = pair.reference.size() - n0;
  CHECK(static_cast<double>(n0) / pair.reference.size() ==
        doctest::Approx(0.5).epsilon(0.05));
  CHECK(static_cast<double>(pos0) / n0 == doctest::Approx(0.24).epsilon(0.15));
  CHECK(static_cast<double>(pos1) / n1 == doctest::Approx(0.02).epsilon(0.4));

  // Shifted: all four (group, label) cells near a quarter each.
  std::size_t cells[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < pair.shifted.size(); ++i) {
    const int g = (*pair.shifted.group)[i];
    const int y = pair.shifted.labels[i] == 1 ? 1 : 0;
    ++cells[g][y];
  }
  for (int g = 0; g < 2; ++g) {
    for (int y = 0; y < 2; ++y) {
      CHECK(static_cast<double>(cells[g][y]) / pair.shifted.size() ==
            doctest::Approx(0.25).epsilon(0.1));
    }
  }
}

TEST_CASE("group-0 rows put exact zeros on both group-1 coordinates") {
  const GeneratorSpec gen = small_gen();
  ShiftSpec shift;
  shift.kind = ShiftKind::group_imbalance;
  const DatasetPair pair = generate_pair(gen, shift);
  std::size_t group1_rows = 0;
  for (std::size_t i = 0; i < pair.reference.size(); ++i) {
    if ((*pair.reference.group)[i] == 0) {
      CHECK(pair.reference.features.at(i, 1) == 0.0);
      CHECK(pair.reference.features.at(i, 2) == 0.0);
    } else {
      ++group1_rows;
    }
  }
  CHECK(group1_rows > 0);
}

TEST_CASE("auxiliary data carries signal on the requested dims and spans everything") {
  AuxiliarySpec aux;
  aux.ambient_dim = 10;
  aux.signal_dims = {7, 9};
  aux.signal = 1.5;
  aux.noise_sigma = 0.5;
  aux.label_noise = 0.0;
  aux.n = 4000;
  aux.seed = 5;
  const LabeledDataset data = generate_auxiliary(aux);

  CHECK(data.size() == 4000);
  const Subspace span = logreg::data_subspace(data);
  CHECK(span.rank() == 10);

  for (const std::size_t dim : {std::size_t{7}, std::size_t{9}}) {
    CHECK(column_label_mean(data, dim) == doctest::Approx(1.5).epsilon(0.05));
  }
  CHECK(std::fabs(column_label_mean(data, 0)) <= 4.0 * 0.5 / std::sqrt(4000.0));

  const LabeledDataset again = generate_auxiliary(aux);
  CHECK(data.features.entries == again.features.entries);

  AuxiliarySpec bad = aux;
  bad.signal_dims = {10};
  CHECK_THROWS_AS(generate_auxiliary(bad), InvalidInputError);
  AuxiliarySpec noisy = aux;
  noisy.label_noise = 0.6;
  CHECK_THROWS_AS(generate_auxiliary(noisy), InvalidInputError);
  AuxiliarySpec empty = aux;
  empty.n = 0;
  CHECK_THROWS_AS(generate_auxiliary(empty), InvalidInputError);
}

TEST_CASE("auxiliary wiring targets the coordinates each shift moves") {
  const GeneratorSpec gen = small_gen();

  ShiftSpec unseen = unseen_shift();
  CHECK(auxiliary_signal_dims(gen, unseen) == std::vector<std::size_t>{6, 8});

  ShiftSpec flip;
  flip.kind = ShiftKind::flip;
  GeneratorSpec wide = gen;
  wide.ambient_dim = 10;
  CHECK(auxiliary_signal_dims(wide, flip) == std::vector<std::size_t>{9});

  ShiftSpec group;
  group.kind = ShiftKind::group_imbalance;
  CHECK(auxiliary_signal_dims(gen, group) == std::vector<std::size_t>{2});

  ShiftSpec spurious;
  spurious.kind = ShiftKind::spurious;
  CHECK(auxiliary_signal_dims(gen, spurious) ==
        std::vector<std::size_t>{gen.subspace_dim});

  GeneratorSpec full = gen;
  full.subspace_dim = full.ambient_dim - 1;
  ShiftSpec label_only;
  label_only.kind = ShiftKind::label_shift;
  CHECK(auxiliary_signal_dims(full, label_only) ==
        std::vector<std::size_t>{full.subspace_dim});
}

TEST_CASE("counterfactual pairs balance labels and cancel every other coordinate") {
  GeneratorSpec gen = small_gen();
  gen.n_train = 600;
  ShiftSpec shift;
  shift.kind = ShiftKind::group_imbalance;
  const DatasetPair pair = generate_pair(gen, shift);
  const LabeledDataset train = reference_train(pair, gen);

  const LabeledDataset curated =
      build_counterfactual_dataset(train, 64, 0, 123, 0);
  REQUIRE(curated.size() == 64);

  // Exactly 32 of each label.
  std::size_t positives = 0;
  for (const int y : curated.labels) positives += (y == 1);
  CHECK(positives == 32);

  // Off-class coordinates cancel exactly within each pair, so the empirical
  // label covariance is exactly zero; the class coordinate is flipped
  // bitwise.
  for (std::size_t j = 1; j < curated.dim(); ++j) {
    double cov = 0.0;
    for (std::size_t i = 0; i < curated.size(); ++i) {
      cov += curated.features.at(i, j) * curated.labels[i];
    }
    CHECK(cov == 0.0);
  }
  for (std::size_t i = 0; i < curated.size(); i += 2) {
    CHECK(curated.features.at(i, 0) == -curated.features.at(i + 1, 0));
    CHECK(curated.labels[i] == -curated.labels[i + 1]);
    for (std::size_t j = 1; j < curated.dim(); ++j) {
      CHECK(curated.features.at(i, j) == curated.features.at(i + 1, j));
    }
  }

  // The group restriction keeps only group-0 sources.
  REQUIRE(curated.group.has_value());
  for (const int g : *curated.group) CHECK(g == 0);

  CHECK_THROWS_AS(build_counterfactual_dataset(train, 63, 0, 1, 0),
                  InvalidInputError);
  CHECK_THROWS_AS(build_counterfactual_dataset(train, 600 * 4, 0, 1, 0),
                  InvalidInputError);
  CHECK_THROWS_AS(build_counterfactual_dataset(train, 64, 0, 1, 99),
                  InvalidInputError);

  LabeledDataset untagged = train;
  untagged.group.reset();
  CHECK_THROWS_AS(build_counterfactual_dataset(untagged, 64, 0, 1, 0),
                  InvalidInputError);
  CHECK_NOTHROW(build_counterfactual_dataset(untagged, 64, std::nullopt, 1, 0));
}

TEST_CASE("dataset csv round-trips bit-exactly") {
  GeneratorSpec gen = small_gen();
  gen.n_train = 40;
  gen.n_test = 30;
  ShiftSpec shift;
  shift.kind = ShiftKind::group_imbalance;
  const DatasetPair pair = generate_pair(gen, shift);

  const std::string csv = io::dataset_to_csv(pair.reference);
  const LabeledDataset parsed = io::dataset_from_csv(csv);
  CHECK(parsed.features.entries == pair.reference.features.entries);
  CHECK(parsed.labels == pair.reference.labels);
  REQUIRE(parsed.group.has_value());
  CHECK(*parsed.group == *pair.reference.group);
  REQUIRE(parsed.domain.has_value());
  CHECK(*parsed.domain == *pair.reference.domain);

  // Header names the coordinates then the tag columns.
  CHECK(csv.rfind("f0,", 0) == 0);
  CHECK(csv.find("label,group,domain") != std::string::npos);
}

TEST_CASE("support check flags the worst offender") {
  const GeneratorSpec gen = small_gen();
  const ShiftSpec shift = unseen_shift();
  const DatasetPair pair = generate_pair(gen, shift);
  const SupportReport report = support_check(pair.reference, pair.shifted);
  CHECK(report.worst_index < pair.shifted.size());
  CHECK(report.tol == 1e-10);

  // The named worst row really attains the reported complement norm.
  const Subspace span = logreg::data_subspace(pair.reference);
  Vector worst(pair.shifted.features.row(report.worst_index).begin(),
               pair.shifted.features.row(report.worst_index).end());
  CHECK(norm(project_complement(worst, span)) ==
        doctest::Approx(report.max_complement_norm).epsilon(1e-9));
}
