#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shiftlab/dataset.hpp"

// Synthetic reference/shifted dataset pairs. Reference samples live entirely
// in the span of the first subspace_dim coordinates (exact zeros elsewhere),
// so the data subspace is known by construction and shifts can be placed
// inside or outside it on purpose.
//
// Coordinate conventions, fixed across kinds:
//   0                  class signal: x0 = y * core_signal + noise
//   spurious_dim (< k) tint coordinate for the spurious/combined kinds
//   1 .. k-1           in-span noise coordinates otherwise
//   k .. d-1           exact zeros in reference data; out-of-support shifts
//                      and the auxiliary distribution put content here
// The group_imbalance kind replaces this layout with its own (documented at
// the generator).

namespace shiftlab {
namespace shiftgen {

struct GeneratorSpec {
  std::size_t ambient_dim = 16;   // d
  std::size_t subspace_dim = 6;   // k, reference span
  std::size_t classes = 2;        // binary only; field kept for symmetry
  double core_signal = 1.0;       // class-coordinate mean is y * core_signal
  double noise_sigma = 0.5;       // in-span Gaussian noise
  double label_noise = 0.1;       // flip probability applied after sampling
  std::size_t n_train = 400;
  std::size_t n_test = 2000;
  std::uint64_t seed = 1;
};

enum class ShiftKind {
  spurious,          // in-support: class-correlated tint made uniform
  label_shift,       // in-support: class priors change, conditionals fixed
  unseen_transform,  // out-of-support: content mixed onto unused coordinates
  flip,              // out-of-support: coordinate order reversed
  combined,          // spurious tint + out-of-support offsets at once
  group_imbalance,   // in-support: group-correlated labels, group tags set
};

std::string to_string(ShiftKind kind);
ShiftKind shift_kind_from_string(const std::string& name);

struct ShiftSpec {
  ShiftKind kind = ShiftKind::spurious;
  double p_spurious = 0.5;        // chance the reference tint matches the class
  std::size_t spurious_dim = 1;   // in-span tint coordinate
  double p_minority = 0.2;        // reference share of the -1 class
  std::vector<std::size_t> transform_dims;  // out-of-span targets (>= k)
  double transform_offset = 1.0;  // random offset magnitude on those dims
  double mix_weight = 0.25;       // shifted content weight on transform dims
  std::pair<double, double> group_rates{0.24, 0.02};  // P(y=+1 | group 0/1)
  double group_signal = 1.0;          // group coordinate magnitude
  double group_shared_fraction = 0.5; // group-1 signal shared with coord 0
};

// Shape and range checks for the (generator, shift) pairing; throws
// InvalidInputError. In particular: transform dims must lie in [k, d) for
// out-of-support kinds and the flip kind needs d >= 2k so reversed content
// cannot land back inside the reference span.
void validate(const GeneratorSpec& gen, const ShiftSpec& shift);

struct DatasetPair {
  // n_train + n_test rows; rows [0, n_train) are the training portion and
  // rows [n_train, end) the evaluation portion. domain tag 0.
  LabeledDataset reference;
  // n_test rows, domain tag 1. For the transform kinds these reuse the base
  // draws behind the reference evaluation rows, mirroring how image shifts
  // transform the very same test images.
  LabeledDataset shifted;
};

DatasetPair generate_pair(const GeneratorSpec& gen, const ShiftSpec& shift);

LabeledDataset reference_train(const DatasetPair& pair, const GeneratorSpec& gen);
LabeledDataset reference_eval(const DatasetPair& pair, const GeneratorSpec& gen);

struct SupportReport {
  double max_complement_norm = 0.0;  // over shifted inputs, vs reference span
  std::size_t worst_index = 0;
  double tol = 0.0;
  bool in_support = true;
};

// Projects every shifted input against the span of the reference inputs.
SupportReport support_check(const LabeledDataset& reference,
                            const LabeledDataset& shifted,
                            double tol = 1e-10);

// Pre-training analogue: labels carried on signal_dims, Gaussian filler on
// every other coordinate, so the data spans the full ambient space and
// weights trained on it hold a readout the reference task never updates.
struct AuxiliarySpec {
  std::size_t ambient_dim = 16;
  std::vector<std::size_t> signal_dims;
  double signal = 1.0;
  double noise_sigma = 0.5;
  double label_noise = 0.1;
  std::size_t n = 2000;
  std::uint64_t seed = 2;
};

LabeledDataset generate_auxiliary(const AuxiliarySpec& aux);

// Default wiring of the auxiliary task to a shift: transform dims for the
// transform kinds, the mirror of the class coordinate for flip, the group-1
// signal coordinate for group_imbalance, the first out-of-span coordinate
// otherwise (in-support kinds do not read the orthogonal component at all).
std::vector<std::size_t> auxiliary_signal_dims(const GeneratorSpec& gen,
                                               const ShiftSpec& shift);

// n/2 source examples (optionally restricted to one group tag), each paired
// with a copy whose class coordinate value is flipped to the other class
// (negated) along with its label; every other coordinate is byte-identical
// between the two. Labels come out exactly balanced and the empirical
// label/coordinate correlation cancels for every untouched coordinate.
LabeledDataset build_counterfactual_dataset(const LabeledDataset& source,
                                            std::size_t n,
                                            std::optional<int> restrict_group,
                                            std::uint64_t seed,
                                            std::size_t class_dim = 0);

}  // namespace shiftgen
}  // namespace shiftlab
