#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "shiftlab/matrix.hpp"

// Binary-labeled datasets with optional group and domain tags. Labels are
// +1/-1 throughout the lab; groups and domains are small non-negative ints.

namespace shiftlab {

struct LabeledDataset {
  Matrix features;                            // n x d
  std::vector<int> labels;                    // n entries, each +1 or -1
  std::optional<std::vector<int>> group;      // length n when present
  std::optional<std::vector<int>> domain;     // length n when present

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

// Throws InvalidInputError when shapes disagree, a label is not +1/-1, or a
// feature is non-finite. Generators and parsers call this before returning.
void validate(const LabeledDataset& data);

// Rows of `indices` copied in order, tags carried along.
LabeledDataset subset(const LabeledDataset& data,
                      const std::vector<std::size_t>& indices);

// Concatenates rows; both sides must agree on dimension and on which tags
// are present.
LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b);

}  // namespace shiftlab
