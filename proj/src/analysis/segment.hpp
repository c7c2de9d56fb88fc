/*
 * Copyright 2026 The NLD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <span>
#include <vector>

#include "analysis/landscape.hpp"

namespace nld::analysis {

/// Label -1 marks a time step whose flow reached no known minimum.
struct SegmentationResult {
  std::vector<int> labels;
  std::size_t unassigned = 0;
};

/// Encodes the sequence online, integrates the posterior from the initial
/// posterior mean with zero Wiener noise, and flows every position z_k to a
/// well.
SegmentationResult segment_sequence(const model::NldModel& model, const model::Observations& observations,
                                    const std::vector<Minimum>& minima, double dt = 0.05,
                                    double merge_tol = 1e-2, const FlowOptions& flow = {});

struct PermutationMatch {
  double accuracy = 0.0;
  /// permutation[p] is the true label assigned to predicted label p.
  std::vector<int> permutation;
};

/// Exhaustive search over the n_states! relabelings of `predicted` for the
/// largest overlap with `truth`; ties go to the lexicographically smallest
/// permutation. Negative predicted labels never match. Throws LengthMismatch
/// on unequal lengths and InvalidArgument on empty input or labels out of
/// range.
PermutationMatch best_permutation_accuracy(std::span<const int> predicted, std::span<const int> truth,
                                           std::size_t n_states);

}  // namespace nld::analysis
