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

#include <functional>
#include <iosfwd>
#include <vector>

#include "data/markov.hpp"
#include "model/elbo.hpp"

namespace nld::model {

using data::SequenceDataset;

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  ElboBreakdown mean;     // over the batches that were applied
  std::size_t batches = 0;
  std::size_t skipped_batches = 0;
  double kl_weight = 0.0;  // at the epoch's last step
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// epoch,elbo,recon,kl_path,kl_z0,skipped_batches
  void write_csv(std::ostream& out) const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Linear KL annealing: (step + 1) / (warmup_epochs * steps_per_epoch),
/// capped at 1; 1 throughout when warmup_epochs is 0.
double kl_anneal_weight(std::size_t step, std::size_t steps_per_epoch, std::size_t warmup_epochs);

/// Learning rate of a 1-based epoch under the config's geometric decay.
double epoch_learning_rate(const TrainConfig& config, std::size_t epoch);

/// Minibatch Adam on the negative ELBO. Each epoch shuffles the sequences
/// (batches only group equal lengths), clips the global gradient norm at
/// `clip_norm`, and skips batches whose loss or gradient is not finite.
/// Throws TooManySkips when an epoch skips more than `max_skip_fraction` of
/// its batches. Deterministic in `config.seed`.
TrainHistory train(NldModel& model, const SequenceDataset& dataset, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

}  // namespace nld::model
