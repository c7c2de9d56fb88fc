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

#include "model/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "common/error.hpp"
#include "nn/adam.hpp"

namespace nld::model {

namespace {

constexpr std::uint64_t kShuffleStream = 0x53485546;
constexpr std::uint64_t kNoiseStream = 0x4e4f4953;

std::vector<std::vector<std::size_t>> make_batches(const SequenceDataset& dataset, std::size_t batch_size,
                                                   RngStream& rng) {
  std::vector<std::size_t> order(dataset.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.next_u64() % i]);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.sequences[a].length() < dataset.sequences[b].length();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size();) {
    const std::size_t length = dataset.sequences[order[i]].length();
    std::vector<std::size_t> batch;
    while (i < order.size() && batch.size() < batch_size && dataset.sequences[order[i]].length() == length) {
      batch.push_back(order[i++]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

bool finite(const std::vector<Tensor>& grads) {
  return std::all_of(grads.begin(), grads.end(), [](const Tensor& g) { return g.all_finite(); });
}

}  // namespace

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,elbo,recon,kl_path,kl_z0,skipped_batches\n";
  const auto old_precision = out.precision(17);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.mean.elbo << ',' << e.mean.recon_loglik << ',' << e.mean.kl_path << ','
        << e.mean.kl_z0 << ',' << e.skipped_batches << '\n';
  }
  out.precision(old_precision);
}

double kl_anneal_weight(std::size_t step, std::size_t steps_per_epoch, std::size_t warmup_epochs) {
  if (warmup_epochs == 0 || steps_per_epoch == 0) return 1.0;
  const double ramp = static_cast<double>(warmup_epochs * steps_per_epoch);
  return std::min(1.0, static_cast<double>(step + 1) / ramp);
}

double epoch_learning_rate(const TrainConfig& config, std::size_t epoch) {
  if (config.lr_final < 0.0 || config.epochs < 2 || config.lr <= 0.0) return config.lr;
  const double progress = static_cast<double>(epoch - 1) / static_cast<double>(config.epochs - 1);
  return config.lr * std::pow(config.lr_final / config.lr, progress);
}

TrainHistory train(NldModel& model, const SequenceDataset& dataset, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.sequences.empty()) throw Error(ErrorCode::InvalidArgument, "training dataset is empty");
  for (const auto& seq : dataset.sequences) {
    if (seq.length() == 0) throw Error(ErrorCode::InvalidArgument, "training sequences must be nonempty");
  }

  RngStream shuffle_rng(config.seed, kShuffleStream);
  RngStream noise_rng(config.seed, kNoiseStream);
  nn::AdamState adam = nn::make_adam_state(model.params(), nn::AdamConfig{.lr = config.lr});
  const std::vector<bool> frozen = model.frozen_mask();

  TrainHistory history;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(dataset, config.batch_size, shuffle_rng);
    adam.config.lr = epoch_learning_rate(config, epoch);
    EpochRecord record;
    record.epoch = epoch;
    record.batches = batches.size();
    double weight_sum = 0.0;
    for (const auto& indices : batches) {
      const double kl_weight = kl_anneal_weight(step++, batches.size(), config.warmup_epochs);
      record.kl_weight = kl_weight;
      std::vector<const Observations*> batch;
      for (std::size_t i : indices) batch.push_back(&dataset.sequences[i].observations);

      const ElboNoise noise = sample_elbo_noise(batch.size(), batch.front()->size(), model.state_dim(),
                                                model.latent_dim(), config.dt, noise_rng);
      ad::Tape tape;
      TapedModel taped(model, tape);
      TapedElbo result;
      std::vector<Tensor> grads;
      try {
        result = taped_elbo(taped, batch, config.dt, noise, kl_weight);
        if (std::isfinite(result.loss.scalar())) grads = ad::backward(tape, result.loss, taped.bound().vars());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFinite) throw;
      }
      if (grads.empty() || !finite(grads)) {
        ++record.skipped_batches;
        continue;
      }

      double norm_sq = 0.0;
      for (std::size_t i = 0; i < grads.size(); ++i) {
        if (frozen[i]) grads[i].fill(0.0);
      }
      for (const auto& g : grads) {
        for (double v : g.values()) norm_sq += v * v;
      }
      const double norm = std::sqrt(norm_sq);
      if (norm > config.clip_norm) {
        const double factor = config.clip_norm / norm;
        for (auto& g : grads) {
          for (double& v : g.values()) v *= factor;
        }
      }
      nn::adam_step(adam, model.params(), grads, frozen);

      const double w = static_cast<double>(batch.size());
      weight_sum += w;
      record.mean.elbo += w * result.breakdown.elbo;
      record.mean.recon_loglik += w * result.breakdown.recon_loglik;
      record.mean.kl_path += w * result.breakdown.kl_path;
      record.mean.kl_z0 += w * result.breakdown.kl_z0;
    }
    if (weight_sum > 0.0) {
      record.mean.elbo /= weight_sum;
      record.mean.recon_loglik /= weight_sum;
      record.mean.kl_path /= weight_sum;
      record.mean.kl_z0 /= weight_sum;
    }
    history.epochs.push_back(record);
    if (static_cast<double>(record.skipped_batches) >
        config.max_skip_fraction * static_cast<double>(record.batches)) {
      throw Error(ErrorCode::TooManySkips, "epoch " + std::to_string(epoch) + " skipped " +
                                               std::to_string(record.skipped_batches) + " of " +
                                               std::to_string(record.batches) + " batches");
    }
    if (on_epoch) on_epoch(record);
  }
  return history;
}

}  // namespace nld::model
