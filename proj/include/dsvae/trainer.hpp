/*
 * Copyright 2026 The dsvae Authors
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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "dsvae/adam.hpp"
#include "dsvae/checkpoint.hpp"
#include "dsvae/dataset.hpp"
#include "dsvae/model.hpp"
#include "dsvae/sampling.hpp"

namespace dsvae {

/// Batch means of the ELBO terms for one step.
struct LogRow {
  std::uint64_t step = 0;
  double elbo = 0;
  double recon = 0;
  double kl_z = 0;
  double kl_f = 0;

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

inline const char* kLogHeader = "step,elbo,recon,kl_z,kl_f";

inline std::string format_log_row(const LogRow& r) {
  return std::to_string(r.step) + "," + format_double(r.elbo) + "," + format_double(r.recon) + "," +
         format_double(r.kl_z) + "," + format_double(r.kl_f);
}

/// Appends CSV rows to `path` (header written when the file is new or truncated).
class TrainLog {
 public:
  TrainLog() = default;
  TrainLog(const std::string& path, bool append) {
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw IoError("cannot open log '" + path + "'");
    if (!append || out_.tellp() == 0) out_ << kLogHeader << "\n";
  }
  void write(const LogRow& r) {
    if (out_.is_open()) out_ << format_log_row(r) << "\n";
  }
  void flush() {
    if (out_.is_open()) out_.flush();
  }

 private:
  std::ofstream out_;
};

/// One optimizer step: batch_sequences (sequence, frame set) draws with
/// replacement, mean of -elbo over the batch, one ADAM update.
inline LogRow train_step(Checkpoint& state, const std::vector<SequenceFrames>& data, const TrainConfig& cfg) {
  const ModelConfig& mc = state.config;
  const std::size_t batch = cfg.batch_sequences, n = cfg.n_frames;
  Rng rng = Rng::from_state(state.rng);

  const Shape& d = data.front().frames->dims();
  Tensor<float> frames({batch * n, d[1], d[2], d[3]});
  const std::size_t set_len = n * d[1] * d[2] * d[3];
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& seq = data[rng.below(data.size())];
    const FrameSet<float> fs = sample_frames(seq, n, rng);
    std::copy_n(fs.frames.data(), set_len, frames.data() + b * set_len);
  }
  const ElboNoise<float> noise = ElboNoise<float>::draw(mc, batch, n, rng);

  LogRow row;
  row.step = state.adam.step + 1;
  GradientResult<float> g;
  try {
    g = gradients(state.params, [&](Tape<float>& tape, const BoundParameters<float>& p) {
      const ElboVars v = elbo_on_tape(mc, tape, p, frames, batch, n, noise);
      auto mean_of = [&](Var x) {
        double s = 0;
        for (float e : tape.value(x).span()) s += e;
        return s / static_cast<double>(batch);
      };
      row.elbo = mean_of(v.elbo);
      row.recon = mean_of(v.recon);
      row.kl_z = mean_of(v.kl_z);
      row.kl_f = mean_of(v.kl_f);
      return v.loss;
    });
  } catch (const NumericalError& e) {
    throw NumericalError(e.tensor(), "step " + std::to_string(row.step) + ": " + e.what() + " (elbo " +
                                         format_double(row.elbo) + ", recon " + format_double(row.recon) +
                                         ", kl_z " + format_double(row.kl_z) + ", kl_f " +
                                         format_double(row.kl_f) + ")");
  }
  adam_step(state.params, g.grads, state.adam, cfg.lr);
  state.rng = rng.state();
  return row;
}

using StepCallback = std::function<void(const LogRow&, const Checkpoint&)>;

/// Runs steps until state.step() == cfg.steps. Deterministic in (state, data, cfg).
inline std::vector<LogRow> train(Checkpoint& state, const std::vector<SequenceFrames>& data, const TrainConfig& cfg,
                                 const StepCallback& on_step = {}) {
  cfg.validate();
  state.config.validate();
  if (data.empty()) throw PreconditionError("train: dataset is empty");
  if (state.config.pair_aggregation == PairAggregation::concat && cfg.n_frames != state.config.n_frames) {
    throw ConfigError("train: n_frames " + std::to_string(cfg.n_frames) + " differs from the model's " +
                      std::to_string(state.config.n_frames) + " (concat aggregation)");
  }
  const Shape& d0 = data.front().frames->dims();
  for (const auto& s : data) {
    const Shape& d = s.frames->dims();
    if (d.size() != 4 || d[1] != state.config.image_size || d[2] != state.config.image_size ||
        d[3] != state.config.channels || d[1] != d0[1] || d[2] != d0[2] || d[3] != d0[3]) {
      throw DataError("sequence '" + std::string(s.id) + "' frames " + shape_string(d) + " do not match the model");
    }
    if (d[0] < cfg.n_frames) {
      throw DataError("sequence '" + std::string(s.id) + "' is shorter than n_frames = " + std::to_string(cfg.n_frames));
    }
  }
  std::vector<LogRow> log;
  while (state.step() < cfg.steps) {
    log.push_back(train_step(state, data, cfg));
    if (on_step) on_step(log.back(), state);
  }
  return log;
}

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogRow> log;
};

/// Fresh training run seeded by cfg.seed.
inline TrainResult train(const SequenceDataset& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const StepCallback& on_step = {}) {
  cfg.validate();
  TrainResult r{Checkpoint::initial(model_cfg, cfg.seed), {}};
  r.log = train(r.checkpoint, dataset.frames_only(), cfg, on_step);
  return r;
}

}  // namespace dsvae
