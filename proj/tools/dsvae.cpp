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

// dsvae: dataset generation, training and figure commands.
//
// Exit status: 0 on success, 2 on usage errors, 1 on any other failure. Errors
// are one line on stderr: "error: <kind>: <message>".

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dsvae.hpp"

namespace {

using namespace dsvae;

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

const CLI::Validator kAtLeastOne(
    [](std::string& v) -> std::string {
      return !v.empty() && v.find_first_not_of("0123456789") == std::string::npos &&
                     v.find_first_not_of('0') != std::string::npos
                 ? std::string()
                 : "must be an integer >= 1, got '" + v + "'";
    },
    "INT>=1");

void add_common(CLI::App* cmd, Common& c, const std::string& out_help, bool out_required) {
  cmd->add_option("--seed", c.seed, "Random seed (default 0)");
  cmd->add_option("--config", c.config, "key = value file; flags override it")->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, out_help);
  if (out_required) out->required();
}

/// The config file, with every given flag written over it.
KeyValues merged_keys(const Common& c, const CLI::App* cmd, const std::vector<std::pair<std::string, std::string>>& flags) {
  KeyValues kv = c.config.empty() ? KeyValues() : KeyValues::load(c.config);
  for (const auto& [flag, key] : flags) {
    const auto* opt = cmd->get_option("--" + flag);
    if (opt->count() > 0) kv.set(key, opt->as<std::string>());
  }
  if (cmd->get_option("--seed")->count() > 0) kv.set("seed", std::to_string(c.seed));
  return kv;
}

SequenceFrames frames_of(const SequenceDataset& ds, const std::string& id) {
  const Sequence& s = ds.find(id);
  return {s.id, &s.frames};
}

void check_geometry(const ModelConfig& cfg, const SequenceDataset& ds) {
  if (ds.empty()) throw DataError("dataset is empty");
  if (ds.height() != cfg.image_size || ds.width() != cfg.image_size || ds.channels() != cfg.channels) {
    throw DataError("dataset frames are " + std::to_string(ds.height()) + "x" + std::to_string(ds.width()) + "x" +
                    std::to_string(ds.channels()) + " but the model expects " + std::to_string(cfg.image_size) + "x" +
                    std::to_string(cfg.image_size) + "x" + std::to_string(cfg.channels));
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

// ---- gen-data ---------------------------------------------------------------

struct GenArgs {
  Common common;
  std::size_t num = 200;
  std::size_t length = 0, max_length = 0, canvas = 0, palette = 0;
  double shape_size = 0;
  std::string shapes;
};

void run_gen_data(const GenArgs& a, const CLI::App* cmd) {
  KeyValues kv = merged_keys(a.common, cmd,
                             {{"length", "length"},
                              {"max-length", "max_length"},
                              {"canvas", "canvas"},
                              {"palette", "palette_size"},
                              {"shape-size", "shape_size"},
                              {"shapes", "shapes"}});
  std::size_t num = a.num;
  if (cmd->get_option("--num")->count() > 0) kv.set("num_sequences", std::to_string(num));
  kv.take_int("num_sequences", num);
  const ShapeWorldConfig cfg = ShapeWorldConfig::from_keys(kv);
  kv.expect_consumed("gen-data");
  const SequenceDataset ds = gen_moving_shapes(cfg, num);
  write_packed(ds, a.common.out);
  write_manifest(ds, a.common.out + ".manifest");
  std::cout << "wrote " << ds.size() << " sequences to " << a.common.out << "\n";
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
  std::string resume;
  std::string log;
  std::string preset;
  std::uint64_t steps = 0;
  std::size_t batch = 0;
  double lr = 0;
  std::uint64_t checkpoint_interval = 0;
  std::uint64_t print_every = 100;
};

void run_train(const TrainArgs& a, const CLI::App* cmd) {
  KeyValues kv = merged_keys(a.common, cmd,
                             {{"preset", "preset"},
                              {"steps", "steps"},
                              {"batch", "batch_sequences"},
                              {"lr", "lr"},
                              {"checkpoint-interval", "checkpoint_interval"},
                              {"log", "log_path"}});
  const auto preset = kv.entries().find("preset");
  TrainConfig train = preset == kv.entries().end() ? TrainConfig() : TrainConfig::preset(preset->second);
  const std::size_t before = kv.entries().size();
  ModelConfig model = ModelConfig::from_keys(kv);
  const bool model_keys_given = kv.entries().size() != before;
  train = TrainConfig::from_keys(kv, train);
  kv.expect_consumed("train");
  train.n_frames = model.n_frames;
  if (train.log_path.empty()) train.log_path = a.common.out + ".log.csv";
  train.validate();

  const SequenceDataset ds = load_packed(a.data);
  std::optional<Checkpoint> state;
  if (!a.resume.empty()) {
    state = load_checkpoint(a.resume);
    // a resumed run keeps the checkpoint's architecture
    if (model_keys_given && state->config != model) {
      throw ConfigError("model configuration does not match the checkpoint being resumed");
    }
    model = state->config;
    train.n_frames = model.n_frames;
    if (state->step() >= train.steps) {
      throw ConfigError("checkpoint is already at step " + std::to_string(state->step()) + " >= steps");
    }
  } else {
    state = Checkpoint::initial(model, train.seed);
  }
  check_geometry(model, ds);

  TrainLog log(train.log_path, !a.resume.empty());
  const std::uint64_t every = a.print_every;
  dsvae::train(*state, ds.frames_only(), train, [&](const LogRow& row, const Checkpoint& ck) {
    log.write(row);
    if (every > 0 && (row.step % every == 0 || row.step == train.steps)) {
      std::cout << format_log_row(row) << "\n" << std::flush;
    }
    if (train.checkpoint_interval > 0 && ck.step() % train.checkpoint_interval == 0 && ck.step() < train.steps) {
      log.flush();
      save_checkpoint(ck, a.common.out);
    }
  });
  log.flush();
  save_checkpoint(*state, a.common.out);
  std::cout << "saved step " << state->step() << " to " << a.common.out << "\n";
}

// ---- figures ----------------------------------------------------------------

struct FigureArgs {
  Common common;
  std::string ckpt;
  std::string data;
  std::string sequence;
  std::string other;  // swap: sequence B
  std::string plot;
  GridSpec grid;
};

void run_grid(const FigureArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const SequenceDataset ds = load_packed(a.data);
  check_geometry(ck.config, ds);
  const Inference<float> inf(ck.config, ck.params);
  Rng rng(a.common.seed);
  const GridResult r = grid_traversal(inf, frames_of(ds, a.sequence), a.grid, rng);
  write_png(r.montage, a.common.out);
  std::cout << "wrote " << r.tiles.rows() << " tiles to " << a.common.out << "\n";
}

void run_timeline(const FigureArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const SequenceDataset ds = load_packed(a.data);
  check_geometry(ck.config, ds);
  const Inference<float> inf(ck.config, ck.params);
  const Tensor<float> z = timeline(inf, frames_of(ds, a.sequence));
  write_text(a.common.out, timeline_csv(z));
  if (!a.plot.empty()) write_png(timeline_plot(z), a.plot);
  std::cout << "wrote " << z.rows() << " rows to " << a.common.out << "\n";
}

void run_swap(const FigureArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const SequenceDataset ds = load_packed(a.data);
  check_geometry(ck.config, ds);
  const Inference<float> inf(ck.config, ck.params);
  const SwapResult r = swap_strip(inf, frames_of(ds, a.sequence), frames_of(ds, a.other));
  write_png(r.strip, a.common.out);
  std::cout << "wrote " << r.swapped.rows() << " swapped frames to " << a.common.out << "\n";
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  Common common;
  std::string ckpt;
  std::string preset;
  std::size_t num = 8;
  bool share_f = false;
};

void run_sample(const SampleArgs& a, const CLI::App* cmd) {
  KeyValues kv = merged_keys(a.common, cmd, {{"preset", "preset"}});
  std::uint64_t seed = 0;
  kv.take_int("seed", seed);
  ModelConfig model = ModelConfig::from_keys(kv);
  kv.expect_consumed("sample");
  ParameterSet<float> params;
  if (!a.ckpt.empty()) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    model = ck.config;
    params = std::move(ck.params);
  } else {
    model.validate();
    Rng init(seed);
    params = init_parameters<float>(model, init);
  }
  Rng rng = Rng::for_stream(seed, 1);
  const auto images = sample_generate(model, params, rng, a.num, a.share_f);
  std::filesystem::create_directories(a.common.out);
  for (std::size_t k = 0; k < images.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03zu.png", k);
    write_png(to_image(images[k]), (std::filesystem::path(a.common.out) / name).string());
  }
  std::cout << "wrote " << images.size() << " samples to " << a.common.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangled sequential autoencoder: data, training and figures"};
  app.require_subcommand(1);

  GenArgs gen;
  gen.common.out = "data.sqds";
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a moving-shapes dataset (.sqds + .manifest)");
  add_common(gen_cmd, gen.common, "Dataset path (default data.sqds)", false);
  gen_cmd->add_option("--num", gen.num, "Number of sequences (default 200)")->check(kAtLeastOne);
  gen_cmd->add_option("--length", gen.length, "Frames per sequence (default 20)");
  gen_cmd->add_option("--max-length", gen.max_length, "Draw lengths uniformly from [length, max-length]");
  gen_cmd->add_option("--canvas", gen.canvas, "Canvas size in pixels (default 32)");
  gen_cmd->add_option("--palette", gen.palette, "Number of colors (default 6)");
  gen_cmd->add_option("--shape-size", gen.shape_size, "Shape size in pixels (default 10)");
  gen_cmd->add_option("--shapes", gen.shapes, "Comma-separated shape kinds");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model, writing a checkpoint and a CSV log");
  add_common(train_cmd, tr.common, "Checkpoint path", true);
  train_cmd->add_option("--data", tr.data, "Packed dataset")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--steps", tr.steps, "Total optimizer steps")->check(kAtLeastOne);
  train_cmd->add_option("--batch", tr.batch, "Sequences per step")->check(kAtLeastOne);
  train_cmd->add_option("--lr", tr.lr, "ADAM learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--preset", tr.preset, "desk, paper, paper_mmnist or paper_sprites");
  train_cmd->add_option("--log", tr.log, "CSV log path (default <out>.log.csv)");
  train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--checkpoint-interval", tr.checkpoint_interval, "Also save every k steps");
  train_cmd->add_option("--print-every", tr.print_every, "Print every k-th log row (0 = quiet)");

  FigureArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Decode a grid over two z dimensions with f fixed");
  add_common(grid_cmd, grid.common, "PNG path", true);
  grid_cmd->add_option("--ckpt", grid.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--data", grid.data, "Packed dataset")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--sequence", grid.sequence, "Source sequence id for f")->required();
  grid_cmd->add_option("--grid-size", grid.grid.grid_size, "Tiles per axis (default 8)");
  grid_cmd->add_option("--z-min", grid.grid.z_min, "Lower end of the range (default -2)");
  grid_cmd->add_option("--z-max", grid.grid.z_max, "Upper end of the range (default 2)");
  grid_cmd->add_option("--dim-x", grid.grid.dim_x, "z dimension along columns (default 0)");
  grid_cmd->add_option("--dim-y", grid.grid.dim_y, "z dimension along rows (default 1)");

  FigureArgs tl;
  auto* tl_cmd = app.add_subcommand("timeline", "Per-frame z posterior means of one sequence as CSV");
  add_common(tl_cmd, tl.common, "CSV path", true);
  tl_cmd->add_option("--ckpt", tl.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  tl_cmd->add_option("--data", tl.data, "Packed dataset")->required()->check(CLI::ExistingFile);
  tl_cmd->add_option("--sequence", tl.sequence, "Sequence id")->required();
  tl_cmd->add_option("--plot", tl.plot, "Also write a plot of z_1 against t");

  FigureArgs sw;
  auto* swap_cmd = app.add_subcommand("swap", "Decode f of sequence A with the dynamics of sequence B");
  add_common(swap_cmd, sw.common, "PNG path", true);
  swap_cmd->add_option("--ckpt", sw.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  swap_cmd->add_option("--data", sw.data, "Packed dataset")->required()->check(CLI::ExistingFile);
  swap_cmd->add_option("--a", sw.sequence, "Sequence supplying f")->required();
  swap_cmd->add_option("--b", sw.other, "Sequence supplying z")->required();

  SampleArgs sm;
  sm.common.out = "samples";
  auto* sample_cmd = app.add_subcommand("sample", "Draw images from the generative model");
  add_common(sample_cmd, sm.common, "Output directory (default samples)", false);
  sample_cmd->add_option("--ckpt", sm.ckpt, "Checkpoint (default: freshly initialized model)")
      ->check(CLI::ExistingFile);
  sample_cmd->add_option("--preset", sm.preset, "Architecture preset when no checkpoint is given");
  sample_cmd->add_option("--num", sm.num, "Number of images (default 8)")->check(kAtLeastOne);
  sample_cmd->add_flag("--share-f", sm.share_f, "Use one static latent for all images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen_cmd) run_gen_data(gen, gen_cmd);
    if (*train_cmd) run_train(tr, train_cmd);
    if (*grid_cmd) run_grid(grid);
    if (*tl_cmd) run_timeline(tl);
    if (*swap_cmd) run_swap(sw);
    if (*sample_cmd) run_sample(sm, sample_cmd);
  } catch (const dsvae::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
