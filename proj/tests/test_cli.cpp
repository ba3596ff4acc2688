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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "dsvae.hpp"

namespace fs = std::filesystem;
using namespace dsvae;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("dsvae_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  CliResult run(const std::string& args) const {
    const std::string cmd = std::string("cd '") + dir_.string() + "' && '" + DSVAE_CLI_PATH + "' " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "stdout.txt");
    r.err = slurp(dir_ / "stderr.txt");
    return r;
  }

  // small dataset + few-step model shared by the figure commands
  void make_model() {
    ASSERT_EQ(run("gen-data --seed 3 --num 6 --out d.sqds").code, 0);
    const CliResult r = run("train --data d.sqds --out m.sqdc --steps 2 --batch 2 --seed 4");
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

TEST_F(Cli, GenDataSameSeedIdenticalFiles) {
  ASSERT_EQ(run("gen-data --seed 7 --num 12").code, 0);
  const std::string first = slurp(path("data.sqds"));
  const std::string manifest = slurp(path("data.sqds.manifest"));
  ASSERT_EQ(run("gen-data --seed 7 --num 12 --out again.sqds").code, 0);
  EXPECT_EQ(first, slurp(path("again.sqds")));
  EXPECT_EQ(manifest, slurp(path("again.sqds.manifest")));
  ASSERT_EQ(run("gen-data --seed 8 --num 12 --out other.sqds").code, 0);
  EXPECT_NE(first, slurp(path("other.sqds")));
  const SequenceDataset ds = load_packed(path("data.sqds").string());
  EXPECT_EQ(ds.size(), 12u);
}

TEST_F(Cli, GenDataDefaultsMatchDeskScale) {
  ASSERT_EQ(run("gen-data --seed 7").code, 0);
  const SequenceDataset ds = load_packed(path("data.sqds").string());
  EXPECT_EQ(ds.size(), 200u);
  EXPECT_EQ(ds.sequences[0].frames.dims(), (Shape{20, 32, 32, 3}));
}

TEST_F(Cli, GenDataConfigFileAndFlagOverride) {
  std::ofstream(path("g.cfg")) << "# shapes\ncanvas = 16\nshape_size = 6\nlength = 9\n";
  ASSERT_EQ(run("gen-data --config g.cfg --length 5 --num 3 --out d.sqds").code, 0);
  const SequenceDataset ds = load_packed(path("d.sqds").string());
  EXPECT_EQ(ds.sequences[0].frames.dims(), (Shape{5, 16, 16, 3}));
}

TEST_F(Cli, TrainZeroStepsIsUsageError) {
  ASSERT_EQ(run("gen-data --num 3 --out d.sqds").code, 0);
  const CliResult r = run("train --data d.sqds --out m.sqdc --steps 0");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("m.sqdc")));
}

TEST_F(Cli, UnknownFlagAndMissingPathAreUsageErrors) {
  EXPECT_EQ(run("sample --bogus").code, 2);
  EXPECT_EQ(run("train --out m.sqdc").code, 2);          // no --data
  EXPECT_EQ(run("grid --out g.png --sequence 0").code, 2);  // no --ckpt/--data
  EXPECT_EQ(run("").code, 2);                             // no subcommand
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, ErrorsAreOneMachineParseableLine) {
  const std::regex line("error: (usage|config|precondition|numerical|format|data|io|internal): [^\n]+\n");
  const CliResult usage = run("sample --bogus");
  EXPECT_TRUE(std::regex_match(usage.err, line)) << usage.err;
  std::ofstream(path("bad.cfg")) << "lr = fast\n";
  ASSERT_EQ(run("gen-data --num 3 --out d.sqds").code, 0);
  const CliResult config = run("train --config bad.cfg --data d.sqds --out m.sqdc");
  EXPECT_EQ(config.code, 1);
  EXPECT_TRUE(std::regex_match(config.err, line)) << config.err;
  EXPECT_EQ(config.err.rfind("error: config: ", 0), 0u);
  std::ofstream(path("unknown.cfg")) << "colour = red\n";
  EXPECT_EQ(run("train --config unknown.cfg --data d.sqds --out m.sqdc").err.rfind("error: config: ", 0), 0u);
  std::ofstream(path("junk.sqds")) << "not a dataset";
  const CliResult format = run("train --data junk.sqds --out m.sqdc --steps 1");
  EXPECT_EQ(format.code, 1);
  EXPECT_EQ(format.err.rfind("error: format: ", 0), 0u) << format.err;
}

TEST_F(Cli, SampleWritesPngsInByteRange) {
  const CliResult r = run("sample --num 4 --seed 1");
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(path("samples"))) {
    ASSERT_EQ(e.path().extension(), ".png");
    const Image8 img = read_png(e.path().string());
    EXPECT_EQ(img.width, 32u);
    EXPECT_EQ(img.height, 32u);
    EXPECT_EQ(img.channels, 3u);
    ++count;
  }
  EXPECT_EQ(count, 4u);
  // same seed, same bytes
  ASSERT_EQ(run("sample --num 4 --seed 1 --out again").code, 0);
  EXPECT_EQ(slurp(path("samples/sample_002.png")), slurp(path("again/sample_002.png")));
}

TEST_F(Cli, TrainWritesCheckpointAndLog) {
  ASSERT_EQ(run("gen-data --seed 3 --num 6 --out d.sqds").code, 0);
  const CliResult r = run("train --data d.sqds --out m.sqdc --steps 3 --batch 2 --lr 1e-3 --seed 4");
  ASSERT_EQ(r.code, 0) << r.err;
  const Checkpoint ck = load_checkpoint(path("m.sqdc").string());
  EXPECT_EQ(ck.step(), 3u);
  const std::string log = slurp(path("m.sqdc.log.csv"));
  EXPECT_EQ(log.rfind("step,elbo,recon,kl_z,kl_f\n1,", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
}

TEST_F(Cli, ResumeMatchesUninterruptedRunAndLeavesInputUntouched) {
  ASSERT_EQ(run("gen-data --seed 3 --num 6 --out d.sqds").code, 0);
  const std::string data_before = slurp(path("d.sqds"));
  ASSERT_EQ(run("train --data d.sqds --out full.sqdc --steps 4 --batch 2 --seed 4").code, 0);
  ASSERT_EQ(run("train --data d.sqds --out half.sqdc --steps 2 --batch 2 --seed 4").code, 0);
  const std::string half = slurp(path("half.sqdc"));
  const CliResult r = run("train --data d.sqds --out resumed.sqdc --resume half.sqdc --steps 4 --batch 2 --seed 4");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("full.sqdc")), slurp(path("resumed.sqdc")));
  EXPECT_EQ(half, slurp(path("half.sqdc")));
  EXPECT_EQ(data_before, slurp(path("d.sqds")));
}

TEST_F(Cli, ResumeRejectsDifferentArchitecture) {
  ASSERT_EQ(run("gen-data --seed 3 --num 6 --out d.sqds").code, 0);
  ASSERT_EQ(run("train --data d.sqds --out m.sqdc --steps 1 --batch 2").code, 0);
  std::ofstream(path("wide.cfg")) << "f_dim = 9\n";
  const CliResult r = run("train --config wide.cfg --data d.sqds --out r.sqdc --resume m.sqdc --steps 2");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: config: ", 0), 0u);
}

TEST_F(Cli, GridMontageDeterministic) {
  make_model();
  const std::string ckpt_before = slurp(path("m.sqdc"));
  ASSERT_EQ(run("grid --ckpt m.sqdc --data d.sqds --sequence 2 --seed 5 --out g1.png").code, 0);
  ASSERT_EQ(run("grid --ckpt m.sqdc --data d.sqds --sequence 2 --seed 5 --out g2.png").code, 0);
  EXPECT_EQ(slurp(path("g1.png")), slurp(path("g2.png")));
  const Image8 img = read_png(path("g1.png").string());
  EXPECT_EQ(img.width, 8u * 32u);
  EXPECT_EQ(img.height, 8u * 32u);
  ASSERT_EQ(run("grid --ckpt m.sqdc --data d.sqds --sequence 2 --grid-size 3 --out g3.png").code, 0);
  EXPECT_EQ(read_png(path("g3.png").string()).width, 3u * 32u);
  EXPECT_EQ(ckpt_before, slurp(path("m.sqdc")));
}

TEST_F(Cli, GridMissingSequenceIsDataError) {
  make_model();
  const CliResult r = run("grid --ckpt m.sqdc --data d.sqds --sequence nope --out g.png");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: data: ", 0), 0u);
  EXPECT_FALSE(fs::exists(path("g.png")));
}

TEST_F(Cli, GridRejectsBadRange) {
  make_model();
  EXPECT_EQ(run("grid --ckpt m.sqdc --data d.sqds --sequence 0 --z-min 1 --z-max 1 --out g.png").err.rfind(
                "error: config: ", 0),
            0u);
}

TEST_F(Cli, TimelineCsvAndPlot) {
  make_model();
  const CliResult r = run("timeline --ckpt m.sqdc --data d.sqds --sequence 1 --out t.csv --plot t.png");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(path("t.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,z_1,z_2");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u);
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
    ++rows;
  }
  EXPECT_EQ(rows, 20u);
  EXPECT_NO_THROW(read_png(path("t.png").string()));
}

TEST_F(Cli, SwapStripLayout) {
  make_model();
  const CliResult r = run("swap --ckpt m.sqdc --data d.sqds --a 0 --b 1 --out s.png");
  ASSERT_EQ(r.code, 0) << r.err;
  const Image8 img = read_png(path("s.png").string());
  EXPECT_EQ(img.width, 20u * 32u);
  EXPECT_EQ(img.height, 3u * 32u);
  EXPECT_EQ(run("swap --ckpt m.sqdc --data d.sqds --a 0 --b missing --out x.png").err.rfind("error: data: ", 0), 0u);
}

TEST_F(Cli, FiguresRejectMismatchedDataset) {
  make_model();
  ASSERT_EQ(run("gen-data --num 3 --canvas 16 --shape-size 6 --out small.sqds").code, 0);
  const CliResult r = run("timeline --ckpt m.sqdc --data small.sqds --sequence 0 --out t.csv");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: data: ", 0), 0u);
}

}  // namespace
