// Copyright 2026 The dvscell Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the command-line tool as a subprocess in scratch directories.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dvscell/io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_in(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" DVSCELL_CLI "' " + args + " 2>&1";
  RunResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("dvscell_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) +
             "_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path dir(const std::string& name) {
    const fs::path d = root_ / name;
    fs::create_directories(d);
    return d;
  }

  fs::path root_;
};

// Every file under `a` exists under `b` with the same bytes, and vice versa.
void expect_same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  }
  std::size_t other = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) other += e.is_regular_file();
  EXPECT_EQ(files.size(), other);
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(b / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

const char* kWorkflow[] = {
    "synth --out-dir s --suite fixed --images 3 --seed 5",
    "fuse --original s/detections_original.json --rotated s/detections_rotated.json --out f.json",
    "rotate-views --image s/images/scene_0000.png --out-dir v",
    "train-scorer --candidates f.json --gt s/gt.json --out m.json",
    "select --candidates f.json --scorer logistic_geom --model m.json --out sel.json --scores-out sc.json",
    "eval --pred sel.json --gt s/annotations --label-map s/label_map.json --out r.json",
    "losses-check --samples 100 --out l.json",
    "split --n 520 --sizes 312,104,104 --seed 3 --out-dir sp",
};

TEST_F(CliTest, ExitCodes) {
  const fs::path d = dir("w");
  EXPECT_EQ(run_in(d, "--version").code, 0);
  EXPECT_EQ(run_in(d, "end-to-end --suite zero-noise --mode full --nms-iou 2").code, 1);
  EXPECT_EQ(run_in(d, "end-to-end --suite nope").code, 1);
  EXPECT_EQ(run_in(d, "split --n 10 --sizes 3,3,3 --out-dir sp").code, 1);
  const RunResult missing = run_in(d, "fuse --original x.json --rotated y.json --out z.json");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.out.find("IoError"), std::string::npos) << missing.out;
  EXPECT_FALSE(fs::exists(d / "z.json"));
}

TEST_F(CliTest, SplitSizes) {
  const fs::path d = dir("w");
  ASSERT_EQ(run_in(d, "split --n 520 --sizes 312,104,104 --seed 1 --out-dir sp").code, 0);
  EXPECT_EQ(line_count(d / "sp/train.txt"), 312u);
  EXPECT_EQ(line_count(d / "sp/val.txt"), 104u);
  EXPECT_EQ(line_count(d / "sp/test.txt"), 104u);
}

TEST_F(CliTest, EvalOfGroundTruthIsPerfect) {
  const fs::path d = dir("w");
  ASSERT_EQ(run_in(d, "synth --out-dir s --suite zero-noise --images 2").code, 0);
  const RunResult r = run_in(d, "eval --pred s/gt.json --gt s/gt.json --out r.json");
  ASSERT_EQ(r.code, 0) << r.out;
  const std::vector<std::string> cols{"AP^bbox", "AP^bbox_0.50", "AP^bbox_0.75",
                                      "AP^segm", "AP^segm_0.50", "AP^segm_0.75"};
  std::istringstream lines(r.out);
  std::string header, values;
  std::getline(lines, header);
  std::getline(lines, values);
  std::istringstream hs(header), vs(values);
  for (const auto& c : cols) {
    std::string h, v;
    hs >> h;
    vs >> v;
    EXPECT_EQ(h, c);
    EXPECT_EQ(v, "1.000");
  }
  const auto report = dvscell::parse_json(slurp(d / "r.json"), "report");
  EXPECT_EQ(report["metrics"]["AP_segm"].get<double>(), 1.0);
}

TEST_F(CliTest, OverlayDoesNotChangeReport) {
  const fs::path d = dir("w");
  ASSERT_EQ(run_in(d, "synth --out-dir s --suite fixed --images 2 --seed 3").code, 0);
  ASSERT_EQ(run_in(d, "eval --pred s/detections_original.json --gt s/gt.json --out a.json").code, 0);
  ASSERT_EQ(run_in(d, "eval --pred s/detections_original.json --gt s/gt.json --out b.json "
                      "--overlay ov --images s/images").code, 0);
  EXPECT_EQ(slurp(d / "a.json"), slurp(d / "b.json"));
  EXPECT_TRUE(fs::exists(d / "ov/overlay_0000.png"));
  EXPECT_TRUE(fs::exists(d / "ov/overlay_0001.png"));
}

TEST_F(CliTest, ByteIdenticalAcrossRepeatsAndJobs) {
  const fs::path a = dir("a"), b = dir("b"), c = dir("c");
  for (const char* step : kWorkflow) {
    ASSERT_EQ(run_in(a, std::string(step) + " --jobs 1").code, 0) << step;
    ASSERT_EQ(run_in(b, std::string(step) + " --jobs 1").code, 0) << step;
    ASSERT_EQ(run_in(c, std::string(step) + " --jobs 4").code, 0) << step;
  }
  expect_same_tree(a, b);
  expect_same_tree(a, c);
}

TEST_F(CliTest, EndToEndGolden) {
  const fs::path a = dir("a"), b = dir("b");
  const RunResult r1 = run_in(a, "end-to-end --suite fixed --mode full --out e.json --jobs 1");
  ASSERT_EQ(r1.code, 0) << r1.out;
  const RunResult r2 = run_in(b, "end-to-end --suite fixed --mode full --out e.json --jobs 3");
  ASSERT_EQ(r2.code, 0) << r2.out;
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_EQ(slurp(a / "e.json"), slurp(fs::path(DVSCELL_GOLDEN_DIR) / "end_to_end_fixed_full.json"));
  EXPECT_EQ(slurp(a / "e.json"), slurp(b / "e.json"));
  EXPECT_EQ(slurp(a / "e.json.manifest.json"), slurp(b / "e.json.manifest.json"));
}

TEST_F(CliTest, ManifestRecordsOutputs) {
  const fs::path d = dir("w");
  ASSERT_EQ(run_in(d, "losses-check --samples 100 --out l.json").code, 0);
  const auto m = dvscell::parse_json(slurp(d / "l.json.manifest.json"), "manifest");
  EXPECT_EQ(m["command"], "losses-check");
  ASSERT_EQ(m["outputs"].size(), 1u);
  EXPECT_EQ(m["outputs"][0]["path"], "l.json");
  EXPECT_EQ(m["outputs"][0]["sha256"].get<std::string>().size(), 64u);
}

}  // namespace
