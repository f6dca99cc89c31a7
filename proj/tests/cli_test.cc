// Copyright 2026 The mrconv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end tests of the mrconv binary.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "mrconv/io.h"
#include "mrconv/verify.h"

namespace mrconv {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("mrconv_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

  Result run(const std::string& args) const {
    const std::string cmd = std::string(MRCONV_CLI) + " " + args + " >" +
                            path("stdout.txt") + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(path("stdout.txt"));
    r.err = slurp(path("stderr.txt"));
    return r;
  }

  // Writes toy.net / toy.mrw / toy.mrt for `seed`.
  void make_toy(int seed = 3) const {
    const Result r = run("make-toy --seed " + std::to_string(seed) +
                         " --spec " + path("toy.net") + " --weights " +
                         path("toy.mrw") + " --input " + path("toy.mrt"));
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::string model_args() const {
    return "--spec " + path("toy.net") + " --weights " + path("toy.mrw") +
           " --input " + path("toy.mrt");
  }

  // One mask file per adaptive stage of the toy, filled with `fill`.
  std::string mask_args(std::uint8_t fill) const {
    const NetworkSpec spec = read_network_spec(path("toy.net"));
    const DenseTensor in = read_tensor(path("toy.mrt"));
    std::string args;
    int s = 0;
    for (auto [r, c] : adaptive_mask_shapes(spec, in.height(), in.width())) {
      const std::string p =
          path("m" + std::to_string(fill) + "_" + std::to_string(s++) + ".msk");
      write_mask(p, DownsampleMask(r, c, fill));
      args += " --mask " + p;
    }
    return args;
  }

  fs::path dir_;
};

TEST_F(CliTest, RunRegularAndAdaptive) {
  make_toy();
  const Result regular =
      run("run " + model_args() + " --out " + path("reg.mrt"));
  ASSERT_EQ(regular.code, 0) << regular.err;
  EXPECT_NE(regular.out.find("variant regular total_ma="), std::string::npos);
  const DenseTensor reg = read_tensor(path("reg.mrt"));

  const Result adaptive = run("run " + model_args() + " --variant adaptive" +
                              mask_args(1) + " --out " + path("ada.mrm"));
  ASSERT_EQ(adaptive.code, 0) << adaptive.err;
  const NetworkSpec spec = read_network_spec(path("toy.net"));
  const MultiResMap ada = read_multires(path("ada.mrm"));
  EXPECT_EQ(sample_lattice(ada, int_pow(2, spec.n_adaptive)), reg);
}

TEST_F(CliTest, OutputsAreByteIdenticalAcrossRuns) {
  make_toy();
  const std::string args =
      "run " + model_args() + " --variant adaptive" + mask_args(0);
  ASSERT_EQ(run(args + " --out " + path("a.mrm")).code, 0);
  ASSERT_EQ(run(args + " --out " + path("b.mrm")).code, 0);
  EXPECT_EQ(slurp(path("a.mrm")), slurp(path("b.mrm")));
}

TEST_F(CliTest, ExitCodes) {
  make_toy();
  // Missing file.
  Result r = run("run --spec " + path("nope.net") + " --weights " +
                 path("toy.mrw") + " --input " + path("toy.mrt") + " --out " +
                 path("o.mrt"));
  EXPECT_EQ(r.code, 2);
  // Truncated weights: path and byte offset in the message.
  const auto w = read_file_bytes(path("toy.mrw"));
  write_file_bytes(path("short.mrw"),
                   std::vector<std::uint8_t>(w.begin(), w.begin() + 18));
  r = run("run --spec " + path("toy.net") + " --weights " + path("short.mrw") +
          " --input " + path("toy.mrt") + " --out " + path("o.mrt"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("short.mrw: byte 16"), std::string::npos) << r.err;
  // Adaptive without masks, bad variant, unknown option.
  EXPECT_EQ(run("run " + model_args() + " --variant adaptive --out " +
                path("o.mrm"))
                .code,
            3);
  EXPECT_EQ(
      run("run " + model_args() + " --variant fancy --out " + path("o")).code,
      3);
  EXPECT_EQ(run("run --bogus").code, 3);
}

TEST_F(CliTest, EdgeMaskOnConstantImageDownsamplesEverything) {
  std::vector<std::uint8_t> gray(32 * 32, 128);
  write_file_bytes(path("flat.pgm"), encode_pgm(32, 32, gray));
  const Result r =
      run("mask edge --input " + path("flat.pgm") + " --threshold 0.15 --out " +
          path("e.msk") + " --pgm " + path("e.pgm"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_mask(path("e.msk")), DownsampleMask::ones(16, 16));
  EXPECT_TRUE(fs::exists(path("e.pgm")));
}

TEST_F(CliTest, EdgeMaskMatchesGoldenFile) {
  const std::string data = MRCONV_TEST_DATA;
  const Result r = run("mask edge --input " + data + "/step64.pgm" +
                       " --threshold 0.35 --dilate 11 --out " + path("e.msk"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("e.msk")), slurp(data + "/edge_t035.msk"));
}

TEST_F(CliTest, KeypointMasks) {
  std::ofstream(path("kps.txt")) << "8 8\n# comment\n2 3\n";
  Result r = run("mask keypoints --kps " + path("kps.txt") +
                 " --height 16 --width 16 --dilate 0 --out " + path("k0.msk"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_mask(path("k0.msk")), DownsampleMask::ones(8, 8));
  r = run("mask keypoints --kps " + path("kps.txt") +
          " --height 16 --width 16 --dilate inf --out " + path("ki.msk"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_mask(path("ki.msk")), DownsampleMask::zeros(8, 8));
  // Two stages: 8x8 then 4x4.
  r = run("mask keypoints --kps " + path("kps.txt") +
          " --height 16 --width 16 --dilate 3 --stages 2 --out " +
          path("s1.msk") + " --out " + path("s2.msk"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_mask(path("s2.msk")).rows(), 4);
  EXPECT_EQ(run("mask keypoints --kps " + path("kps.txt") +
                " --height 16 --width 16 --dilate 4 --out " + path("x.msk"))
                .code,
            3);
  std::ofstream(path("bad.txt")) << "1 2\nfoo\n";
  r = run("mask keypoints --kps " + path("bad.txt") +
          " --height 16 --width 16 --out " + path("x.msk"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("byte 4"), std::string::npos) << r.err;
}

TEST_F(CliTest, OracleMaskWithIdenticalPredictions) {
  std::vector<std::uint8_t> labels(16 * 16, 3);
  write_file_bytes(path("l.pgm"), encode_pgm(16, 16, labels));
  const Result r = run("mask oracle --low " + path("l.pgm") + " --high " +
                       path("l.pgm") + " --labels " + path("l.pgm") +
                       " --out " + path("o.msk"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_mask(path("o.msk")), DownsampleMask::ones(8, 8));
}

TEST_F(CliTest, VerifyPassesAndCatchesPerturbation) {
  Result r = run("verify --seed 5 --trials 10 --json " + path("v.json"));
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("CHECK guarantee2 pass"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("v.json")));
  EXPECT_TRUE(j["passed"].get<bool>());

  r = run("verify --seed 5 --trials 10 --perturb-coarse");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("CHECK guarantee2 fail"), std::string::npos) << r.out;

  EXPECT_EQ(run("verify --trials 0").code, 3);
}

TEST_F(CliTest, VerifyWithSpecFile) {
  make_toy(7);
  const Result r = run("verify " + model_args() + " --trials 6");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

TEST_F(CliTest, CostEndpointsMatchRegularAndDilated) {
  make_toy();
  const auto total = [&](const std::string& masks, const std::string& out) {
    const Result r =
        run("cost " + model_args() + masks + " --out " + path(out));
    EXPECT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(path(out)));
    return std::array<std::uint64_t, 3>{
        j["variants"][0]["total_multiply_adds"].get<std::uint64_t>(),
        j["variants"][1]["total_multiply_adds"].get<std::uint64_t>(),
        j["variants"][2]["total_multiply_adds"].get<std::uint64_t>()};
  };
  const auto ones = total(mask_args(1), "c1.json");
  const auto zeros = total(mask_args(0), "c0.json");
  EXPECT_EQ(ones[2], ones[0]);
  EXPECT_EQ(zeros[2], zeros[1]);
  EXPECT_LE(ones[0], ones[1]);
  const NetworkSpec spec = read_network_spec(path("toy.net"));
  const bool conv_after = std::any_of(
      spec.items.begin() + spec.first_adaptive_item(), spec.items.end(),
      [](const NetworkItem& it) { return std::holds_alternative<ConvLayer>(it); });
  if (conv_after) EXPECT_LT(ones[0], ones[1]);
  EXPECT_EQ(run("cost " + model_args()).code, 3);
}

}  // namespace
}  // namespace mrconv
