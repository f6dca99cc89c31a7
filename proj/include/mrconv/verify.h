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

// Machine-checkable equivalences between the regular, dilated and adaptive
// executions. Every check returns report entries instead of throwing, and
// all randomness flows from an explicit seed.

#ifndef MRCONV_VERIFY_H_
#define MRCONV_VERIFY_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrconv/multires.h"
#include "mrconv/network.h"
#include "mrconv/tensor.h"

namespace mrconv {

inline constexpr double kDefaultTolerance = 1e-5;

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_dev = 0.0;
  std::string detail;
};

class Report {
 public:
  void add(CheckResult result) { checks_.push_back(std::move(result)); }
  void merge(const Report& other);

  const std::vector<CheckResult>& checks() const { return checks_; }
  bool passed() const;
  std::size_t failures() const;

  // One "CHECK <name> <pass|fail> max_dev=<float> detail=<string>" line per
  // check.
  std::string to_text() const;
  // {"passed": bool, "failures": n, "checks": [...]}
  std::string to_json() const;

 private:
  std::vector<CheckResult> checks_;
};

using Rng = std::mt19937_64;

// Weights U[-1, 1] / K^2, biases U[-1, 1] / K^2 where present.
void randomize_weights(NetworkSpec& spec, Rng& rng);
// Values U[0, 1].
DenseTensor random_input(const InputShape& shape, Rng& rng);

struct ToySpecOptions {
  int max_convs = 3;
  int min_downsamples = 1;
  int max_downsamples = 2;
  int min_size = 16;
  int max_size = 32;
  int max_channels = 3;
  PatchReducer reducer = PatchReducer::kUniformTopLeft;
  // All downsample steps adaptive when true, otherwise a random trailing
  // subset of at least one.
  bool all_adaptive = true;
};

// A random stack of 1..max_convs convs and the requested number of factor-2
// downsample steps with random weights, plus a matching random input.
struct ToyCase {
  NetworkSpec spec;
  DenseTensor input;
};
ToyCase random_toy_case(Rng& rng, const ToySpecOptions& options = {});

enum class MaskKind {
  kBernoulli,
  kCheckerboard,
  kSingleRetained,
  kOnes,
  kZeros,
  kInvertedBernoulli,
};

std::string_view mask_kind_name(MaskKind kind);

// Restricts the bits of every stage after the first to patches that are
// eligible given the earlier stages. The result runs without diagnostics.
std::vector<DownsampleMask> effective_mask_sequence(
    const NetworkSpec& spec, int height, int width,
    std::vector<DownsampleMask> masks);

// One mask per adaptive stage for an input of height x width, already
// restricted to eligible patches.
std::vector<DownsampleMask> sample_masks(const NetworkSpec& spec, int height,
                                         int width, MaskKind kind, Rng& rng);

// Stage-wise complement: the first mask is inverted, later raw masks are
// inverted and then restricted to eligible patches.
std::vector<DownsampleMask> invert_mask_sequence(
    const NetworkSpec& spec, int height, int width,
    const std::vector<DownsampleMask>& masks);

using MaskSampler = std::function<std::vector<DownsampleMask>(
    const NetworkSpec& spec, int height, int width, int trial, Rng& rng)>;

// Cycles through `kinds` by trial index.
MaskSampler cycling_sampler(std::vector<MaskKind> kinds);

// All-ones masks against run_regular (compared on the coarse lattice) and
// all-zeros masks against run_dilated(keep_last = n_adaptive) (compared
// everywhere), at every item boundary.
Report check_endpoint_equivalences(const NetworkSpec& spec,
                                   const DenseTensor& input,
                                   double tol = kDefaultTolerance);

struct Guarantee2Options {
  int trials = 100;
  std::uint64_t seed = 0;
  double tol = kDefaultTolerance;
  // Draw fresh weights and a fresh input for every trial.
  bool randomize = false;
  // Negative control: the adaptive run uses weights shifted by +0.25.
  bool perturb_coarse = false;
  std::string name = "guarantee2";
};

// For every trial, samples masks and compares each adaptive item output on
// the coarse lattice of its boundary against run_regular. Also checks the
// quadtree invariants of every adaptive output. Requires uniform-top-left
// reducers in the adaptive region.
Report check_guarantee2(const NetworkSpec& spec, const DenseTensor& input,
                        const MaskSampler& sampler,
                        const Guarantee2Options& options);

// Impulse-sweep supports of the adaptive run under each mask set against
// the regular run, at every boundary and every coarse-lattice position.
// max_dev counts differing (output, input) pairs.
Report check_guarantee1(const NetworkSpec& spec, int height, int width,
                        const std::vector<std::vector<DownsampleMask>>& masks,
                        const std::string& name = "guarantee1");

// Supports of the adaptive run with all-zeros masks against the dilated
// run, at every boundary and every position.
Report check_guarantee1_dilated(const NetworkSpec& spec, int height, int width,
                                const std::string& name = "guarantee1_dilated");

// Level-field invariants: levels within the stage count, blocks aligned and
// uniform, finite active values.
Report check_quadtree(const MultiResMap& mr,
                      const std::string& name = "quadtree");

}  // namespace mrconv

#endif  // MRCONV_VERIFY_H_
