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

// Acceptance suite. Prints one line per criterion:
//
//   ACCEPT <criterion> PASS|FAIL <detail>
//
// and exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "mrconv/diagnostics.h"
#include "mrconv/io.h"
#include "mrconv/masks.h"
#include "mrconv/multires.h"
#include "mrconv/network.h"
#include "mrconv/verify.h"
#include "reference.h"

namespace mrconv {
namespace {

using testing::ref_conv;
using testing::slice_stride;

struct Outcome {
  bool passed = true;
  std::string detail;

  void fail(const std::string& why) {
    if (passed) detail = why;
    passed = false;
  }
};

int g_failures = 0;

void report(const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.passed = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.passed) ++g_failures;
  std::printf("ACCEPT %s %s %s\n", name, o.passed ? "PASS" : "FAIL",
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Double-precision oracles built only from the direct convolution formula
// and strided slicing.
DenseTensor oracle_regular(const NetworkSpec& spec, const DenseTensor& in) {
  DenseTensor x = in;
  for (const auto& item : spec.items) {
    if (const auto* c = std::get_if<ConvLayer>(&item)) {
      x = ref_conv(x, *c, 1);
    } else {
      x = slice_stride(x, std::get<DownsampleStep>(item).factor);
    }
  }
  return x;
}

DenseTensor oracle_dilated(const NetworkSpec& spec, const DenseTensor& in) {
  const std::size_t first = spec.first_adaptive_item();
  DenseTensor x = in;
  int dil = 1;
  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    const auto& item = spec.items[i];
    if (const auto* c = std::get_if<ConvLayer>(&item)) {
      x = ref_conv(x, *c, dil);
    } else if (i < first) {
      x = slice_stride(x, std::get<DownsampleStep>(item).factor);
    } else {
      dil *= std::get<DownsampleStep>(item).factor;
    }
  }
  return x;
}

std::vector<DownsampleMask> filled_masks(const NetworkSpec& spec, int h, int w,
                                         std::uint8_t fill) {
  std::vector<DownsampleMask> out;
  for (auto [r, c] : adaptive_mask_shapes(spec, h, w)) {
    out.emplace_back(r, c, fill);
  }
  return out;
}

InputShape shape_of(const DenseTensor& t) {
  return {t.height(), t.width(), t.channels()};
}

Outcome endpoint_regular() {
  Outcome o;
  Rng rng(1001);
  ToySpecOptions opts;
  opts.all_adaptive = false;
  double worst_oracle = 0.0;
  for (int i = 0; i < 50; ++i) {
    const ToyCase c = random_toy_case(rng, opts);
    const Report r = check_endpoint_equivalences(c.spec, c.input);
    for (const auto& chk : r.checks()) {
      if (chk.name == "endpoint_ones_regular" && !chk.passed) {
        o.fail("spec " + std::to_string(i) + ": " + chk.detail);
      }
    }
    const int h = c.input.height();
    const int w = c.input.width();
    const MultiResMap out =
        run_adaptive(c.spec, c.input, filled_masks(c.spec, h, w, 1));
    const DenseTensor regular = run_regular(c.spec, c.input);
    const int lattice = c.spec.total_stride() / c.spec.pre_adaptive_stride();
    if (!(sample_lattice(out, lattice) == regular)) {
      o.fail("spec " + std::to_string(i) + ": final output not bitwise equal");
    }
    worst_oracle = std::max(
        worst_oracle, max_abs_diff(regular, oracle_regular(c.spec, c.input)));
  }
  if (worst_oracle > 1e-4) o.fail("regular vs oracle " + fmt(worst_oracle));
  if (o.passed) {
    o.detail = "50 specs, all boundaries; oracle dev " + fmt(worst_oracle);
  }
  return o;
}

Outcome endpoint_dilated() {
  Outcome o;
  Rng rng(1002);
  ToySpecOptions opts;
  opts.all_adaptive = false;
  double worst_oracle = 0.0;
  for (int i = 0; i < 50; ++i) {
    const ToyCase c = random_toy_case(rng, opts);
    const Report r = check_endpoint_equivalences(c.spec, c.input);
    for (const auto& chk : r.checks()) {
      if (chk.name == "endpoint_zeros_dilated" && !chk.passed) {
        o.fail("spec " + std::to_string(i) + ": " + chk.detail);
      }
    }
    const int h = c.input.height();
    const int w = c.input.width();
    const MultiResMap out =
        run_adaptive(c.spec, c.input, filled_masks(c.spec, h, w, 0));
    const DenseTensor dilated = run_dilated(c.spec, c.input, c.spec.n_adaptive);
    if (!(densify(out) == dilated)) {
      o.fail("spec " + std::to_string(i) + ": final output not bitwise equal");
    }
    worst_oracle = std::max(
        worst_oracle, max_abs_diff(dilated, oracle_dilated(c.spec, c.input)));
  }
  if (worst_oracle > 1e-4) o.fail("dilated vs oracle " + fmt(worst_oracle));
  if (o.passed) {
    o.detail = "50 specs, all boundaries; oracle dev " + fmt(worst_oracle);
  }
  return o;
}

Outcome guarantee2() {
  Outcome o;
  Rng rng(1003);
  const MaskSampler sampler = cycling_sampler(
      {MaskKind::kBernoulli, MaskKind::kCheckerboard, MaskKind::kSingleRetained,
       MaskKind::kInvertedBernoulli, MaskKind::kOnes, MaskKind::kZeros});
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const ToyCase c = random_toy_case(rng);
    Guarantee2Options opts;
    opts.trials = 100;
    opts.seed = 2000 + i;
    opts.randomize = true;
    const Report r = check_guarantee2(c.spec, c.input, sampler, opts);
    for (const auto& chk : r.checks()) {
      if (!chk.passed) o.fail(chk.name + ": " + chk.detail);
      if (chk.name == "guarantee2") worst = std::max(worst, chk.max_dev);
    }
    // The same comparison must fail when the coarse path is perturbed.
    Guarantee2Options bad = opts;
    bad.trials = 3;
    bad.perturb_coarse = true;
    if (check_guarantee2(c.spec, c.input, sampler, bad).passed()) {
      o.fail("perturbed weights went unnoticed on spec " + std::to_string(i));
    }
  }
  if (o.passed) {
    o.detail = "5 specs x 100 trials, max dev " + fmt(worst) +
               "; perturbed control fails";
  }
  return o;
}

// Per-axis impulse support of a regular stack, by set propagation. Unit
// weights keep every contribution positive, so the 2-D support is the
// product of the two axis supports.
std::set<int> axis_support(const NetworkSpec& spec, int size, int pos) {
  std::vector<int> sizes = {size};
  for (const auto& item : spec.items) {
    if (const auto* d = std::get_if<DownsampleStep>(&item)) {
      sizes.push_back(sizes.back() / d->factor);
    } else {
      sizes.push_back(sizes.back());
    }
  }
  std::set<int> cur = {pos};
  for (std::size_t i = spec.items.size(); i-- > 0;) {
    std::set<int> prev;
    const int n = sizes[i];
    if (const auto* c = std::get_if<ConvLayer>(&spec.items[i])) {
      const int r = c->kernel_size / 2;
      for (int p : cur) {
        for (int t = p - r; t <= p + r; ++t) {
          if (t >= 0 && t < n) prev.insert(t);
        }
      }
    } else {
      const int d = std::get<DownsampleStep>(spec.items[i]).factor;
      for (int p : cur) prev.insert(p * d);
    }
    cur = std::move(prev);
  }
  return cur;
}

Outcome guarantee1() {
  Outcome o;
  Rng rng(1004);
  ToySpecOptions opts;
  opts.max_size = 24;
  std::size_t oracle_positions = 0;
  for (int i = 0; i < 10; ++i) {
    const ToyCase c = random_toy_case(rng, opts);
    const int h = c.input.height();
    const int w = c.input.width();
    std::vector<std::vector<DownsampleMask>> sets;
    for (int m = 0; m < 5; ++m) {
      sets.push_back(sample_masks(c.spec, h, w,
                                  m % 2 == 0 ? MaskKind::kBernoulli
                                             : MaskKind::kCheckerboard,
                                  rng));
    }
    Report r = check_guarantee1(c.spec, h, w, sets);
    r.merge(check_guarantee1_dilated(c.spec, h, w));
    for (const auto& chk : r.checks()) {
      if (!chk.passed) o.fail("spec " + std::to_string(i) + " " + chk.name +
                              ": " + chk.detail);
    }
    // Independent oracle for the final boundary on the coarse lattice.
    const int stride = c.spec.total_stride();
    const int lattice = stride / c.spec.pre_adaptive_stride();
    for (int y = 0; y < h / stride; y += 2) {
      for (int x = 0; x < w / stride; x += 3) {
        std::vector<Pixel> expected;
        const auto ys = axis_support(c.spec, h, y);
        const auto xs = axis_support(c.spec, w, x);
        for (int yy : ys) {
          for (int xx : xs) expected.push_back({yy, xx});
        }
        if (receptive_field_support(c.spec, h, w, VariantSpec::regular(),
                                    {y, x}) != expected) {
          o.fail("regular support differs from oracle at (" +
                 std::to_string(y) + "," + std::to_string(x) + ")");
        }
        if (receptive_field_support(c.spec, h, w, VariantSpec::adaptive(sets[0]),
                                    {y * lattice, x * lattice}) != expected) {
          o.fail("adaptive support differs from oracle at (" +
                 std::to_string(y) + "," + std::to_string(x) + ")");
        }
        ++oracle_positions;
      }
    }
  }
  if (o.passed) {
    o.detail = "10 specs x 5 mask sets, all boundaries; " +
               std::to_string(oracle_positions) + " positions vs set oracle";
  }
  return o;
}

// Independent #MA: per conv, produced elements times K^2 Cin Cout, where the
// element counts come from mask bit counts alone.
std::uint64_t analytic_cost(const NetworkSpec& spec, int h, int w,
                            Variant variant,
                            const std::vector<DownsampleMask>& eff_masks) {
  const std::size_t first = spec.first_adaptive_item();
  std::uint64_t rows = h;
  std::uint64_t cols = w;
  std::uint64_t active = rows * cols;
  int stage = 0;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    if (const auto* c = std::get_if<ConvLayer>(&spec.items[i])) {
      total += active * c->kernel_size * c->kernel_size * c->in_channels *
               c->out_channels;
      continue;
    }
    const std::uint64_t d = std::get<DownsampleStep>(spec.items[i]).factor;
    if (i < first || variant == Variant::kRegular) {
      rows /= d;
      cols /= d;
      active = rows * cols;
    } else if (variant == Variant::kAdaptive) {
      // Each downsampled patch collapses d^2 active elements into one.
      active -= (d * d - 1) * eff_masks[stage++].count_ones();
    }
  }
  return total;
}

DownsampleMask bernoulli(int rows, int cols, double p, Rng& rng) {
  std::bernoulli_distribution coin(p);
  DownsampleMask m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m.set(i, j, coin(rng));
  }
  return m;
}

Outcome cost_sandwich() {
  Outcome o;
  Rng rng(1005);
  int flips = 0;
  for (int t = 0; t < 100; ++t) {
    Rng spec_rng(3000 + t / 10);
    const ToyCase c = random_toy_case(spec_rng);
    const int h = c.input.height();
    const int w = c.input.width();
    const InputShape shape = shape_of(c.input);
    const auto cost = [&](const std::vector<DownsampleMask>& m) {
      return cost_report(c.spec, shape, VariantSpec::adaptive(m))
          .total_multiply_adds;
    };
    const auto regular =
        cost_report(c.spec, shape, VariantSpec::regular()).total_multiply_adds;
    const auto dilated =
        cost_report(c.spec, shape, VariantSpec::dilated()).total_multiply_adds;
    if (cost(filled_masks(c.spec, h, w, 1)) != regular) {
      o.fail("all-ones cost != regular");
    }
    if (cost(filled_masks(c.spec, h, w, 0)) != dilated) {
      o.fail("all-zeros cost != dilated");
    }
    const auto masks = sample_masks(c.spec, h, w, MaskKind::kBernoulli, rng);
    const auto base = cost(masks);
    if (base < regular || base > dilated) {
      o.fail("trial " + std::to_string(t) + ": cost outside [regular, dilated]");
    }
    // Flip one retained first-stage patch to downsampled.
    std::vector<Pixel> zeros;
    for (int i = 0; i < masks[0].rows(); ++i) {
      for (int j = 0; j < masks[0].cols(); ++j) {
        if (!masks[0].at(i, j)) zeros.push_back({i, j});
      }
    }
    if (zeros.empty()) continue;
    const Pixel p =
        zeros[std::uniform_int_distribution<std::size_t>(0, zeros.size() - 1)(
            rng)];
    auto flipped = masks;
    flipped[0].set(p.y, p.x, true);
    flipped = effective_mask_sequence(c.spec, h, w, flipped);
    const bool has_conv_after = std::any_of(
        c.spec.items.begin() + c.spec.first_adaptive_item(), c.spec.items.end(),
        [](const NetworkItem& it) { return std::holds_alternative<ConvLayer>(it); });
    if (has_conv_after && !(cost(flipped) < base)) {
      o.fail("trial " + std::to_string(t) + ": flipping a retained patch did "
             "not reduce cost");
    }
    ++flips;
  }
  if (o.passed) {
    o.detail = "100 masks within [regular, dilated]; " + std::to_string(flips) +
               " single flips strictly cheaper; endpoints exact";
  }
  return o;
}

Outcome cost_analytic() {
  Outcome o;
  Rng rng(1006);
  ToySpecOptions opts;
  opts.all_adaptive = false;
  opts.max_channels = 8;
  for (int t = 0; t < 100; ++t) {
    const ToyCase c = random_toy_case(rng, opts);
    const int h = c.input.height();
    const int w = c.input.width();
    const InputShape shape = shape_of(c.input);
    const auto masks = sample_masks(c.spec, h, w, MaskKind::kBernoulli, rng);
    const std::uint64_t got[3] = {
        cost_report(c.spec, shape, VariantSpec::regular()).total_multiply_adds,
        cost_report(c.spec, shape, VariantSpec::dilated()).total_multiply_adds,
        cost_report(c.spec, shape, VariantSpec::adaptive(masks))
            .total_multiply_adds};
    const std::uint64_t want[3] = {
        analytic_cost(c.spec, h, w, Variant::kRegular, masks),
        analytic_cost(c.spec, h, w, Variant::kDilated, masks),
        analytic_cost(c.spec, h, w, Variant::kAdaptive, masks)};
    for (int v = 0; v < 3; ++v) {
      if (got[v] != want[v]) {
        o.fail("trial " + std::to_string(t) + " variant " + std::to_string(v) +
               ": " + std::to_string(got[v]) + " != " + std::to_string(want[v]));
      }
    }
  }
  // Toy stack: conv 3x3 8->8, adaptive d=2, conv 3x3 8->8 on 32x32 with
  // half the 16x16 patches downsampled: (128 * 4 + 128) * 9 * 64.
  NetworkSpec toy;
  toy.items = {ConvLayer::zeros(3, 8, 8), DownsampleStep{},
               ConvLayer::zeros(3, 8, 8)};
  toy.n_adaptive = 1;
  DownsampleMask half(16, 16);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) half.set(i, j, (i + j) % 2 == 0);
  }
  const CostReport r =
      cost_report(toy, {32, 32, 8}, VariantSpec::adaptive({half}));
  if (r.items[2].multiply_adds != 368640u) {
    o.fail("toy post-stage conv: " + std::to_string(r.items[2].multiply_adds));
  }
  const double ratio =
      static_cast<double>(r.total_multiply_adds) /
      cost_report(toy, {32, 32, 8}, VariantSpec::regular()).total_multiply_adds;
  if (o.passed) {
    o.detail = "100 specs x 3 variants match mask-count formula; toy half "
               "mask post-stage 368640, ratio to regular " + fmt(ratio);
  }
  return o;
}

// Independent level-field check: every block must be aligned, uniform and
// within the stage count.
bool oracle_quadtree_ok(const MultiResMap& mr) {
  const int h = mr.base_height();
  const int w = mr.base_width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = mr.level(y, x);
      if (l > mr.stages()) return false;
      const int b = int_pow(mr.factor(), l);
      const int y0 = y / b * b;
      const int x0 = x / b * b;
      if (y0 + b > h || x0 + b > w) return false;
      for (int yy = y0; yy < y0 + b; ++yy) {
        for (int xx = x0; xx < x0 + b; ++xx) {
          if (mr.level(yy, xx) != l) return false;
        }
      }
    }
  }
  return true;
}

Outcome quadtree() {
  Outcome o;
  Rng rng(1007);
  ScopedWarningHandler quiet([](const std::string&) {});
  int mutated_invalid = 0;
  int caught = 0;
  for (int t = 0; t < 1000; ++t) {
    const double p1 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double p2 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const MultiResMap once = adaptive_downsample(
        random_input({16, 16, 1}, rng), bernoulli(8, 8, p1, rng), 2,
        PatchReducer::kUniformTopLeft);
    const MultiResMap twice = adaptive_downsample_stage(
        once, bernoulli(4, 4, p2, rng), PatchReducer::kUniformTopLeft);
    if (!quadtree_violations(twice).empty() || !oracle_quadtree_ok(twice)) {
      o.fail("valid sequence " + std::to_string(t) + " flagged");
    }
    // Negative control: change one level.
    std::vector<std::uint8_t> levels(twice.levels().begin(),
                                     twice.levels().end());
    const std::size_t at =
        std::uniform_int_distribution<std::size_t>(0, levels.size() - 1)(rng);
    levels[at] = static_cast<std::uint8_t>(
        (levels[at] + 1 + std::uniform_int_distribution<int>(0, 1)(rng)) % 3);
    const MultiResMap bad(16, 16, 1, 2, 2, levels,
                          std::vector<float>(256, 0.0f));
    const bool lib_ok = quadtree_violations(bad).empty();
    const bool oracle_ok = oracle_quadtree_ok(bad);
    if (lib_ok != oracle_ok) {
      o.fail("mutation " + std::to_string(t) + ": library and oracle disagree");
    }
    if (!oracle_ok) {
      ++mutated_invalid;
      if (!lib_ok) ++caught;
    }
  }
  if (mutated_invalid < 500) o.fail("too few invalid mutations generated");
  if (o.passed) {
    o.detail = "1000 two-stage sequences valid; " + std::to_string(caught) +
               "/" + std::to_string(mutated_invalid) +
               " invalid mutations caught";
  }
  return o;
}

Outcome edge_golden() {
  Outcome o;
  const std::string data = MRCONV_TEST_DATA;
  const DenseTensor gray = read_image(data + "/step64.pgm");
  const std::pair<double, const char*> cases[] = {
      {0.95, "edge_t095.msk"}, {0.35, "edge_t035.msk"}, {0.15, "edge_t015.msk"}};
  std::vector<DownsampleMask> masks;
  std::string counts;
  for (const auto& [t, file] : cases) {
    const DownsampleMask got = edge_mask(gray, t, 11, 2);
    const DownsampleMask want = read_mask(data + "/" + file);
    if (!(got == want)) o.fail(std::string("mismatch with ") + file);
    counts += (counts.empty() ? "" : "/") + std::to_string(got.count_ones());
    masks.push_back(got);
  }
  // Lower thresholds may only retain more.
  for (std::size_t k = 1; k < masks.size(); ++k) {
    for (int i = 0; i < masks[k].rows(); ++i) {
      for (int j = 0; j < masks[k].cols(); ++j) {
        if (masks[k].at(i, j) && !masks[k - 1].at(i, j)) {
          o.fail("masks not nested");
        }
      }
    }
  }
  if (masks[0] != DownsampleMask::ones(32, 32)) {
    o.fail("threshold 0.95 should downsample everywhere");
  }
  if (o.passed) {
    o.detail = "thresholds 0.95/0.35/0.15 downsample " + counts +
               " of 1024 patches, nested, golden files match";
  }
  return o;
}

Outcome inverted_masks() {
  Outcome o;
  Rng rng(1008);
  int differing = 0;
  int equal = 0;
  for (int t = 0; t < 50; ++t) {
    const ToyCase c = random_toy_case(rng);
    const int h = c.input.height();
    const int w = c.input.width();
    const InputShape shape = shape_of(c.input);
    const auto masks = sample_masks(c.spec, h, w, MaskKind::kBernoulli, rng);
    const auto inverted = invert_mask_sequence(c.spec, h, w, masks);
    const auto a = cost_report(c.spec, shape, VariantSpec::adaptive(masks));
    const auto b = cost_report(c.spec, shape, VariantSpec::adaptive(inverted));
    // Stage s is read by a conv iff some conv follows its downsample item.
    std::vector<std::size_t> stage_items;
    for (std::size_t i = c.spec.first_adaptive_item(); i < c.spec.items.size();
         ++i) {
      if (std::holds_alternative<DownsampleStep>(c.spec.items[i])) {
        stage_items.push_back(i);
      }
    }
    bool counts_differ = false;
    for (std::size_t s = 0; s < a.stages.size(); ++s) {
      const bool read_by_conv = std::any_of(
          c.spec.items.begin() + stage_items[s] + 1, c.spec.items.end(),
          [](const NetworkItem& it) {
            return std::holds_alternative<ConvLayer>(it);
          });
      counts_differ |= read_by_conv && a.stages[s].active_elements !=
                                           b.stages[s].active_elements;
    }
    const bool cost_differs = a.total_multiply_adds != b.total_multiply_adds;
    if (counts_differ != cost_differs) {
      o.fail("trial " + std::to_string(t) +
             ": #MA change does not follow active counts");
    }
    (cost_differs ? differing : equal) += 1;
    // The inverted masks must keep the coarse lattice exact.
    Guarantee2Options g2;
    g2.trials = 1;
    g2.name = "guarantee2_inverted";
    const auto fixed = [&](const NetworkSpec&, int, int, int, Rng&) {
      return inverted;
    };
    const Report r = check_guarantee2(c.spec, c.input, fixed, g2);
    if (!r.passed()) o.fail("trial " + std::to_string(t) + ": " + r.to_text());
  }
  if (o.passed) {
    o.detail = "50 inverted pairs: " + std::to_string(differing) +
               " with different #MA, " + std::to_string(equal) +
               " equal (no conv reads a differing count); coarse lattice exact";
  }
  return o;
}

}  // namespace
}  // namespace mrconv

int main() {
  using namespace mrconv;
  report("endpoint_all_ones_equals_regular", endpoint_regular);
  report("endpoint_all_zeros_equals_dilated", endpoint_dilated);
  report("guarantee2_coarse_lattice_exact", guarantee2);
  report("guarantee1_receptive_fields", guarantee1);
  report("cost_sandwich_and_monotone", cost_sandwich);
  report("cost_matches_analytic_count", cost_analytic);
  report("quadtree_invariants", quadtree);
  report("edge_mask_golden", edge_golden);
  report("inverted_mask_robustness", inverted_masks);
  std::printf("ACCEPTANCE %s (%d failure(s))\n",
              g_failures == 0 ? "PASS" : "FAIL", g_failures);
  return g_failures == 0 ? 0 : 1;
}
