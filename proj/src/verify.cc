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

#include "mrconv/verify.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace mrconv {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// NaN-aware running maximum: any NaN makes the result NaN.
void fold_max(double& acc, double v) {
  if (std::isnan(acc)) return;
  if (std::isnan(v) || v > acc) acc = v;
}

bool within(double dev, double tol) { return dev <= tol; }

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string format_dev(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Regular-grid tensor vs the lattice of stride `stride` of a multires
// output.
double lattice_deviation(const MultiResMap& mr, int stride,
                         const DenseTensor& reference) {
  if (mr.base_height() != reference.height() * stride ||
      mr.base_width() != reference.width() * stride ||
      mr.channels() != reference.channels()) {
    return kInf;
  }
  return max_abs_diff(sample_lattice(mr, stride), reference);
}

double dense_deviation(const DenseTensor& a, const DenseTensor& b) {
  if (!a.same_shape(b)) return kInf;
  return max_abs_diff(a, b);
}

bool adaptive_region_uniform(const NetworkSpec& spec) {
  for (std::size_t i = spec.first_adaptive_item(); i < spec.items.size();
       ++i) {
    const auto* d = std::get_if<DownsampleStep>(&spec.items[i]);
    if (d != nullptr && d->reducer != PatchReducer::kUniformTopLeft) {
      return false;
    }
  }
  return true;
}

NetworkSpec perturbed(const NetworkSpec& spec) {
  NetworkSpec out = spec;
  const std::size_t first = spec.first_adaptive_item();
  bool touched = false;
  for (std::size_t i = first; i < out.items.size(); ++i) {
    if (auto* c = std::get_if<ConvLayer>(&out.items[i])) {
      for (float& w : c->weights) w += 0.25f;
      touched = true;
    }
  }
  if (!touched) {
    for (auto& item : out.items) {
      if (auto* c = std::get_if<ConvLayer>(&item)) {
        for (float& w : c->weights) w += 0.25f;
      }
    }
  }
  return out;
}

DownsampleMask raw_masks_of(MaskKind kind, int rows, int cols, bool first,
                            Rng& rng) {
  switch (kind) {
    case MaskKind::kOnes:
      return DownsampleMask::ones(rows, cols);
    case MaskKind::kZeros:
      return DownsampleMask::zeros(rows, cols);
    case MaskKind::kCheckerboard: {
      const int phase = std::uniform_int_distribution<int>(0, 1)(rng);
      DownsampleMask m(rows, cols);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m.set(i, j, (i + j + phase) % 2 == 1);
      }
      return m;
    }
    case MaskKind::kSingleRetained: {
      DownsampleMask m = DownsampleMask::ones(rows, cols);
      if (first) {
        m.set(std::uniform_int_distribution<int>(0, rows - 1)(rng),
              std::uniform_int_distribution<int>(0, cols - 1)(rng), false);
      }
      return m;
    }
    case MaskKind::kBernoulli:
    case MaskKind::kInvertedBernoulli: {
      const double p = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
      std::bernoulli_distribution coin(p);
      DownsampleMask m(rows, cols);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m.set(i, j, coin(rng));
      }
      return m;
    }
  }
  return {};
}

}  // namespace

void Report::merge(const Report& other) {
  checks_.insert(checks_.end(), other.checks_.begin(), other.checks_.end());
}

bool Report::passed() const { return failures() == 0; }

std::size_t Report::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks_.begin(), checks_.end(),
                    [](const CheckResult& c) { return !c.passed; }));
}

std::string Report::to_text() const {
  std::string out;
  for (const auto& c : checks_) {
    out += "CHECK " + c.name + (c.passed ? " pass" : " fail") +
           " max_dev=" + format_dev(c.max_dev) +
           " detail=" + one_line(c.detail) + "\n";
  }
  return out;
}

std::string Report::to_json() const {
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : checks_) {
    nlohmann::ordered_json entry;
    entry["name"] = c.name;
    entry["passed"] = c.passed;
    if (std::isfinite(c.max_dev)) {
      entry["max_dev"] = c.max_dev;
    } else {
      entry["max_dev"] = format_dev(c.max_dev);
    }
    entry["detail"] = c.detail;
    checks.push_back(std::move(entry));
  }
  nlohmann::ordered_json doc;
  doc["passed"] = passed();
  doc["failures"] = failures();
  doc["checks"] = std::move(checks);
  return doc.dump(2) + "\n";
}

void randomize_weights(NetworkSpec& spec, Rng& rng) {
  for (auto& item : spec.items) {
    auto* c = std::get_if<ConvLayer>(&item);
    if (c == nullptr) continue;
    const double scale = 1.0 / (c->kernel_size * c->kernel_size);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (float& w : c->weights) w = static_cast<float>(u(rng));
    for (float& b : c->bias) b = static_cast<float>(u(rng));
  }
}

DenseTensor random_input(const InputShape& shape, Rng& rng) {
  DenseTensor t(shape.height, shape.width, shape.channels);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (float& v : t.data()) v = static_cast<float>(u(rng));
  return t;
}

ToyCase random_toy_case(Rng& rng, const ToySpecOptions& options) {
  const auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  const int downs = pick(options.min_downsamples, options.max_downsamples);
  const int convs = pick(1, options.max_convs);
  const int stride = 1 << downs;
  const auto pick_size = [&] {
    const int lo = (options.min_size + stride - 1) / stride;
    const int hi = options.max_size / stride;
    return pick(lo, hi) * stride;
  };

  std::vector<bool> is_down(convs + downs, false);
  std::fill(is_down.begin(), is_down.begin() + downs, true);
  std::shuffle(is_down.begin(), is_down.end(), rng);

  ToyCase toy;
  toy.spec.name = "toy";
  const InputShape shape{pick_size(), pick_size(),
                         pick(1, options.max_channels)};
  int channels = shape.channels;
  static constexpr int kKernelSizes[] = {1, 3, 3, 3, 5};
  for (bool down : is_down) {
    if (down) {
      toy.spec.items.emplace_back(DownsampleStep{2, options.reducer});
    } else {
      const int k = kKernelSizes[pick(0, 4)];
      const int cout = pick(1, options.max_channels);
      toy.spec.items.emplace_back(
          ConvLayer::zeros(k, channels, cout, pick(0, 1) == 1, pick(0, 1) == 1));
      channels = cout;
    }
  }
  toy.spec.n_adaptive = options.all_adaptive ? downs : pick(1, downs);
  toy.spec.input = shape;
  randomize_weights(toy.spec, rng);
  toy.input = random_input(shape, rng);
  return toy;
}

std::string_view mask_kind_name(MaskKind kind) {
  switch (kind) {
    case MaskKind::kBernoulli:
      return "bernoulli";
    case MaskKind::kCheckerboard:
      return "checkerboard";
    case MaskKind::kSingleRetained:
      return "single-retained";
    case MaskKind::kOnes:
      return "ones";
    case MaskKind::kZeros:
      return "zeros";
    case MaskKind::kInvertedBernoulli:
      return "inverted-bernoulli";
  }
  return "?";
}

std::vector<DownsampleMask> effective_mask_sequence(
    const NetworkSpec& spec, int height, int width,
    std::vector<DownsampleMask> masks) {
  if (masks.empty()) return masks;
  const int pre = spec.pre_adaptive_stride();
  const int d = spec.adaptive_factor();
  MultiResMap levels =
      adaptive_downsample(DenseTensor(height / pre, width / pre, 1), masks[0],
                          d, PatchReducer::kUniformTopLeft);
  for (std::size_t s = 1; s < masks.size(); ++s) {
    masks[s] = effective_mask(levels, masks[s]);
    levels = adaptive_downsample_stage(levels, masks[s],
                                       PatchReducer::kUniformTopLeft);
  }
  return masks;
}

std::vector<DownsampleMask> sample_masks(const NetworkSpec& spec, int height,
                                         int width, MaskKind kind, Rng& rng) {
  const auto shapes = adaptive_mask_shapes(spec, height, width);
  std::vector<DownsampleMask> raw;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    raw.push_back(
        raw_masks_of(kind, shapes[s].first, shapes[s].second, s == 0, rng));
  }
  if (kind == MaskKind::kInvertedBernoulli) {
    return invert_mask_sequence(spec, height, width, raw);
  }
  return effective_mask_sequence(spec, height, width, std::move(raw));
}

std::vector<DownsampleMask> invert_mask_sequence(
    const NetworkSpec& spec, int height, int width,
    const std::vector<DownsampleMask>& masks) {
  std::vector<DownsampleMask> inverted;
  inverted.reserve(masks.size());
  for (const auto& m : masks) inverted.push_back(m.inverted());
  return effective_mask_sequence(spec, height, width, std::move(inverted));
}

MaskSampler cycling_sampler(std::vector<MaskKind> kinds) {
  if (kinds.empty()) throw std::invalid_argument("no mask kinds given");
  return [kinds = std::move(kinds)](const NetworkSpec& spec, int height,
                                    int width, int trial, Rng& rng) {
    return sample_masks(spec, height, width,
                        kinds[static_cast<std::size_t>(trial) % kinds.size()],
                        rng);
  };
}

Report check_endpoint_equivalences(const NetworkSpec& spec,
                                   const DenseTensor& input, double tol) {
  Report report;
  {
    CheckResult r{"endpoint_ones_regular", false, 0.0, ""};
    try {
      std::vector<DenseTensor> regular(spec.items.size());
      run_regular(spec, input, [&](std::size_t i, const DenseTensor* t,
                                   const MultiResMap*) { regular[i] = *t; });
      const auto shapes =
          adaptive_mask_shapes(spec, input.height(), input.width());
      std::vector<DownsampleMask> ones;
      for (const auto& [rows, cols] : shapes) {
        ones.push_back(DownsampleMask::ones(rows, cols));
      }
      int boundaries = 0;
      run_adaptive(spec, input, ones,
                   [&](std::size_t i, const DenseTensor* t,
                       const MultiResMap* m) {
                     const double dev =
                         t != nullptr
                             ? dense_deviation(*t, regular[i])
                             : lattice_deviation(
                                   *m, int_pow(m->factor(), m->stages()),
                                   regular[i]);
                     fold_max(r.max_dev, dev);
                     ++boundaries;
                   });
      r.passed = within(r.max_dev, tol);
      r.detail = "boundaries=" + std::to_string(boundaries) +
                 " stages=" + std::to_string(spec.n_adaptive);
    } catch (const std::exception& e) {
      r.max_dev = kInf;
      r.detail = e.what();
    }
    report.add(std::move(r));
  }
  {
    CheckResult r{"endpoint_zeros_dilated", false, 0.0, ""};
    try {
      std::vector<DenseTensor> dilated(spec.items.size());
      run_dilated(spec, input, spec.n_adaptive,
                  [&](std::size_t i, const DenseTensor* t,
                      const MultiResMap*) { dilated[i] = *t; });
      const auto shapes =
          adaptive_mask_shapes(spec, input.height(), input.width());
      std::vector<DownsampleMask> zeros;
      for (const auto& [rows, cols] : shapes) {
        zeros.push_back(DownsampleMask::zeros(rows, cols));
      }
      int boundaries = 0;
      run_adaptive(spec, input, zeros,
                   [&](std::size_t i, const DenseTensor* t,
                       const MultiResMap* m) {
                     const double dev =
                         t != nullptr ? dense_deviation(*t, dilated[i])
                                      : dense_deviation(densify(*m), dilated[i]);
                     fold_max(r.max_dev, dev);
                     ++boundaries;
                   });
      r.passed = within(r.max_dev, tol);
      r.detail = "boundaries=" + std::to_string(boundaries) +
                 " keep_last=" + std::to_string(spec.n_adaptive);
    } catch (const std::exception& e) {
      r.max_dev = kInf;
      r.detail = e.what();
    }
    report.add(std::move(r));
  }
  return report;
}

Report check_guarantee2(const NetworkSpec& spec, const DenseTensor& input,
                        const MaskSampler& sampler,
                        const Guarantee2Options& options) {
  Report report;
  CheckResult values{options.name, false, 0.0, ""};
  CheckResult tree{options.name + "_quadtree", true, 0.0, ""};
  if (!adaptive_region_uniform(spec)) {
    values.max_dev = kInf;
    values.detail = "adaptive downsample steps must use the uniform reducer";
    tree.passed = false;
    tree.detail = values.detail;
    report.add(std::move(values));
    report.add(std::move(tree));
    return report;
  }
  Rng rng(options.seed);
  NetworkSpec cur = spec;
  DenseTensor x = input;
  int failed_trials = 0;
  std::string first_failure;
  std::uint64_t positions = 0;
  std::size_t violations = 0;
  for (int trial = 0; trial < options.trials; ++trial) {
    double trial_dev = 0.0;
    std::string trial_error;
    try {
      if (options.randomize) {
        randomize_weights(cur, rng);
        x = random_input({x.height(), x.width(), x.channels()}, rng);
      }
      const auto masks = sampler(cur, x.height(), x.width(), trial, rng);
      std::vector<DenseTensor> regular(cur.items.size());
      run_regular(cur, x, [&](std::size_t i, const DenseTensor* t,
                              const MultiResMap*) { regular[i] = *t; });
      const NetworkSpec adaptive_spec =
          options.perturb_coarse ? perturbed(cur) : cur;
      run_adaptive(
          adaptive_spec, x, masks,
          [&](std::size_t i, const DenseTensor* t, const MultiResMap* m) {
            if (t != nullptr) {
              fold_max(trial_dev, dense_deviation(*t, regular[i]));
              return;
            }
            const int stride = int_pow(m->factor(), m->stages());
            fold_max(trial_dev, lattice_deviation(*m, stride, regular[i]));
            positions += static_cast<std::uint64_t>(regular[i].height()) *
                         regular[i].width();
            const auto v = quadtree_violations(*m, 4);
            if (!v.empty()) {
              if (tree.detail.empty()) {
                tree.detail = "trial " + std::to_string(trial) + ": " + v[0];
              }
              violations += v.size();
            }
          });
    } catch (const std::exception& e) {
      trial_dev = kInf;
      trial_error = e.what();
    }
    fold_max(values.max_dev, trial_dev);
    if (!within(trial_dev, options.tol)) {
      if (failed_trials++ == 0) {
        first_failure = "first failing trial " + std::to_string(trial) +
                        " dev=" + format_dev(trial_dev);
        if (!trial_error.empty()) first_failure += " (" + trial_error + ")";
      }
    }
  }
  values.passed = failed_trials == 0 && options.trials > 0;
  values.detail = "trials=" + std::to_string(options.trials) +
                  " failed=" + std::to_string(failed_trials) +
                  " lattice_positions=" + std::to_string(positions);
  if (!first_failure.empty()) values.detail += " " + first_failure;
  tree.passed = violations == 0;
  tree.max_dev = static_cast<double>(violations);
  if (tree.detail.empty()) tree.detail = "no violations";
  report.add(std::move(values));
  report.add(std::move(tree));
  return report;
}

Report check_guarantee1(const NetworkSpec& spec, int height, int width,
                        const std::vector<std::vector<DownsampleMask>>& masks,
                        const std::string& name) {
  Report report;
  CheckResult r{name, false, 0.0, ""};
  try {
    const auto regular =
        receptive_field_maps(spec, height, width, VariantSpec::regular());
    std::uint64_t mismatched = 0;
    std::uint64_t positions = 0;
    for (std::size_t k = 0; k < masks.size(); ++k) {
      const auto adaptive = receptive_field_maps(
          spec, height, width, VariantSpec::adaptive(masks[k]));
      for (std::size_t b = 0; b < regular.size(); ++b) {
        const ReceptiveFields& reg = regular[b];
        const ReceptiveFields& ada = adaptive[b];
        const int ratio = ada.out_height() / reg.out_height();
        if (ratio * reg.out_height() != ada.out_height() ||
            ratio * reg.out_width() != ada.out_width()) {
          throw std::logic_error("boundary " + std::to_string(b) +
                                 " grids are not nested");
        }
        for (int y = 0; y < reg.out_height(); ++y) {
          for (int x = 0; x < reg.out_width(); ++x) {
            const Pixel p{y, x};
            const Pixel q{y * ratio, x * ratio};
            ++positions;
            std::uint64_t diff = 0;
            if (!ada.defined(q)) {
              diff = static_cast<std::uint64_t>(height) * width;
            } else {
              for (int iy = 0; iy < height; ++iy) {
                for (int ix = 0; ix < width; ++ix) {
                  if (reg.reaches(p, {iy, ix}) != ada.reaches(q, {iy, ix})) {
                    ++diff;
                  }
                }
              }
            }
            if (diff != 0 && mismatched == 0) {
              r.detail = "mask set " + std::to_string(k) + " boundary " +
                         std::to_string(b) + " position (" +
                         std::to_string(y) + "," + std::to_string(x) +
                         ") differs; ";
            }
            mismatched += diff;
          }
        }
      }
    }
    r.passed = mismatched == 0;
    r.max_dev = static_cast<double>(mismatched);
    r.detail += "mask_sets=" + std::to_string(masks.size()) +
                " boundaries=" + std::to_string(regular.size()) +
                " positions=" + std::to_string(positions);
  } catch (const std::exception& e) {
    r.max_dev = kInf;
    r.detail = e.what();
  }
  report.add(std::move(r));
  return report;
}

Report check_guarantee1_dilated(const NetworkSpec& spec, int height, int width,
                                const std::string& name) {
  Report report;
  CheckResult r{name, false, 0.0, ""};
  try {
    const auto dilated = receptive_field_maps(
        spec, height, width, VariantSpec::dilated(spec.n_adaptive));
    std::vector<DownsampleMask> zeros;
    for (const auto& [rows, cols] : adaptive_mask_shapes(spec, height, width)) {
      zeros.push_back(DownsampleMask::zeros(rows, cols));
    }
    const auto adaptive = receptive_field_maps(spec, height, width,
                                               VariantSpec::adaptive(zeros));
    std::uint64_t mismatched = 0;
    std::uint64_t positions = 0;
    for (std::size_t b = 0; b < dilated.size(); ++b) {
      const ReceptiveFields& dil = dilated[b];
      const ReceptiveFields& ada = adaptive[b];
      if (dil.out_height() != ada.out_height() ||
          dil.out_width() != ada.out_width()) {
        throw std::logic_error("boundary " + std::to_string(b) +
                               " grids differ");
      }
      for (int y = 0; y < dil.out_height(); ++y) {
        for (int x = 0; x < dil.out_width(); ++x) {
          const Pixel p{y, x};
          ++positions;
          if (!ada.defined(p)) {
            mismatched += static_cast<std::uint64_t>(height) * width;
            continue;
          }
          for (int iy = 0; iy < height; ++iy) {
            for (int ix = 0; ix < width; ++ix) {
              if (dil.reaches(p, {iy, ix}) != ada.reaches(p, {iy, ix})) {
                ++mismatched;
              }
            }
          }
        }
      }
    }
    r.passed = mismatched == 0;
    r.max_dev = static_cast<double>(mismatched);
    r.detail = "boundaries=" + std::to_string(dilated.size()) +
               " positions=" + std::to_string(positions);
  } catch (const std::exception& e) {
    r.max_dev = kInf;
    r.detail = e.what();
  }
  report.add(std::move(r));
  return report;
}

Report check_quadtree(const MultiResMap& mr, const std::string& name) {
  Report report;
  const auto violations = quadtree_violations(mr, 1u << 20);
  CheckResult r{name, violations.empty(),
                static_cast<double>(violations.size()), ""};
  if (violations.empty()) {
    r.detail = "active=" + std::to_string(mr.active_count()) +
               " stages=" + std::to_string(mr.stages());
  } else {
    r.detail = std::to_string(violations.size()) +
               " violation(s), first: " + violations.front();
  }
  report.add(std::move(r));
  return report;
}

}  // namespace mrconv
