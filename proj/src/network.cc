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

#include "mrconv/network.h"

#include <algorithm>
#include <stdexcept>

#include "mrconv/diagnostics.h"
#include "mrconv/sparse_conv.h"

namespace mrconv {
namespace {

const ConvLayer* as_conv(const NetworkItem& item) {
  return std::get_if<ConvLayer>(&item);
}

const DownsampleStep* as_down(const NetworkItem& item) {
  return std::get_if<DownsampleStep>(&item);
}

std::string conv_label(const ConvLayer& c) {
  return "conv" + std::to_string(c.kernel_size) + "x" +
         std::to_string(c.kernel_size) + " " + std::to_string(c.in_channels) +
         "->" + std::to_string(c.out_channels);
}

std::string down_label(const DownsampleStep& d) {
  return "down " + std::to_string(d.factor) + " " +
         std::string(reducer_name(d.reducer));
}

std::uint64_t conv_macs_per_element(const ConvLayer& c) {
  return static_cast<std::uint64_t>(c.kernel_size) * c.kernel_size *
         c.in_channels * c.out_channels;
}

int resolve_keep_last(const NetworkSpec& spec, int keep_last) {
  const int k = keep_last < 0 ? spec.n_adaptive : keep_last;
  if (k > spec.downsample_count()) {
    throw std::invalid_argument(
        "keep_last " + std::to_string(k) + " exceeds the " +
        std::to_string(spec.downsample_count()) + " downsample steps");
  }
  return k;
}

// Item indices of the last `count` downsample steps.
std::vector<bool> trailing_downsamples(const NetworkSpec& spec, int count) {
  std::vector<bool> marked(spec.items.size(), false);
  for (std::size_t i = spec.items.size(); i-- > 0 && count > 0;) {
    if (as_down(spec.items[i])) {
      marked[i] = true;
      --count;
    }
  }
  return marked;
}

void notify(const ItemObserver& observer, std::size_t item,
            const DenseTensor& t) {
  if (observer) observer(item, &t, nullptr);
}

void notify(const ItemObserver& observer, std::size_t item,
            const MultiResMap& m) {
  if (observer) observer(item, nullptr, &m);
}

}  // namespace

int NetworkSpec::downsample_count() const {
  return static_cast<int>(std::count_if(
      items.begin(), items.end(),
      [](const NetworkItem& i) { return as_down(i) != nullptr; }));
}

int NetworkSpec::conv_count() const {
  return static_cast<int>(items.size()) - downsample_count();
}

std::size_t NetworkSpec::first_adaptive_item() const {
  if (n_adaptive <= 0) return items.size();
  const auto marked = trailing_downsamples(*this, n_adaptive);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (marked[i]) return i;
  }
  return items.size();
}

int NetworkSpec::adaptive_factor() const {
  const std::size_t first = first_adaptive_item();
  if (first == items.size()) return 2;
  return as_down(items[first])->factor;
}

int NetworkSpec::total_stride() const {
  int stride = 1;
  for (const auto& item : items) {
    if (const auto* d = as_down(item)) stride *= d->factor;
  }
  return stride;
}

int NetworkSpec::pre_adaptive_stride() const {
  int stride = 1;
  const std::size_t first = first_adaptive_item();
  for (std::size_t i = 0; i < first; ++i) {
    if (const auto* d = as_down(items[i])) stride *= d->factor;
  }
  return stride;
}

void NetworkSpec::validate() const {
  if (n_adaptive < 0 || n_adaptive > downsample_count()) {
    throw std::invalid_argument(
        "n_adaptive " + std::to_string(n_adaptive) + " outside [0, " +
        std::to_string(downsample_count()) + "]");
  }
  int channels = -1;
  const std::size_t first = first_adaptive_item();
  const int factor = adaptive_factor();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (const auto* c = as_conv(items[i])) {
      c->validate();
      if (c->dilation != 1) {
        throw std::invalid_argument("item " + std::to_string(i) +
                                    ": network convs must have dilation 1");
      }
      if (channels >= 0 && c->in_channels != channels) {
        throw std::invalid_argument(
            "item " + std::to_string(i) + ": conv expects " +
            std::to_string(c->in_channels) + " channels but receives " +
            std::to_string(channels));
      }
      channels = c->out_channels;
    } else {
      const auto* d = as_down(items[i]);
      if (d->factor < 2) {
        throw std::invalid_argument("item " + std::to_string(i) +
                                    ": downsampling factor must be >= 2");
      }
      if (i >= first && d->factor != factor) {
        throw std::invalid_argument(
            "adaptive downsample steps must share one factor");
      }
    }
  }
}

void NetworkSpec::validate_input(const InputShape& shape) const {
  validate();
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
    throw std::invalid_argument("input dimensions must be positive");
  }
  for (const auto& item : items) {
    if (const auto* c = as_conv(item)) {
      if (c->in_channels != shape.channels) {
        throw std::invalid_argument(
            "input has " + std::to_string(shape.channels) +
            " channels, first conv expects " + std::to_string(c->in_channels));
      }
      break;
    }
  }
  const int stride = total_stride();
  if (shape.height % stride != 0 || shape.width % stride != 0) {
    throw std::invalid_argument(
        "input " + std::to_string(shape.height) + "x" +
        std::to_string(shape.width) + " is not divisible by the total stride " +
        std::to_string(stride));
  }
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kRegular:
      return "regular";
    case Variant::kDilated:
      return "dilated";
    case Variant::kAdaptive:
      return "adaptive";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "regular") return Variant::kRegular;
  if (name == "dilated") return Variant::kDilated;
  if (name == "adaptive") return Variant::kAdaptive;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

DenseTensor run_regular(const NetworkSpec& spec, const DenseTensor& input,
                        const ItemObserver& observer) {
  spec.validate_input({input.height(), input.width(), input.channels()});
  DenseTensor cur = input;
  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    if (const auto* c = as_conv(spec.items[i])) {
      cur = conv2d(cur, *c);
    } else {
      const auto* d = as_down(spec.items[i]);
      cur = regular_downsample(cur, d->factor, d->reducer);
    }
    notify(observer, i, cur);
  }
  return cur;
}

DenseTensor run_dilated(const NetworkSpec& spec, const DenseTensor& input,
                        int keep_last, const ItemObserver& observer) {
  spec.validate_input({input.height(), input.width(), input.channels()});
  const int keep = resolve_keep_last(spec, keep_last);
  const auto skipped = trailing_downsamples(spec, keep);
  DenseTensor cur = input;
  int multiplier = 1;
  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    if (const auto* c = as_conv(spec.items[i])) {
      cur = conv2d(cur, *c, c->dilation * multiplier);
    } else {
      const auto* d = as_down(spec.items[i]);
      if (skipped[i]) {
        multiplier *= d->factor;
      } else {
        cur = regular_downsample(cur, d->factor, d->reducer);
      }
    }
    notify(observer, i, cur);
  }
  return cur;
}

std::vector<std::pair<int, int>> adaptive_mask_shapes(const NetworkSpec& spec,
                                                      int height, int width) {
  spec.validate();
  const int pre = spec.pre_adaptive_stride();
  const int d = spec.adaptive_factor();
  std::vector<std::pair<int, int>> shapes;
  int scale = 1;
  for (int i = 0; i < spec.n_adaptive; ++i) {
    scale *= d;
    shapes.emplace_back(height / pre / scale, width / pre / scale);
  }
  return shapes;
}

MultiResMap run_adaptive(const NetworkSpec& spec, const DenseTensor& input,
                         std::span<const DownsampleMask> masks,
                         const ItemObserver& observer) {
  spec.validate_input({input.height(), input.width(), input.channels()});
  if (masks.size() != static_cast<std::size_t>(spec.n_adaptive)) {
    throw std::invalid_argument("expected " + std::to_string(spec.n_adaptive) +
                                " masks, got " + std::to_string(masks.size()));
  }
  const std::size_t first = spec.first_adaptive_item();
  const int d = spec.adaptive_factor();

  DenseTensor dense = input;
  for (std::size_t i = 0; i < first; ++i) {
    if (const auto* c = as_conv(spec.items[i])) {
      dense = conv2d(dense, *c);
    } else {
      const auto* step = as_down(spec.items[i]);
      dense = regular_downsample(dense, step->factor, step->reducer);
    }
    notify(observer, i, dense);
  }
  if (first == spec.items.size()) {
    return MultiResMap::from_dense(dense, d);
  }

  MultiResMap mr;
  std::size_t next_mask = 0;
  for (std::size_t i = first; i < spec.items.size(); ++i) {
    if (const auto* c = as_conv(spec.items[i])) {
      mr = multires_conv(mr, *c, int_pow(d, mr.stages()));
    } else {
      const auto* step = as_down(spec.items[i]);
      const DownsampleMask& m = masks[next_mask++];
      if (i == first) {
        mr = adaptive_downsample(dense, m, d, step->reducer);
      } else {
        mr = adaptive_downsample_stage(mr, m, step->reducer);
      }
    }
    notify(observer, i, mr);
  }
  return mr;
}

CostReport cost_report(const NetworkSpec& spec, const InputShape& input,
                       const VariantSpec& variant) {
  spec.validate_input(input);
  const bool adaptive = variant.kind == Variant::kAdaptive;
  if (!adaptive && !variant.masks.empty()) {
    throw std::invalid_argument("masks are only valid for the adaptive variant");
  }
  CostReport report;
  report.variant = variant.kind;
  report.keep_last = variant.kind == Variant::kDilated
                         ? resolve_keep_last(spec, variant.keep_last)
                         : 0;
  if (adaptive &&
      variant.masks.size() != static_cast<std::size_t>(spec.n_adaptive)) {
    throw std::invalid_argument("expected " + std::to_string(spec.n_adaptive) +
                                " masks, got " +
                                std::to_string(variant.masks.size()));
  }

  const std::vector<bool> skipped =
      variant.kind == Variant::kDilated
          ? trailing_downsamples(spec, report.keep_last)
          : std::vector<bool>(spec.items.size(), false);
  const std::size_t first =
      adaptive ? spec.first_adaptive_item() : spec.items.size();

  int h = input.height;
  int w = input.width;
  int channels = input.channels;
  // Level structure of the adaptive region; values are irrelevant here.
  MultiResMap levels;
  std::size_t next_mask = 0;

  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    ItemCost cost;
    cost.item = i;
    const bool in_adaptive = i >= first;
    if (const auto* c = as_conv(spec.items[i])) {
      cost.label = conv_label(*c);
      cost.grid_elements = static_cast<std::uint64_t>(h) * w;
      cost.active_elements =
          in_adaptive ? levels.active_count() : cost.grid_elements;
      cost.multiply_adds = cost.active_elements * conv_macs_per_element(*c);
      channels = c->out_channels;
    } else {
      const auto* step = as_down(spec.items[i]);
      cost.label = down_label(*step);
      const std::uint64_t per_patch =
          static_cast<std::uint64_t>(step->factor) * step->factor * channels;
      if (skipped[i]) {
        cost.label += " (skipped)";
        cost.grid_elements = static_cast<std::uint64_t>(h) * w;
        cost.active_elements = cost.grid_elements;
      } else if (in_adaptive) {
        const DownsampleMask& m = variant.masks[next_mask++];
        StageActivity stage;
        stage.stage = static_cast<int>(next_mask);
        stage.patches = static_cast<std::uint64_t>(m.rows()) * m.cols();
        if (i == first) {
          levels = adaptive_downsample(DenseTensor(h, w, 1), m, step->factor,
                                       PatchReducer::kUniformTopLeft);
          stage.downsampled_patches = m.count_ones();
        } else {
          const DownsampleMask eff = effective_mask(levels, m);
          stage.downsampled_patches = eff.count_ones();
          levels = adaptive_downsample_stage(levels, eff,
                                             PatchReducer::kUniformTopLeft);
        }
        cost.label += " (adaptive)";
        cost.reducer_ops = stage.downsampled_patches * per_patch;
        cost.grid_elements = static_cast<std::uint64_t>(h) * w;
        cost.active_elements = levels.active_count();
        stage.active_elements = cost.active_elements;
        stage.grid_elements = cost.grid_elements;
        for (std::size_t n : levels.active_histogram()) {
          stage.level_histogram.push_back(n);
        }
        report.stages.push_back(std::move(stage));
      } else {
        h /= step->factor;
        w /= step->factor;
        cost.grid_elements = static_cast<std::uint64_t>(h) * w;
        cost.active_elements = cost.grid_elements;
        cost.reducer_ops = cost.grid_elements * per_patch;
      }
    }
    report.total_multiply_adds += cost.multiply_adds;
    report.total_reducer_ops += cost.reducer_ops;
    report.items.push_back(std::move(cost));
  }
  return report;
}

ReceptiveFields::ReceptiveFields(int in_height, int in_width, int out_height,
                                 int out_width)
    : in_height_(in_height),
      in_width_(in_width),
      out_height_(out_height),
      out_width_(out_width),
      defined_(static_cast<std::size_t>(out_height) * out_width, 1),
      reach_(static_cast<std::size_t>(out_height) * out_width * in_height *
                 in_width,
             0) {}

std::vector<Pixel> ReceptiveFields::support(Pixel out) const {
  std::vector<Pixel> pixels;
  for (int y = 0; y < in_height_; ++y) {
    for (int x = 0; x < in_width_; ++x) {
      if (reaches(out, {y, x})) pixels.push_back({y, x});
    }
  }
  return pixels;
}

std::vector<ReceptiveFields> receptive_field_maps(const NetworkSpec& spec,
                                                  int height, int width,
                                                  const VariantSpec& variant) {
  // With unit weights every channel carries the same response, so a
  // single-channel copy of the stack has the same support.
  NetworkSpec probe = spec;
  for (auto& item : probe.items) {
    if (auto* c = std::get_if<ConvLayer>(&item)) {
      ConvLayer unit = ConvLayer::zeros(c->kernel_size, 1, 1);
      std::fill(unit.weights.begin(), unit.weights.end(), 1.0f);
      unit.dilation = c->dilation;
      *c = std::move(unit);
    }
  }
  probe.input.reset();

  const auto run = [&](const DenseTensor& impulse,
                       const ItemObserver& observer) {
    switch (variant.kind) {
      case Variant::kRegular:
        run_regular(probe, impulse, observer);
        break;
      case Variant::kDilated:
        run_dilated(probe, impulse, variant.keep_last, observer);
        break;
      case Variant::kAdaptive:
        run_adaptive(probe, impulse, variant.masks, observer);
        break;
    }
  };

  // A zero input fixes the output grids and the active sets.
  std::vector<ReceptiveFields> maps;
  run(DenseTensor(height, width, 1),
      [&](std::size_t, const DenseTensor* t, const MultiResMap* m) {
        if (t != nullptr) {
          maps.emplace_back(height, width, t->height(), t->width());
        } else {
          maps.emplace_back(height, width, m->base_height(), m->base_width());
          for (int y = 0; y < m->base_height(); ++y) {
            for (int x = 0; x < m->base_width(); ++x) {
              maps.back().set_defined({y, x}, m->is_active(y, x));
            }
          }
        }
      });

  // Mask diagnostics were already emitted by the run above.
  ScopedWarningHandler quiet([](const std::string&) {});
  DenseTensor impulse(height, width, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      impulse.at(y, x, 0) = 1.0f;
      const Pixel source{y, x};
      run(impulse, [&](std::size_t item, const DenseTensor* t,
                       const MultiResMap* m) {
        ReceptiveFields& rf = maps[item];
        for (int oy = 0; oy < rf.out_height(); ++oy) {
          for (int ox = 0; ox < rf.out_width(); ++ox) {
            float v;
            if (t != nullptr) {
              v = t->at(oy, ox, 0);
            } else {
              if (!m->is_active(oy, ox)) continue;
              v = m->active_values(oy, ox)[0];
            }
            if (v != 0.0f) rf.mark({oy, ox}, source);
          }
        }
      });
      impulse.at(y, x, 0) = 0.0f;
    }
  }
  return maps;
}

std::vector<Pixel> receptive_field_support(
    const NetworkSpec& spec, int height, int width, const VariantSpec& variant,
    Pixel output_pos, std::optional<std::size_t> boundary) {
  if (spec.items.empty()) {
    throw std::invalid_argument("receptive field of an empty network");
  }
  const std::size_t b = boundary.value_or(spec.items.size() - 1);
  if (b >= spec.items.size()) {
    throw std::invalid_argument("boundary index out of range");
  }
  const auto maps = receptive_field_maps(spec, height, width, variant);
  const ReceptiveFields& rf = maps[b];
  if (output_pos.y < 0 || output_pos.y >= rf.out_height() ||
      output_pos.x < 0 || output_pos.x >= rf.out_width()) {
    throw std::invalid_argument("output position outside the output grid");
  }
  if (!rf.defined(output_pos)) {
    throw std::invalid_argument("output position (" +
                                std::to_string(output_pos.y) + "," +
                                std::to_string(output_pos.x) +
                                ") is inactive");
  }
  return rf.support(output_pos);
}

}  // namespace mrconv
