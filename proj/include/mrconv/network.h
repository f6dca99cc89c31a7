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

// Layer stacks executed three ways:
//
//   regular   convs at stride 1 followed by patch-wise downsampling,
//   dilated   the last k downsamplings removed and later convs dilated by
//             the product of the removed factors,
//   adaptive  the last n_adaptive downsamplings replaced by adaptive
//             downsampling and later convs run as multi-resolution sparse
//             convs with dilation factor^i after i adaptive stages.
//
// plus multiply-add accounting and impulse-response receptive fields.

#ifndef MRCONV_NETWORK_H_
#define MRCONV_NETWORK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mrconv/multires.h"
#include "mrconv/tensor.h"

namespace mrconv {

struct DownsampleStep {
  int factor = 2;
  PatchReducer reducer = PatchReducer::kUniformTopLeft;
};

using NetworkItem = std::variant<ConvLayer, DownsampleStep>;

struct InputShape {
  int height = 0;
  int width = 0;
  int channels = 0;
};

struct NetworkSpec {
  std::string name;
  std::vector<NetworkItem> items;
  // Number of trailing downsample steps that run adaptively.
  int n_adaptive = 0;
  std::optional<InputShape> input;

  int downsample_count() const;
  int conv_count() const;
  // Item index of the first adaptive downsample, or items.size() if none.
  std::size_t first_adaptive_item() const;
  // Factor shared by the adaptive steps (2 if there are none).
  int adaptive_factor() const;
  // Product of all downsample factors (the regular output stride).
  int total_stride() const;
  // Product of the downsample factors that run regularly in the adaptive
  // variant; the adaptive base grid is the input divided by this.
  int pre_adaptive_stride() const;

  // Throws std::invalid_argument if n_adaptive is out of range, consecutive
  // conv channel counts disagree, adaptive steps use different factors, or
  // a conv layer is malformed or carries its own dilation.
  void validate() const;
  // validate() plus checks that the input fits the first conv and that its
  // dimensions are divisible by total_stride().
  void validate_input(const InputShape& shape) const;
};

enum class Variant { kRegular, kDilated, kAdaptive };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

// Which execution to run: regular, dilated with `keep_last` downsamplings
// removed (negative = n_adaptive), or adaptive with one mask per stage.
struct VariantSpec {
  Variant kind = Variant::kRegular;
  int keep_last = -1;
  std::vector<DownsampleMask> masks;

  static VariantSpec regular() { return {}; }
  static VariantSpec dilated(int keep_last = -1) {
    return {Variant::kDilated, keep_last, {}};
  }
  static VariantSpec adaptive(std::vector<DownsampleMask> masks) {
    return {Variant::kAdaptive, -1, std::move(masks)};
  }
};

// Observer called after every item with that item's output: exactly one of
// the two pointers is non-null.
using ItemObserver = std::function<void(std::size_t item, const DenseTensor*,
                                        const MultiResMap*)>;

DenseTensor run_regular(const NetworkSpec& spec, const DenseTensor& input,
                        const ItemObserver& observer = {});

// keep_last must not exceed the downsample count.
DenseTensor run_dilated(const NetworkSpec& spec, const DenseTensor& input,
                        int keep_last, const ItemObserver& observer = {});

// Mask shapes expected by run_adaptive for an input of the given size.
std::vector<std::pair<int, int>> adaptive_mask_shapes(const NetworkSpec& spec,
                                                      int height, int width);

// masks.size() must equal n_adaptive. The result lives on the grid reached
// by the regular (pre-adaptive) downsamplings. With n_adaptive == 0 the
// dense result is wrapped as an all-level-0 map.
MultiResMap run_adaptive(const NetworkSpec& spec, const DenseTensor& input,
                         std::span<const DownsampleMask> masks,
                         const ItemObserver& observer = {});

struct ItemCost {
  std::size_t item = 0;
  std::string label;
  // Convolution multiply-adds (the #MA figure).
  std::uint64_t multiply_adds = 0;
  // Pooling compares/adds of downsample steps, kept out of #MA.
  std::uint64_t reducer_ops = 0;
  // Elements produced by this item and the grid they live on.
  std::uint64_t active_elements = 0;
  std::uint64_t grid_elements = 0;
};

struct StageActivity {
  int stage = 0;
  std::uint64_t patches = 0;
  std::uint64_t downsampled_patches = 0;  // effective 1 bits
  std::uint64_t active_elements = 0;
  std::uint64_t grid_elements = 0;
  std::vector<std::uint64_t> level_histogram;

  double active_fraction() const {
    return grid_elements == 0
               ? 0.0
               : static_cast<double>(active_elements) / grid_elements;
  }
};

struct CostReport {
  Variant variant = Variant::kRegular;
  int keep_last = 0;
  std::vector<ItemCost> items;
  std::uint64_t total_multiply_adds = 0;
  std::uint64_t total_reducer_ops = 0;
  std::vector<StageActivity> stages;  // adaptive only
};

// Costs follow the K^2 * Cin * Cout per produced element convention. A
// downsample step is charged factor^2 * C reducer ops per reduced patch.
// Masks must be given iff the variant is adaptive.
CostReport cost_report(const NetworkSpec& spec, const InputShape& input,
                       const VariantSpec& variant);

// Input pixels influencing the outputs of one item boundary, measured by
// impulse response: every conv gets unit weights, no bias and no ReLU, all
// channels collapse to one, and a one-hot input is fed at each pixel.
class ReceptiveFields {
 public:
  ReceptiveFields(int in_height, int in_width, int out_height, int out_width);

  int in_height() const { return in_height_; }
  int in_width() const { return in_width_; }
  int out_height() const { return out_height_; }
  int out_width() const { return out_width_; }

  // False for inactive positions of a multi-resolution output.
  bool defined(Pixel out) const { return defined_[out_index(out)] != 0; }
  bool reaches(Pixel out, Pixel in) const {
    return reach_[out_index(out) * in_pixels() + in_index(in)] != 0;
  }
  // Sorted input pixels reaching `out`.
  std::vector<Pixel> support(Pixel out) const;

  void set_defined(Pixel out, bool value) {
    defined_[out_index(out)] = value ? 1 : 0;
  }
  void mark(Pixel out, Pixel in) {
    reach_[out_index(out) * in_pixels() + in_index(in)] = 1;
  }

 private:
  std::size_t in_pixels() const {
    return static_cast<std::size_t>(in_height_) * in_width_;
  }
  std::size_t out_index(Pixel p) const {
    return static_cast<std::size_t>(p.y) * out_width_ + p.x;
  }
  std::size_t in_index(Pixel p) const {
    return static_cast<std::size_t>(p.y) * in_width_ + p.x;
  }

  int in_height_;
  int in_width_;
  int out_height_;
  int out_width_;
  std::vector<std::uint8_t> defined_;
  std::vector<std::uint8_t> reach_;
};

// One ReceptiveFields per item boundary (index i = output of item i) for an
// input of height x width.
std::vector<ReceptiveFields> receptive_field_maps(const NetworkSpec& spec,
                                                  int height, int width,
                                                  const VariantSpec& variant);

// Support of one output position after `boundary` (default: the last
// item). Throws std::invalid_argument if the position is outside the
// output grid or inactive in the adaptive variant.
std::vector<Pixel> receptive_field_support(
    const NetworkSpec& spec, int height, int width, const VariantSpec& variant,
    Pixel output_pos, std::optional<std::size_t> boundary = std::nullopt);

}  // namespace mrconv

#endif  // MRCONV_NETWORK_H_
