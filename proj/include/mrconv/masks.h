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

// Content-adaptive downsampling mask generators.
//
// All generators first build a pixel-resolution importance map and then
// pool it to the patch grid: a patch keeps its resolution (bit 0) if any of
// its pixels is important, and is downsampled (bit 1) otherwise.

#ifndef MRCONV_MASKS_H_
#define MRCONV_MASKS_H_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mrconv/multires.h"
#include "mrconv/tensor.h"

namespace mrconv {

struct BinaryMap {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bits;

  BinaryMap() = default;
  BinaryMap(int rows, int cols, std::uint8_t fill = 0);

  bool at(int i, int j) const {
    return bits[static_cast<std::size_t>(i) * cols + j] != 0;
  }
  void set(int i, int j, bool value = true) {
    bits[static_cast<std::size_t>(i) * cols + j] = value ? 1 : 0;
  }
  std::size_t count() const;

  friend bool operator==(const BinaryMap&, const BinaryMap&) = default;
};

// Morphological dilation with a k x k square (k odd), clipped at the
// borders. k = 1 is the identity.
BinaryMap dilate_binary(const BinaryMap& grid, int k);

// Retain-if-any pooling of an importance map onto factor x factor patches.
// Dimensions must be divisible by `factor`.
DownsampleMask pool_retain_any(const BinaryMap& important, int factor);

// Sobel magnitude >= threshold, dilated by dilate_k. threshold in [0, 1].
BinaryMap edge_importance(const DenseTensor& gray, double threshold,
                          int dilate_k);

// edge_importance pooled to (H/d) x (W/d) patches.
DownsampleMask edge_mask(const DenseTensor& gray, double threshold,
                         int dilate_k, int factor);

// Keypoints in base-grid pixel coordinates, de-duplicated and sorted.
class KeypointSet {
 public:
  KeypointSet() = default;
  explicit KeypointSet(std::vector<Pixel> points);

  std::span<const Pixel> points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  std::vector<Pixel> points_;
};

// Dilation size meaning "retain the whole map".
inline constexpr int kInfiniteDilation = std::numeric_limits<int>::max();

// dilate_k == 0 marks nothing, kInfiniteDilation marks everything, odd
// sizes dilate the rasterized keypoints. Out-of-bounds keypoints throw
// std::invalid_argument listing them.
BinaryMap keypoint_importance(const KeypointSet& keypoints, int dilate_k,
                              int height, int width);

DownsampleMask keypoint_mask(const KeypointSet& keypoints, int dilate_k,
                             int height, int width, int factor);

// Integer label map (class ids), row-major.
struct LabelMap {
  int rows = 0;
  int cols = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int i, int j) const {
    return labels[static_cast<std::size_t>(i) * cols + j];
  }
};

// Pixels wrong at the coarse output stride but right at the fine one.
BinaryMap benefit_set(const LabelMap& pred_low, const LabelMap& pred_high,
                      const LabelMap& labels);

DownsampleMask oracle_mask(const LabelMap& pred_low, const LabelMap& pred_high,
                           const LabelMap& labels, int dilate_k, int factor);

struct BudgetParams {
  double alpha = 1.0;  // task loss weight
  double beta = 1.0;   // budget term weight
  double gamma = 0.5;  // target fraction of downsampled (1) mask entries
};

// alpha * task_loss + beta * (gamma - active_fraction)^2, where
// active_fraction is the share of 1 entries in the mask.
double mask_budget_loss(double task_loss, double active_fraction,
                        const BudgetParams& params);

}  // namespace mrconv

#endif  // MRCONV_MASKS_H_
