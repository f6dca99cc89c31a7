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

// Multi-resolution feature maps and adaptive downsampling.
//
// A MultiResMap keeps every feature on the highest-resolution ("base") grid
// of the current network stage. Each base pixel carries a level l: it lies in
// an aligned factor^l x factor^l block whose only stored (active) element is
// the block's top-left pixel. The other pixels of the block are inactive and
// resolve to that representative on read.
//
// Adaptive downsampling with a binary mask reduces some factor x factor
// patches to one active element (level + 1) and keeps the others at full
// resolution. Repeating it on the coarsest elements only yields a
// quadtree-like level pattern for factor 2.

#ifndef MRCONV_MULTIRES_H_
#define MRCONV_MULTIRES_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrconv/tensor.h"

namespace mrconv {

struct Pixel {
  int y = 0;
  int x = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// factor^exponent for small non-negative exponents.
int int_pow(int factor, int exponent);

// Binary per-patch grid: 1 = downsample the patch, 0 = keep its resolution.
class DownsampleMask {
 public:
  DownsampleMask() = default;
  DownsampleMask(int rows, int cols, std::uint8_t fill = 0);
  DownsampleMask(int rows, int cols, std::vector<std::uint8_t> bits);

  static DownsampleMask ones(int rows, int cols) { return {rows, cols, 1}; }
  static DownsampleMask zeros(int rows, int cols) { return {rows, cols, 0}; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool at(int i, int j) const {
    return bits_[static_cast<std::size_t>(i) * cols_ + j] != 0;
  }
  void set(int i, int j, bool downsample) {
    bits_[static_cast<std::size_t>(i) * cols_ + j] = downsample ? 1 : 0;
  }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count_ones() const;
  // Fraction of 1 (downsample) entries.
  double active_fraction() const;
  DownsampleMask inverted() const;

  friend bool operator==(const DownsampleMask&,
                         const DownsampleMask&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

class MultiResMap {
 public:
  MultiResMap() = default;
  // Takes ownership of a level field (one byte per base pixel) and a
  // base-resolution value plane. Only sizes are checked here; use
  // quadtree_violations() to validate the level structure. Inactive values
  // are never read; builds without NDEBUG overwrite them with NaN.
  MultiResMap(int base_height, int base_width, int channels, int factor,
              int stages, std::vector<std::uint8_t> levels,
              std::vector<float> values);

  // Every pixel active at level 0, zero stages applied.
  static MultiResMap from_dense(const DenseTensor& f, int factor);

  int base_height() const { return base_height_; }
  int base_width() const { return base_width_; }
  int channels() const { return channels_; }
  int factor() const { return factor_; }
  // Number of adaptive downsampling stages applied so far. Levels never
  // exceed it.
  int stages() const { return stages_; }

  int level(int y, int x) const {
    return levels_[static_cast<std::size_t>(y) * base_width_ + x];
  }
  int block_size(int y, int x) const { return int_pow(factor_, level(y, x)); }
  bool is_active(int y, int x) const {
    const int b = block_size(y, x);
    return y % b == 0 && x % b == 0;
  }
  // Top-left pixel of the block containing (y, x).
  Pixel representative(int y, int x) const {
    const int b = block_size(y, x);
    return {y - y % b, x - x % b};
  }

  // Stored values of an active pixel.
  std::span<const float> active_values(int y, int x) const {
    return {values_.data() + value_index(y, x),
            static_cast<std::size_t>(channels_)};
  }
  // Values seen at any base pixel: its own if active, else its block
  // representative's.
  std::span<const float> resolved_values(int y, int x) const {
    const Pixel r = representative(y, x);
    return active_values(r.y, r.x);
  }

  std::span<const std::uint8_t> levels() const { return levels_; }
  // Raw value plane; inactive entries hold unspecified data.
  std::span<const float> raw_values() const { return values_; }

  int max_level() const;
  std::size_t active_count() const;
  // Active element count per level (index = level, size = stages + 1).
  std::vector<std::size_t> active_histogram() const;
  std::vector<Pixel> active_positions() const;

 private:
  std::size_t value_index(int y, int x) const {
    return (static_cast<std::size_t>(y) * base_width_ + x) * channels_;
  }

  int base_height_ = 0;
  int base_width_ = 0;
  int channels_ = 0;
  int factor_ = 2;
  int stages_ = 0;
  std::vector<std::uint8_t> levels_;
  std::vector<float> values_;
};

// Human-readable descriptions of every structural violation (misaligned or
// non-uniform blocks, levels above the stage count, grid sizes not divisible
// by a block). Empty for a valid map. At most `limit` entries are returned.
std::vector<std::string> quadtree_violations(const MultiResMap& mr,
                                             std::size_t limit = 64);

// Adaptive downsampling of a dense map. m must be (H/factor) x (W/factor);
// patch (i, j) with m(i, j) = 1 becomes one level-1 element holding the
// reducer output, patches with m(i, j) = 0 keep their d*d level-0 pixels.
MultiResMap adaptive_downsample(const DenseTensor& f, const DownsampleMask& m,
                                int factor, PatchReducer reducer);

// Shape (rows, cols) of the mask consumed by the next stage on `mr`.
std::pair<int, int> next_stage_mask_shape(const MultiResMap& mr);

// For the next stage on `mr`: 1 for patches whose pixels all sit at the
// current coarsest stage level (the only ones that may be downsampled).
DownsampleMask eligible_patches(const MultiResMap& mr);

// The mask bits that actually take effect on the next stage: m AND eligible.
DownsampleMask effective_mask(const MultiResMap& mr, const DownsampleMask& m);

// One further adaptive stage applied to the coarsest elements of `mr`
// (requires mr.stages() >= 1). Patches of side factor^(stages+1) that are
// entirely at level `stages` are densified, adaptively downsampled with
// `m`, and projected back. Mask bits over other patches are ignored with a
// warning.
MultiResMap adaptive_downsample_stage(const MultiResMap& mr,
                                      const DownsampleMask& m,
                                      PatchReducer reducer);

// Base-resolution tensor in which every pixel carries its block
// representative's value.
DenseTensor densify(const MultiResMap& mr);

// Dense view of the elements of one level, on the grid scaled by
// factor^level. Cells whose block is at a different level are unoccupied
// (their value is 0).
struct LevelGrid {
  DenseTensor values;
  std::vector<std::uint8_t> occupied;

  bool is_occupied(int i, int j) const {
    return occupied[static_cast<std::size_t>(i) * values.width() + j] != 0;
  }
  std::size_t occupied_count() const;
};

// `level` may not exceed mr.stages().
LevelGrid extract_level_dense(const MultiResMap& mr, int level);

// Values at every stride-th base pixel in both axes, as a dense
// (H/stride) x (W/stride) tensor. Every sampled pixel must be active.
DenseTensor sample_lattice(const MultiResMap& mr, int stride);

}  // namespace mrconv

#endif  // MRCONV_MULTIRES_H_
