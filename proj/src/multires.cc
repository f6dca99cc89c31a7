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

#include "mrconv/multires.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mrconv/diagnostics.h"

namespace mrconv {
namespace {

#ifdef NDEBUG
constexpr bool kPoisonInactive = false;
#else
constexpr bool kPoisonInactive = true;
#endif

constexpr long long kMaxBlock = 1LL << 30;

std::string shape_str(int rows, int cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

void require_mask_shape(const DownsampleMask& m, int rows, int cols,
                        const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": mask is " +
                                shape_str(m.rows(), m.cols()) +
                                ", expected " + shape_str(rows, cols));
  }
}

}  // namespace

int int_pow(int factor, int exponent) {
  long long result = 1;
  for (int i = 0; i < exponent; ++i) {
    result *= factor;
    if (result > kMaxBlock) {
      throw std::overflow_error("block size overflow");
    }
  }
  return static_cast<int>(result);
}

DownsampleMask::DownsampleMask(int rows, int cols, std::uint8_t fill)
    : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("mask dimensions must be positive");
  }
  bits_.assign(static_cast<std::size_t>(rows) * cols, fill != 0 ? 1 : 0);
}

DownsampleMask::DownsampleMask(int rows, int cols,
                               std::vector<std::uint8_t> bits)
    : DownsampleMask(rows, cols) {
  if (bits.size() != bits_.size()) {
    throw std::invalid_argument("mask bit count does not match " +
                                shape_str(rows, cols));
  }
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) {
      throw std::invalid_argument("mask values must be 0 or 1");
    }
  }
  bits_ = std::move(bits);
}

std::size_t DownsampleMask::count_ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

double DownsampleMask::active_fraction() const {
  return bits_.empty() ? 0.0
                       : static_cast<double>(count_ones()) / bits_.size();
}

DownsampleMask DownsampleMask::inverted() const {
  DownsampleMask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

MultiResMap::MultiResMap(int base_height, int base_width, int channels,
                         int factor, int stages,
                         std::vector<std::uint8_t> levels,
                         std::vector<float> values)
    : base_height_(base_height),
      base_width_(base_width),
      channels_(channels),
      factor_(factor),
      stages_(stages),
      levels_(std::move(levels)),
      values_(std::move(values)) {
  if (base_height <= 0 || base_width <= 0 || channels <= 0) {
    throw std::invalid_argument("multires map dimensions must be positive");
  }
  if (factor < 2) {
    throw std::invalid_argument("downsampling factor must be >= 2");
  }
  if (stages < 0) {
    throw std::invalid_argument("stage count must be non-negative");
  }
  const std::size_t pixels = static_cast<std::size_t>(base_height) * base_width;
  if (levels_.size() != pixels) {
    throw std::invalid_argument("level field size does not match the grid");
  }
  if (values_.size() != pixels * channels) {
    throw std::invalid_argument("value plane size does not match the grid");
  }
  // Block sizes must stay representable; structure is checked elsewhere.
  int_pow(factor_, std::max(max_level(), stages_));
  if constexpr (kPoisonInactive) {
    const float nan = std::numeric_limits<float>::quiet_NaN();
    for (int y = 0; y < base_height_; ++y) {
      for (int x = 0; x < base_width_; ++x) {
        if (is_active(y, x)) continue;
        std::fill_n(values_.begin() + value_index(y, x), channels_, nan);
      }
    }
  }
}

MultiResMap MultiResMap::from_dense(const DenseTensor& f, int factor) {
  const auto src = f.data();
  return MultiResMap(f.height(), f.width(), f.channels(), factor, 0,
                     std::vector<std::uint8_t>(
                         static_cast<std::size_t>(f.height()) * f.width(), 0),
                     std::vector<float>(src.begin(), src.end()));
}

int MultiResMap::max_level() const {
  if (levels_.empty()) return 0;
  return *std::max_element(levels_.begin(), levels_.end());
}

std::size_t MultiResMap::active_count() const {
  std::size_t n = 0;
  for (int y = 0; y < base_height_; ++y) {
    for (int x = 0; x < base_width_; ++x) n += is_active(y, x) ? 1 : 0;
  }
  return n;
}

std::vector<std::size_t> MultiResMap::active_histogram() const {
  std::vector<std::size_t> hist(std::max(stages_, max_level()) + 1, 0);
  for (int y = 0; y < base_height_; ++y) {
    for (int x = 0; x < base_width_; ++x) {
      if (is_active(y, x)) ++hist[level(y, x)];
    }
  }
  return hist;
}

std::vector<Pixel> MultiResMap::active_positions() const {
  std::vector<Pixel> out;
  for (int y = 0; y < base_height_; ++y) {
    for (int x = 0; x < base_width_; ++x) {
      if (is_active(y, x)) out.push_back({y, x});
    }
  }
  return out;
}

std::vector<std::string> quadtree_violations(const MultiResMap& mr,
                                             std::size_t limit) {
  std::vector<std::string> out;
  const auto report = [&](int y, int x, const std::string& what) {
    if (out.size() < limit) {
      out.push_back("(" + std::to_string(y) + "," + std::to_string(x) +
                    "): " + what);
    }
  };
  const int height = mr.base_height();
  const int width = mr.base_width();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int level = mr.level(y, x);
      if (level > mr.stages()) {
        report(y, x,
               "level " + std::to_string(level) + " exceeds stage count " +
                   std::to_string(mr.stages()));
        continue;
      }
      const int b = int_pow(mr.factor(), level);
      if (height % b != 0 || width % b != 0) {
        report(y, x, "block of size " + std::to_string(b) +
                         " does not tile the grid");
        continue;
      }
      // A pixel must agree with its block's top-left, and a top-left must
      // agree with every pixel it claims.
      const Pixel origin{y - y % b, x - x % b};
      if (mr.level(origin.y, origin.x) != level) {
        report(y, x,
               "level " + std::to_string(level) + " but block origin (" +
                   std::to_string(origin.y) + "," + std::to_string(origin.x) +
                   ") has level " +
                   std::to_string(mr.level(origin.y, origin.x)));
        continue;
      }
      if (origin.y != y || origin.x != x) continue;
      for (int dy = 0; dy < b; ++dy) {
        for (int dx = 0; dx < b; ++dx) {
          if (mr.level(y + dy, x + dx) != level) {
            report(y + dy, x + dx,
                   "inside level-" + std::to_string(level) +
                       " block at (" + std::to_string(y) + "," +
                       std::to_string(x) + ") but has level " +
                       std::to_string(mr.level(y + dy, x + dx)));
          }
        }
      }
    }
  }
  // Active elements must carry finite values.
  for (int y = 0; y < height && out.size() < limit; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mr.level(y, x) > mr.stages() || !mr.is_active(y, x)) continue;
      for (float v : mr.active_values(y, x)) {
        if (!std::isfinite(v)) {
          report(y, x, "active element holds a non-finite value");
          break;
        }
      }
    }
  }
  return out;
}

MultiResMap adaptive_downsample(const DenseTensor& f, const DownsampleMask& m,
                                int factor, PatchReducer reducer) {
  if (factor < 2) {
    throw std::invalid_argument("downsampling factor must be >= 2");
  }
  if (f.height() % factor != 0 || f.width() % factor != 0) {
    throw std::invalid_argument("adaptive_downsample: " +
                                shape_str(f.height(), f.width()) +
                                " is not divisible by " +
                                std::to_string(factor));
  }
  require_mask_shape(m, f.height() / factor, f.width() / factor,
                     "adaptive_downsample");
  const int channels = f.channels();
  const auto src = f.data();
  std::vector<float> values(src.begin(), src.end());
  std::vector<std::uint8_t> levels(
      static_cast<std::size_t>(f.height()) * f.width(), 0);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (!m.at(i, j)) continue;
      const int y0 = i * factor;
      const int x0 = j * factor;
      reduce_patch(f, y0, x0, factor, reducer,
                   std::span<float>(values.data() + f.index(y0, x0, 0),
                                    static_cast<std::size_t>(channels)));
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          levels[static_cast<std::size_t>(y0 + dy) * f.width() + x0 + dx] = 1;
        }
      }
    }
  }
  return MultiResMap(f.height(), f.width(), channels, factor, 1,
                     std::move(levels), std::move(values));
}

std::pair<int, int> next_stage_mask_shape(const MultiResMap& mr) {
  const int patch = int_pow(mr.factor(), mr.stages() + 1);
  if (mr.base_height() % patch != 0 || mr.base_width() % patch != 0) {
    throw std::invalid_argument(
        "grid " + shape_str(mr.base_height(), mr.base_width()) +
        " cannot host another stage of patch size " + std::to_string(patch));
  }
  return {mr.base_height() / patch, mr.base_width() / patch};
}

DownsampleMask eligible_patches(const MultiResMap& mr) {
  const auto [rows, cols] = next_stage_mask_shape(mr);
  const int k = mr.stages();
  const int patch = int_pow(mr.factor(), k + 1);
  const int sub = patch / mr.factor();
  DownsampleMask eligible(rows, cols, 1);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      // Level-k blocks are aligned, so probing the d*d sub-block origins
      // covers every pixel of the patch.
      bool all_coarse = true;
      for (int sy = 0; sy < mr.factor() && all_coarse; ++sy) {
        for (int sx = 0; sx < mr.factor(); ++sx) {
          if (mr.level(i * patch + sy * sub, j * patch + sx * sub) != k) {
            all_coarse = false;
            break;
          }
        }
      }
      eligible.set(i, j, all_coarse);
    }
  }
  return eligible;
}

DownsampleMask effective_mask(const MultiResMap& mr, const DownsampleMask& m) {
  const auto [rows, cols] = next_stage_mask_shape(mr);
  require_mask_shape(m, rows, cols, "effective_mask");
  DownsampleMask eff = eligible_patches(mr);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) eff.set(i, j, eff.at(i, j) && m.at(i, j));
  }
  return eff;
}

MultiResMap adaptive_downsample_stage(const MultiResMap& mr,
                                      const DownsampleMask& m,
                                      PatchReducer reducer) {
  const int k = mr.stages();
  if (k < 1) {
    throw std::invalid_argument(
        "adaptive_downsample_stage needs a map with at least one stage");
  }
  const auto [rows, cols] = next_stage_mask_shape(mr);
  require_mask_shape(m, rows, cols, "adaptive_downsample_stage");

  const int factor = mr.factor();
  const int patch = int_pow(factor, k + 1);
  const DownsampleMask eligible = eligible_patches(mr);

  // Dense representation of the current coarsest elements. Cells covered by
  // finer blocks are unoccupied; the patches containing them are ineligible
  // and never read.
  const LevelGrid coarse = extract_level_dense(mr, k);

  std::vector<std::uint8_t> levels(mr.levels().begin(), mr.levels().end());
  std::vector<float> values(mr.raw_values().begin(), mr.raw_values().end());
  const int channels = mr.channels();
  std::vector<float> reduced(channels);
  std::size_t ignored = 0;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (!m.at(i, j)) continue;
      if (!eligible.at(i, j)) {
        ++ignored;
        continue;
      }
      reduce_patch(coarse.values, i * factor, j * factor, factor, reducer,
                   reduced);
      const int y0 = i * patch;
      const int x0 = j * patch;
      std::copy(reduced.begin(), reduced.end(),
                values.begin() +
                    (static_cast<std::size_t>(y0) * mr.base_width() + x0) *
                        channels);
      for (int dy = 0; dy < patch; ++dy) {
        std::fill_n(levels.begin() +
                        static_cast<std::size_t>(y0 + dy) * mr.base_width() +
                        x0,
                    patch, static_cast<std::uint8_t>(k + 1));
      }
    }
  }
  if (ignored > 0) {
    warn("adaptive stage " + std::to_string(k + 1) + ": ignored " +
         std::to_string(ignored) +
         " mask bit(s) over patches that still hold finer elements");
  }
  return MultiResMap(mr.base_height(), mr.base_width(), channels, factor,
                     k + 1, std::move(levels), std::move(values));
}

DenseTensor densify(const MultiResMap& mr) {
  DenseTensor out(mr.base_height(), mr.base_width(), mr.channels());
  for (int y = 0; y < mr.base_height(); ++y) {
    for (int x = 0; x < mr.base_width(); ++x) {
      const auto src = mr.resolved_values(y, x);
      std::copy(src.begin(), src.end(), out.pixel(y, x).begin());
    }
  }
  return out;
}

std::size_t LevelGrid::occupied_count() const {
  return static_cast<std::size_t>(
      std::count(occupied.begin(), occupied.end(), 1));
}

LevelGrid extract_level_dense(const MultiResMap& mr, int level) {
  if (level < 0 || level > mr.stages()) {
    throw std::invalid_argument("level " + std::to_string(level) +
                                " outside [0, " + std::to_string(mr.stages()) +
                                "]");
  }
  const int scale = int_pow(mr.factor(), level);
  if (mr.base_height() % scale != 0 || mr.base_width() % scale != 0) {
    throw std::invalid_argument("grid is not divisible by the level scale");
  }
  const int rows = mr.base_height() / scale;
  const int cols = mr.base_width() / scale;
  LevelGrid grid{DenseTensor(rows, cols, mr.channels()),
                 std::vector<std::uint8_t>(
                     static_cast<std::size_t>(rows) * cols, 0)};
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int y = i * scale;
      const int x = j * scale;
      if (mr.level(y, x) != level) continue;
      grid.occupied[static_cast<std::size_t>(i) * cols + j] = 1;
      const auto src = mr.active_values(y, x);
      std::copy(src.begin(), src.end(), grid.values.pixel(i, j).begin());
    }
  }
  return grid;
}

DenseTensor sample_lattice(const MultiResMap& mr, int stride) {
  if (stride < 1 || mr.base_height() % stride != 0 ||
      mr.base_width() % stride != 0) {
    throw std::invalid_argument("lattice stride " + std::to_string(stride) +
                                " does not divide the grid");
  }
  DenseTensor out(mr.base_height() / stride, mr.base_width() / stride,
                  mr.channels());
  for (int i = 0; i < out.height(); ++i) {
    for (int j = 0; j < out.width(); ++j) {
      if (!mr.is_active(i * stride, j * stride)) {
        throw std::invalid_argument(
            "lattice position (" + std::to_string(i * stride) + "," +
            std::to_string(j * stride) + ") is inactive");
      }
      const auto src = mr.active_values(i * stride, j * stride);
      std::copy(src.begin(), src.end(), out.pixel(i, j).begin());
    }
  }
  return out;
}

}  // namespace mrconv
