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

#include "mrconv/masks.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mrconv {
namespace {

void require_odd_size(int k, const char* what) {
  if (k < 1 || k % 2 == 0) {
    throw std::invalid_argument(std::string(what) +
                                ": dilation size must be odd and >= 1, got " +
                                std::to_string(k));
  }
}

// Sliding-window OR along one axis using a running count of set bits.
std::vector<std::uint8_t> dilate_lines(const std::vector<std::uint8_t>& src,
                                       int lines, int length,
                                       std::size_t line_stride,
                                       std::size_t elem_stride, int radius) {
  std::vector<std::uint8_t> dst(src.size(), 0);
  for (int l = 0; l < lines; ++l) {
    const std::size_t base = l * line_stride;
    int count = 0;
    // Window for position 0 covers [0, radius].
    for (int t = 0; t <= std::min(radius, length - 1); ++t) {
      count += src[base + t * elem_stride];
    }
    for (int t = 0; t < length; ++t) {
      dst[base + t * elem_stride] = count > 0 ? 1 : 0;
      const int leaving = t - radius;
      const int entering = t + radius + 1;
      if (leaving >= 0) count -= src[base + leaving * elem_stride];
      if (entering < length) count += src[base + entering * elem_stride];
    }
  }
  return dst;
}

void require_same_shape(const LabelMap& a, const LabelMap& b,
                        const char* name) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument(std::string("oracle_mask: ") + name +
                                " has shape " + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + ", expected " +
                                std::to_string(b.rows) + "x" +
                                std::to_string(b.cols));
  }
}

}  // namespace

BinaryMap::BinaryMap(int rows, int cols, std::uint8_t fill)
    : rows(rows), cols(cols) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("binary map dimensions must be positive");
  }
  bits.assign(static_cast<std::size_t>(rows) * cols, fill != 0 ? 1 : 0);
}

std::size_t BinaryMap::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

BinaryMap dilate_binary(const BinaryMap& grid, int k) {
  require_odd_size(k, "dilate_binary");
  if (k == 1) return grid;
  const int radius = k / 2;
  BinaryMap out = grid;
  out.bits = dilate_lines(grid.bits, grid.rows, grid.cols, grid.cols, 1,
                          radius);
  out.bits = dilate_lines(out.bits, grid.cols, grid.rows, 1, grid.cols, radius);
  return out;
}

DownsampleMask pool_retain_any(const BinaryMap& important, int factor) {
  if (factor < 1) {
    throw std::invalid_argument("pooling factor must be positive");
  }
  if (important.rows % factor != 0 || important.cols % factor != 0) {
    throw std::invalid_argument(
        "importance map " + std::to_string(important.rows) + "x" +
        std::to_string(important.cols) + " is not divisible by " +
        std::to_string(factor));
  }
  DownsampleMask mask = DownsampleMask::ones(important.rows / factor,
                                             important.cols / factor);
  for (int y = 0; y < important.rows; ++y) {
    for (int x = 0; x < important.cols; ++x) {
      if (important.at(y, x)) mask.set(y / factor, x / factor, false);
    }
  }
  return mask;
}

BinaryMap edge_importance(const DenseTensor& gray, double threshold,
                          int dilate_k) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("edge threshold must lie in [0, 1], got " +
                                std::to_string(threshold));
  }
  require_odd_size(dilate_k, "edge_mask");
  const DenseTensor magnitude = sobel_magnitude(gray);
  BinaryMap edges(gray.height(), gray.width());
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      edges.set(y, x, magnitude.at(y, x, 0) >= threshold);
    }
  }
  return dilate_binary(edges, dilate_k);
}

DownsampleMask edge_mask(const DenseTensor& gray, double threshold,
                         int dilate_k, int factor) {
  if (gray.height() % factor != 0 || gray.width() % factor != 0) {
    throw std::invalid_argument("edge_mask: image is not divisible by " +
                                std::to_string(factor));
  }
  return pool_retain_any(edge_importance(gray, threshold, dilate_k), factor);
}

KeypointSet::KeypointSet(std::vector<Pixel> points)
    : points_(std::move(points)) {
  std::sort(points_.begin(), points_.end());
  points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
}

BinaryMap keypoint_importance(const KeypointSet& keypoints, int dilate_k,
                              int height, int width) {
  std::string offenders;
  for (const Pixel& p : keypoints.points()) {
    if (p.y < 0 || p.y >= height || p.x < 0 || p.x >= width) {
      offenders += " (" + std::to_string(p.y) + "," + std::to_string(p.x) + ")";
    }
  }
  if (!offenders.empty()) {
    throw std::invalid_argument("keypoints outside " + std::to_string(height) +
                                "x" + std::to_string(width) + ":" + offenders);
  }
  if (dilate_k == 0) return BinaryMap(height, width, 0);
  if (dilate_k == kInfiniteDilation) return BinaryMap(height, width, 1);
  require_odd_size(dilate_k, "keypoint_mask");
  BinaryMap raster(height, width);
  for (const Pixel& p : keypoints.points()) raster.set(p.y, p.x);
  return dilate_binary(raster, dilate_k);
}

DownsampleMask keypoint_mask(const KeypointSet& keypoints, int dilate_k,
                             int height, int width, int factor) {
  return pool_retain_any(keypoint_importance(keypoints, dilate_k, height, width),
                         factor);
}

BinaryMap benefit_set(const LabelMap& pred_low, const LabelMap& pred_high,
                      const LabelMap& labels) {
  require_same_shape(pred_low, labels, "low-resolution prediction");
  require_same_shape(pred_high, labels, "high-resolution prediction");
  BinaryMap benefit(labels.rows, labels.cols);
  for (int y = 0; y < labels.rows; ++y) {
    for (int x = 0; x < labels.cols; ++x) {
      const auto truth = labels.at(y, x);
      benefit.set(y, x, pred_low.at(y, x) != truth && pred_high.at(y, x) == truth);
    }
  }
  return benefit;
}

DownsampleMask oracle_mask(const LabelMap& pred_low, const LabelMap& pred_high,
                           const LabelMap& labels, int dilate_k, int factor) {
  return pool_retain_any(
      dilate_binary(benefit_set(pred_low, pred_high, labels), dilate_k),
      factor);
}

double mask_budget_loss(double task_loss, double active_fraction,
                        const BudgetParams& params) {
  if (!(active_fraction >= 0.0 && active_fraction <= 1.0)) {
    throw std::invalid_argument("active fraction must lie in [0, 1]");
  }
  if (params.alpha < 0.0 || params.beta < 0.0 ||
      !(params.gamma >= 0.0 && params.gamma <= 1.0)) {
    throw std::invalid_argument(
        "budget parameters need alpha, beta >= 0 and gamma in [0, 1]");
  }
  const double gap = params.gamma - active_fraction;
  return params.alpha * task_loss + params.beta * gap * gap;
}

}  // namespace mrconv
