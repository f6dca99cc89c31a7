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

#include "mrconv/sparse_conv.h"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrconv/parallel.h"

namespace mrconv {
namespace {

bool is_power_of(int value, int base) {
  if (value < 1) return false;
  while (value % base == 0) value /= base;
  return value == 1;
}

}  // namespace

MultiResMap multires_conv(const MultiResMap& mr, const ConvLayer& layer,
                          int stage_dilation) {
  layer.validate();
  if (mr.channels() != layer.in_channels) {
    throw std::invalid_argument(
        "multires_conv: map has " + std::to_string(mr.channels()) +
        " channels, layer expects " + std::to_string(layer.in_channels));
  }
  if (!is_power_of(stage_dilation, mr.factor())) {
    throw std::invalid_argument("stage dilation " +
                                std::to_string(stage_dilation) +
                                " is not a power of " +
                                std::to_string(mr.factor()));
  }
  const int height = mr.base_height();
  const int width = mr.base_width();
  const int k = layer.kernel_size;
  const int center = (k - 1) / 2;
  const int cin = layer.in_channels;
  const int cout = layer.out_channels;
  std::vector<float> values(static_cast<std::size_t>(height) * width * cout,
                            0.0f);

  parallel_rows(height, [&](int y) {
    std::vector<float> acc(cout);
    for (int x = 0; x < width; ++x) {
      if (!mr.is_active(y, x)) continue;
      for (int co = 0; co < cout; ++co) acc[co] = layer.bias_at(co);
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + (ky - center) * stage_dilation;
        if (sy < 0 || sy >= height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = x + (kx - center) * stage_dilation;
          if (sx < 0 || sx >= width) continue;
          const auto px = mr.resolved_values(sy, sx);
          for (int ci = 0; ci < cin; ++ci) {
            const float v = px[ci];
            const float* w = &layer.weights[layer.weight_index(ky, kx, ci, 0)];
            for (int co = 0; co < cout; ++co) acc[co] += w[co] * v;
          }
        }
      }
      float* dst = values.data() + (static_cast<std::size_t>(y) * width + x) * cout;
      for (int co = 0; co < cout; ++co) {
        dst[co] = layer.relu ? std::max(acc[co], 0.0f) : acc[co];
      }
    }
  });

  return MultiResMap(height, width, cout, mr.factor(), mr.stages(),
                     std::vector<std::uint8_t>(mr.levels().begin(),
                                               mr.levels().end()),
                     std::move(values));
}

std::uint64_t count_active_taps(const MultiResMap& mr, const ConvLayer& layer) {
  return static_cast<std::uint64_t>(mr.active_count()) * layer.kernel_size *
         layer.kernel_size * layer.in_channels * layer.out_channels;
}

}  // namespace mrconv
