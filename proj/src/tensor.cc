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

#include "mrconv/tensor.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mrconv/parallel.h"

namespace mrconv {

DenseTensor::DenseTensor(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw std::invalid_argument("tensor dimensions must be positive, got " +
                                std::to_string(height) + "x" +
                                std::to_string(width) + "x" +
                                std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0f);
}

DenseTensor::DenseTensor(int height, int width, int channels,
                         std::vector<float> data)
    : DenseTensor(height, width, channels) {
  if (data.size() != data_.size()) {
    throw std::invalid_argument(
        "tensor data length " + std::to_string(data.size()) +
        " does not match " + std::to_string(height) + "x" +
        std::to_string(width) + "x" + std::to_string(channels));
  }
  data_ = std::move(data);
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double dev = std::abs(static_cast<double>(da[i]) - db[i]);
    // NaN must not hide as "no deviation".
    if (std::isnan(dev)) return dev;
    worst = std::max(worst, dev);
  }
  return worst;
}

ConvLayer ConvLayer::zeros(int kernel_size, int in_channels, int out_channels,
                           bool has_bias, bool relu) {
  ConvLayer layer;
  layer.kernel_size = kernel_size;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  layer.has_bias = has_bias;
  layer.relu = relu;
  if (kernel_size > 0 && in_channels > 0 && out_channels > 0) {
    layer.weights.assign(static_cast<std::size_t>(kernel_size) * kernel_size *
                             in_channels * out_channels,
                         0.0f);
    if (has_bias) layer.bias.assign(out_channels, 0.0f);
  }
  return layer;
}

void ConvLayer::validate() const {
  if (kernel_size <= 0 || kernel_size % 2 == 0) {
    throw std::invalid_argument("kernel size must be odd and positive, got " +
                                std::to_string(kernel_size));
  }
  if (in_channels <= 0 || out_channels <= 0) {
    throw std::invalid_argument("channel counts must be positive");
  }
  if (dilation < 1) {
    throw std::invalid_argument("dilation must be >= 1, got " +
                                std::to_string(dilation));
  }
  const std::size_t expected = static_cast<std::size_t>(kernel_size) *
                               kernel_size * in_channels * out_channels;
  if (weights.size() != expected) {
    throw std::invalid_argument("expected " + std::to_string(expected) +
                                " weights, got " +
                                std::to_string(weights.size()));
  }
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels)) {
    throw std::invalid_argument("bias length must equal out_channels");
  }
}

std::string_view reducer_name(PatchReducer reducer) {
  switch (reducer) {
    case PatchReducer::kUniformTopLeft:
      return "uniform";
    case PatchReducer::kMax:
      return "max";
    case PatchReducer::kAverage:
      return "avg";
  }
  return "?";
}

PatchReducer parse_reducer(std::string_view name) {
  if (name == "uniform") return PatchReducer::kUniformTopLeft;
  if (name == "max") return PatchReducer::kMax;
  if (name == "avg" || name == "average") return PatchReducer::kAverage;
  throw std::invalid_argument("unknown reducer '" + std::string(name) + "'");
}

void reduce_patch(const DenseTensor& f, int y0, int x0, int factor,
                  PatchReducer reducer, std::span<float> out) {
  const int channels = f.channels();
  switch (reducer) {
    case PatchReducer::kUniformTopLeft: {
      const auto src = f.pixel(y0, x0);
      std::copy(src.begin(), src.end(), out.begin());
      return;
    }
    case PatchReducer::kMax: {
      const auto first = f.pixel(y0, x0);
      std::copy(first.begin(), first.end(), out.begin());
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const auto px = f.pixel(y0 + dy, x0 + dx);
          for (int c = 0; c < channels; ++c) out[c] = std::max(out[c], px[c]);
        }
      }
      return;
    }
    case PatchReducer::kAverage: {
      std::fill(out.begin(), out.end(), 0.0f);
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const auto px = f.pixel(y0 + dy, x0 + dx);
          for (int c = 0; c < channels; ++c) out[c] += px[c];
        }
      }
      const float scale = 1.0f / static_cast<float>(factor * factor);
      for (int c = 0; c < channels; ++c) out[c] *= scale;
      return;
    }
  }
}

DenseTensor conv2d(const DenseTensor& input, const ConvLayer& layer) {
  return conv2d(input, layer, layer.dilation);
}

DenseTensor conv2d(const DenseTensor& input, const ConvLayer& layer,
                   int dilation) {
  layer.validate();
  if (dilation < 1) {
    throw std::invalid_argument("dilation must be >= 1");
  }
  if (input.channels() != layer.in_channels) {
    throw std::invalid_argument(
        "conv2d: input has " + std::to_string(input.channels()) +
        " channels, layer expects " + std::to_string(layer.in_channels));
  }
  const int height = input.height();
  const int width = input.width();
  const int k = layer.kernel_size;
  const int center = (k - 1) / 2;
  const int cin = layer.in_channels;
  const int cout = layer.out_channels;
  DenseTensor out(height, width, cout);

  parallel_rows(height, [&](int y) {
    std::vector<float> acc(cout);
    for (int x = 0; x < width; ++x) {
      for (int co = 0; co < cout; ++co) acc[co] = layer.bias_at(co);
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + (ky - center) * dilation;
        if (sy < 0 || sy >= height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = x + (kx - center) * dilation;
          if (sx < 0 || sx >= width) continue;
          const auto px = input.pixel(sy, sx);
          for (int ci = 0; ci < cin; ++ci) {
            const float v = px[ci];
            const float* w = &layer.weights[layer.weight_index(ky, kx, ci, 0)];
            for (int co = 0; co < cout; ++co) acc[co] += w[co] * v;
          }
        }
      }
      auto dst = out.pixel(y, x);
      for (int co = 0; co < cout; ++co) {
        dst[co] = layer.relu ? std::max(acc[co], 0.0f) : acc[co];
      }
    }
  });
  return out;
}

DenseTensor regular_downsample(const DenseTensor& f, int factor,
                               PatchReducer reducer) {
  if (factor < 2) {
    throw std::invalid_argument("downsampling factor must be >= 2");
  }
  if (f.height() % factor != 0 || f.width() % factor != 0) {
    throw std::invalid_argument(
        "regular_downsample: " + std::to_string(f.height()) + "x" +
        std::to_string(f.width()) + " is not divisible by " +
        std::to_string(factor));
  }
  DenseTensor out(f.height() / factor, f.width() / factor, f.channels());
  for (int i = 0; i < out.height(); ++i) {
    for (int j = 0; j < out.width(); ++j) {
      reduce_patch(f, i * factor, j * factor, factor, reducer, out.pixel(i, j));
    }
  }
  return out;
}

DenseTensor sobel_magnitude(const DenseTensor& gray) {
  if (gray.channels() != 1) {
    throw std::invalid_argument("sobel_magnitude expects one channel, got " +
                                std::to_string(gray.channels()));
  }
  const int height = gray.height();
  const int width = gray.width();
  const auto read = [&](int y, int x) -> double { return gray.at(y, x, 0); };
  const double norm = 4.0 * std::sqrt(2.0);
  DenseTensor out(height, width, 1);
  for (int y = 1; y + 1 < height; ++y) {
    for (int x = 1; x + 1 < width; ++x) {
      const double gx = (read(y - 1, x + 1) + 2.0 * read(y, x + 1) +
                         read(y + 1, x + 1)) -
                        (read(y - 1, x - 1) + 2.0 * read(y, x - 1) +
                         read(y + 1, x - 1));
      const double gy = (read(y + 1, x - 1) + 2.0 * read(y + 1, x) +
                         read(y + 1, x + 1)) -
                        (read(y - 1, x - 1) + 2.0 * read(y - 1, x) +
                         read(y - 1, x + 1));
      out.at(y, x, 0) = static_cast<float>(std::sqrt(gx * gx + gy * gy) / norm);
    }
  }
  return out;
}

}  // namespace mrconv
