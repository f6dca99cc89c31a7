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

#ifndef MRCONV_TENSOR_H_
#define MRCONV_TENSOR_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace mrconv {

// Dense H x W x C feature map stored row-major in (y, x, c) order.
class DenseTensor {
 public:
  DenseTensor() = default;
  // Zero-filled tensor. All dimensions must be positive.
  DenseTensor(int height, int width, int channels);
  DenseTensor(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }

  // The C values of one pixel.
  std::span<const float> pixel(int y, int x) const {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<float> pixel(int y, int x) {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool same_shape(const DenseTensor& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Largest |a - b| over all elements. Shapes must match.
double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

// A same-padded 2-D cross-correlation layer. Weights are laid out
// (ky, kx, ci, co) with co fastest.
struct ConvLayer {
  int kernel_size = 1;
  int in_channels = 1;
  int out_channels = 1;
  int dilation = 1;
  bool has_bias = false;
  bool relu = false;
  std::vector<float> weights;
  std::vector<float> bias;  // empty, or out_channels values

  // Zero weights (and zero bias when has_bias) of the right sizes.
  static ConvLayer zeros(int kernel_size, int in_channels, int out_channels,
                         bool has_bias = false, bool relu = false);

  std::size_t weight_index(int ky, int kx, int ci, int co) const {
    return ((static_cast<std::size_t>(ky) * kernel_size + kx) * in_channels +
            ci) *
               out_channels +
           co;
  }
  float weight(int ky, int kx, int ci, int co) const {
    return weights[weight_index(ky, kx, ci, co)];
  }
  float bias_at(int co) const { return bias.empty() ? 0.0f : bias[co]; }

  // Throws std::invalid_argument on even kernel size, non-positive counts,
  // dilation < 1 or wrong weight/bias lengths.
  void validate() const;
};

enum class PatchReducer { kUniformTopLeft, kMax, kAverage };

std::string_view reducer_name(PatchReducer reducer);
// Accepts "uniform", "max" and "avg"/"average".
PatchReducer parse_reducer(std::string_view name);

// Applies `reducer` to the factor x factor patch of `f` whose top-left pixel
// is (y0, x0), writing C values to `out`.
void reduce_patch(const DenseTensor& f, int y0, int x0, int factor,
                  PatchReducer reducer, std::span<float> out);

// Same-padded cross-correlation. Out-of-bounds taps read zero. The sum for
// one output element is accumulated in (ky, kx, ci) order starting from the
// bias, so results are reproducible bit for bit.
DenseTensor conv2d(const DenseTensor& input, const ConvLayer& layer);

// Same as conv2d but with the layer's dilation replaced by `dilation`.
DenseTensor conv2d(const DenseTensor& input, const ConvLayer& layer,
                   int dilation);

// Non-overlapping patch-wise downsampling by `factor`.
DenseTensor regular_downsample(const DenseTensor& f, int factor,
                               PatchReducer reducer);

// Normalized 3x3 Sobel gradient magnitude of a single-channel image. Only
// pixels whose full 3x3 window lies inside the image get a response; the
// one-pixel border of the output is zero. The response is divided by
// 4*sqrt(2) so that inputs in [0, 1] give values in [0, 1].
DenseTensor sobel_magnitude(const DenseTensor& gray);

}  // namespace mrconv

#endif  // MRCONV_TENSOR_H_
