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

#ifndef MRCONV_SPARSE_CONV_H_
#define MRCONV_SPARSE_CONV_H_

#include <cstdint>

#include "mrconv/multires.h"
#include "mrconv/tensor.h"

namespace mrconv {

// Submanifold convolution over the active elements of a multi-resolution
// map. Output has the same grid, level field and active set as `mr`.
//
// For an active position p the kernel taps sit at p + (k - c) *
// stage_dilation in base coordinates. A tap on an active pixel reads that
// pixel, a tap on an inactive pixel reads its block representative, and a
// tap outside the grid reads zero. The layer's own dilation is ignored.
// Accumulation order matches conv2d, so at positions whose taps all
// resolve to the same values the result is bitwise identical.
//
// Throws std::invalid_argument on channel mismatch or when stage_dilation
// is not a power of mr.factor().
MultiResMap multires_conv(const MultiResMap& mr, const ConvLayer& layer,
                          int stage_dilation);

// Multiply-adds charged to running `layer` over `mr`:
// active elements * K^2 * Cin * Cout (border taps are not discounted).
std::uint64_t count_active_taps(const MultiResMap& mr, const ConvLayer& layer);

}  // namespace mrconv

#endif  // MRCONV_SPARSE_CONV_H_
