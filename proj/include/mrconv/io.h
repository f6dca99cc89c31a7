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

// File formats. All integers are 32-bit little-endian unsigned, all reals
// 32-bit little-endian IEEE-754.
//
//   MRT1  tensor:     "MRT1" H W C, then H*W*C floats in (y, x, c) order.
//   MRM1  multires:   "MRM1" H W C d, H*W level bytes, then H*W*C floats
//                     (inactive elements written as 0.0).
//   MSK1  mask:       "MSK1" rows cols, then rows*cols bits row-major,
//                     packed MSB first, last byte zero-padded.
//   MRW1  weights:    "MRW1", then per conv in order: K Cin Cout,
//                     K*K*Cin*Cout weights in (ky, kx, ci, co) order and Cout
//                     biases (zeros when the layer has none).
//   PGM   P5 binary graymap, maxval <= 65535.
//   network spec      UTF-8 text, see parse_network_spec().
//   keypoints         text, one "y x" integer pair per line.

#ifndef MRCONV_IO_H_
#define MRCONV_IO_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mrconv/masks.h"
#include "mrconv/multires.h"
#include "mrconv/network.h"
#include "mrconv/tensor.h"

namespace mrconv {

// Unreadable file or malformed content. offset is the byte position where
// parsing failed.
class FileError : public std::runtime_error {
 public:
  FileError(std::string path, std::size_t offset, const std::string& what);

  const std::string& path() const { return path_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t);
DenseTensor decode_tensor(const std::vector<std::uint8_t>& bytes,
                          const std::string& path = "<memory>");
DenseTensor read_tensor(const std::string& path);
void write_tensor(const std::string& path, const DenseTensor& t);

// MRT1 or PGM, chosen by the leading magic. PGM values are scaled to [0, 1].
DenseTensor read_image(const std::string& path);
DenseTensor decode_pgm(const std::vector<std::uint8_t>& bytes,
                       const std::string& path = "<memory>",
                       bool scale = true);
std::vector<std::uint8_t> encode_pgm(int rows, int cols,
                                     const std::vector<std::uint8_t>& gray);

std::vector<std::uint8_t> encode_multires(const MultiResMap& mr);
// The stage count is not stored; it is taken to be the maximum level.
// Maps with quadtree violations are rejected.
MultiResMap decode_multires(const std::vector<std::uint8_t>& bytes,
                            const std::string& path = "<memory>");
MultiResMap read_multires(const std::string& path);
void write_multires(const std::string& path, const MultiResMap& mr);

std::vector<std::uint8_t> encode_mask(const DownsampleMask& m);
DownsampleMask decode_mask(const std::vector<std::uint8_t>& bytes,
                           const std::string& path = "<memory>");
DownsampleMask read_mask(const std::string& path);
void write_mask(const std::string& path, const DownsampleMask& m);
// 0 (retain) is written dark, 1 (downsample) bright.
void write_mask_pgm(const std::string& path, const DownsampleMask& m);

KeypointSet parse_keypoints(std::string_view text,
                            const std::string& path = "<memory>");
KeypointSet read_keypoints(const std::string& path);

// PGM (raw gray levels) or single-channel MRT1 (values rounded).
LabelMap read_label_map(const std::string& path);

// One item per line:
//   conv K CIN COUT [relu] [bias]
//   down D {uniform|max|avg}
// Header lines "name: <text>", "n_adaptive: <n>" and optionally
// "input: H W C". '#' starts a comment. Conv weights are zero until
// filled from a weights file.
NetworkSpec parse_network_spec(std::string_view text,
                               const std::string& path = "<memory>");
std::string format_network_spec(const NetworkSpec& spec);
NetworkSpec read_network_spec(const std::string& path);
void write_network_spec(const std::string& path, const NetworkSpec& spec);

std::vector<std::uint8_t> encode_weights(const NetworkSpec& spec);
// Fills the conv weights and biases of `spec` in item order.
void decode_weights(const std::vector<std::uint8_t>& bytes, NetworkSpec& spec,
                    const std::string& path = "<memory>");
void read_weights(const std::string& path, NetworkSpec& spec);
void write_weights(const std::string& path, const NetworkSpec& spec);

}  // namespace mrconv

#endif  // MRCONV_IO_H_
