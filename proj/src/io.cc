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

#include "mrconv/io.h"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace mrconv {
namespace {

constexpr std::uint32_t kMaxDim = 1u << 16;

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FileError(path_, pos_, what);
  }

  void expect_magic(std::string_view magic) {
    need(magic.size(), "magic");
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
      fail("bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ += magic.size();
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  // A dimension in [1, kMaxDim].
  int dim(const char* what) {
    const std::size_t at = pos_;
    const std::uint32_t v = u32(what);
    if (v == 0 || v > kMaxDim) {
      throw FileError(path_, at,
                      std::string(what) + " " + std::to_string(v) +
                          " out of range");
    }
    return static_cast<int>(v);
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }

  void expect_end() const {
    if (!at_end()) {
      fail(std::to_string(bytes_.size() - pos_) + " trailing byte(s)");
    }
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      fail(std::string("truncated while reading ") + what + " (need " +
           std::to_string(n) + " byte(s), " +
           std::to_string(bytes_.size() - pos_) + " left)");
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

bool starts_with(const std::vector<std::uint8_t>& bytes, std::string_view m) {
  return bytes.size() >= m.size() &&
         std::memcmp(bytes.data(), m.data(), m.size()) == 0;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

// Calls fn(line, byte offset of the line) for every line with comments
// stripped.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    fn(trim(line), start);
    if (end == text.size()) break;
    start = end + 1;
  }
}

int parse_int(const std::string& word, const std::string& path,
              std::size_t offset, const char* what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(word, &used);
    if (used != word.size() || v < std::numeric_limits<int>::min() ||
        v > std::numeric_limits<int>::max()) {
      throw std::invalid_argument(word);
    }
    return static_cast<int>(v);
  } catch (const std::logic_error&) {
    throw FileError(path, offset,
                    std::string("expected integer ") + what + ", got '" + word +
                        "'");
  }
}

}  // namespace

FileError::FileError(std::string path, std::size_t offset,
                     const std::string& what)
    : std::runtime_error(path + ": byte " + std::to_string(offset) + ": " +
                         what),
      path_(std::move(path)),
      offset_(offset) {}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, 0, "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError(path, 0, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError(path, 0, "write failed");
}

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t) {
  ByteWriter w;
  w.magic("MRT1");
  w.u32(t.height());
  w.u32(t.width());
  w.u32(t.channels());
  for (float v : t.data()) w.f32(v);
  return w.take();
}

DenseTensor decode_tensor(const std::vector<std::uint8_t>& bytes,
                          const std::string& path) {
  ByteReader r(bytes, path);
  r.expect_magic("MRT1");
  const int h = r.dim("height");
  const int w = r.dim("width");
  const int c = r.dim("channels");
  std::vector<float> data(static_cast<std::size_t>(h) * w * c);
  for (float& v : data) v = r.f32("tensor data");
  r.expect_end();
  return DenseTensor(h, w, c, std::move(data));
}

DenseTensor read_tensor(const std::string& path) {
  return decode_tensor(read_file_bytes(path), path);
}

void write_tensor(const std::string& path, const DenseTensor& t) {
  write_file_bytes(path, encode_tensor(t));
}

DenseTensor read_image(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  if (starts_with(bytes, "P5")) return decode_pgm(bytes, path);
  return decode_tensor(bytes, path);
}

DenseTensor decode_pgm(const std::vector<std::uint8_t>& bytes,
                       const std::string& path, bool scale) {
  ByteReader r(bytes, path);
  r.expect_magic("P5");
  std::size_t pos = r.offset();
  // Header fields are whitespace separated and may be interleaved with
  // comment lines.
  const auto next_field = [&](const char* what) -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) break;
      ++pos;
    }
    if (pos == start) {
      throw FileError(path, start, std::string("expected PGM ") + what);
    }
    return v;
  };
  const long width = next_field("width");
  const long height = next_field("height");
  const long maxval = next_field("maxval");
  if (width <= 0 || height <= 0 || width > kMaxDim || height > kMaxDim) {
    throw FileError(path, pos, "PGM dimensions out of range");
  }
  if (maxval <= 0 || maxval > 65535) {
    throw FileError(path, pos, "PGM maxval out of range");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FileError(path, pos, "expected whitespace after PGM header");
  }
  ++pos;
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(width) * height * bpp;
  if (bytes.size() - pos < need) {
    throw FileError(path, bytes.size(),
                    "truncated PGM raster (need " + std::to_string(need) +
                        " bytes, " + std::to_string(bytes.size() - pos) +
                        " left)");
  }
  DenseTensor out(static_cast<int>(height), static_cast<int>(width), 1);
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    unsigned v = bytes[pos + i * bpp];
    if (bpp == 2) v = (v << 8) | bytes[pos + i * bpp + 1];
    data[i] = scale ? static_cast<float>(static_cast<double>(v) / maxval)
                    : static_cast<float>(v);
  }
  return out;
}

std::vector<std::uint8_t> encode_pgm(int rows, int cols,
                                     const std::vector<std::uint8_t>& gray) {
  const std::string header = "P5\n" + std::to_string(cols) + " " +
                             std::to_string(rows) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), gray.begin(), gray.end());
  return bytes;
}

std::vector<std::uint8_t> encode_multires(const MultiResMap& mr) {
  ByteWriter w;
  w.magic("MRM1");
  w.u32(mr.base_height());
  w.u32(mr.base_width());
  w.u32(mr.channels());
  w.u32(mr.factor());
  for (auto l : mr.levels()) w.u8(l);
  for (int y = 0; y < mr.base_height(); ++y) {
    for (int x = 0; x < mr.base_width(); ++x) {
      if (mr.is_active(y, x)) {
        for (float v : mr.active_values(y, x)) w.f32(v);
      } else {
        for (int c = 0; c < mr.channels(); ++c) w.f32(0.0f);
      }
    }
  }
  return w.take();
}

MultiResMap decode_multires(const std::vector<std::uint8_t>& bytes,
                            const std::string& path) {
  ByteReader r(bytes, path);
  r.expect_magic("MRM1");
  const int h = r.dim("height");
  const int w = r.dim("width");
  const int c = r.dim("channels");
  const std::size_t factor_at = r.offset();
  const int d = r.dim("factor");
  if (d < 2) throw FileError(path, factor_at, "factor must be >= 2");
  const std::size_t levels_at = r.offset();
  std::vector<std::uint8_t> levels(static_cast<std::size_t>(h) * w);
  int stages = 0;
  for (auto& l : levels) {
    l = r.u8("level field");
    stages = std::max<int>(stages, l);
  }
  std::vector<float> values(static_cast<std::size_t>(h) * w * c);
  for (float& v : values) v = r.f32("value plane");
  r.expect_end();
  try {
    MultiResMap mr(h, w, c, d, stages, std::move(levels), std::move(values));
    const auto violations = quadtree_violations(mr, 1);
    if (!violations.empty()) {
      throw FileError(path, levels_at,
                      "invalid level field: " + violations.front());
    }
    return mr;
  } catch (const std::overflow_error&) {
    throw FileError(path, levels_at, "level too large for the factor");
  }
}

MultiResMap read_multires(const std::string& path) {
  return decode_multires(read_file_bytes(path), path);
}

void write_multires(const std::string& path, const MultiResMap& mr) {
  write_file_bytes(path, encode_multires(mr));
}

std::vector<std::uint8_t> encode_mask(const DownsampleMask& m) {
  ByteWriter w;
  w.magic("MSK1");
  w.u32(m.rows());
  w.u32(m.cols());
  std::vector<std::uint8_t> bytes = w.take();
  const auto bits = m.bits();
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    acc |= static_cast<std::uint8_t>(bits[i] << (7 - i % 8));
    if (i % 8 == 7) {
      bytes.push_back(acc);
      acc = 0;
    }
  }
  if (bits.size() % 8 != 0) bytes.push_back(acc);
  return bytes;
}

DownsampleMask decode_mask(const std::vector<std::uint8_t>& bytes,
                           const std::string& path) {
  ByteReader r(bytes, path);
  r.expect_magic("MSK1");
  const int rows = r.dim("rows");
  const int cols = r.dim("cols");
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  std::vector<std::uint8_t> bits(n);
  std::uint8_t byte = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 8 == 0) byte = r.u8("mask bits");
    bits[i] = (byte >> (7 - i % 8)) & 1;
  }
  r.expect_end();
  return DownsampleMask(rows, cols, std::move(bits));
}

DownsampleMask read_mask(const std::string& path) {
  return decode_mask(read_file_bytes(path), path);
}

void write_mask(const std::string& path, const DownsampleMask& m) {
  write_file_bytes(path, encode_mask(m));
}

void write_mask_pgm(const std::string& path, const DownsampleMask& m) {
  std::vector<std::uint8_t> gray(m.bits().size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    gray[i] = m.bits()[i] ? 255 : 0;
  }
  write_file_bytes(path, encode_pgm(m.rows(), m.cols(), gray));
}

KeypointSet parse_keypoints(std::string_view text, const std::string& path) {
  std::vector<Pixel> points;
  for_each_line(text, [&](std::string_view line, std::size_t offset) {
    if (line.empty()) return;
    const auto words = split_words(line);
    if (words.size() != 2) {
      throw FileError(path, offset, "expected \"y x\", got '" +
                                        std::string(line) + "'");
    }
    points.push_back({parse_int(words[0], path, offset, "y"),
                      parse_int(words[1], path, offset, "x")});
  });
  return KeypointSet(std::move(points));
}

KeypointSet read_keypoints(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_keypoints(
      std::string_view(reinterpret_cast<const char*>(bytes.data()),
                       bytes.size()),
      path);
}

LabelMap read_label_map(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  const DenseTensor t = starts_with(bytes, "P5")
                            ? decode_pgm(bytes, path, /*scale=*/false)
                            : decode_tensor(bytes, path);
  if (t.channels() != 1) {
    throw FileError(path, 12, "label map must have one channel");
  }
  LabelMap map{t.height(), t.width(), {}};
  map.labels.reserve(t.size());
  for (float v : t.data()) {
    map.labels.push_back(static_cast<std::int32_t>(std::lround(v)));
  }
  return map;
}

NetworkSpec parse_network_spec(std::string_view text, const std::string& path) {
  NetworkSpec spec;
  bool saw_adaptive = false;
  for_each_line(text, [&](std::string_view line, std::size_t offset) {
    if (line.empty()) return;
    if (const auto colon = line.find(':'); colon != std::string_view::npos) {
      const std::string key(trim(line.substr(0, colon)));
      const std::string_view value = trim(line.substr(colon + 1));
      if (key == "name") {
        spec.name = std::string(value);
      } else if (key == "n_adaptive") {
        const auto words = split_words(value);
        if (words.size() != 1) {
          throw FileError(path, offset, "n_adaptive takes one integer");
        }
        spec.n_adaptive = parse_int(words[0], path, offset, "n_adaptive");
        saw_adaptive = true;
      } else if (key == "input") {
        const auto words = split_words(value);
        if (words.size() != 3) {
          throw FileError(path, offset, "input takes H W C");
        }
        spec.input = InputShape{parse_int(words[0], path, offset, "H"),
                                parse_int(words[1], path, offset, "W"),
                                parse_int(words[2], path, offset, "C")};
      } else {
        throw FileError(path, offset, "unknown header '" + key + "'");
      }
      return;
    }
    const auto words = split_words(line);
    if (words[0] == "conv") {
      if (words.size() < 4) {
        throw FileError(path, offset, "conv needs K CIN COUT");
      }
      const int k = parse_int(words[1], path, offset, "K");
      const int cin = parse_int(words[2], path, offset, "CIN");
      const int cout = parse_int(words[3], path, offset, "COUT");
      if (k <= 0 || k % 2 == 0 || cin <= 0 || cout <= 0) {
        throw FileError(path, offset,
                        "conv needs odd K and positive channel counts");
      }
      bool relu = false;
      bool bias = false;
      for (std::size_t i = 4; i < words.size(); ++i) {
        if (words[i] == "relu") {
          relu = true;
        } else if (words[i] == "bias") {
          bias = true;
        } else {
          throw FileError(path, offset, "unknown conv flag '" + words[i] + "'");
        }
      }
      spec.items.emplace_back(ConvLayer::zeros(k, cin, cout, bias, relu));
    } else if (words[0] == "down") {
      if (words.size() != 3) {
        throw FileError(path, offset, "down needs D and a reducer");
      }
      DownsampleStep step;
      step.factor = parse_int(words[1], path, offset, "D");
      if (step.factor < 2) throw FileError(path, offset, "D must be >= 2");
      try {
        step.reducer = parse_reducer(words[2]);
      } catch (const std::invalid_argument& e) {
        throw FileError(path, offset, e.what());
      }
      spec.items.emplace_back(step);
    } else {
      throw FileError(path, offset, "unknown item '" + words[0] + "'");
    }
  });
  if (!saw_adaptive) spec.n_adaptive = 0;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw FileError(path, text.size(), e.what());
  }
  return spec;
}

std::string format_network_spec(const NetworkSpec& spec) {
  std::string out;
  if (!spec.name.empty()) out += "name: " + spec.name + "\n";
  out += "n_adaptive: " + std::to_string(spec.n_adaptive) + "\n";
  if (spec.input) {
    out += "input: " + std::to_string(spec.input->height) + " " +
           std::to_string(spec.input->width) + " " +
           std::to_string(spec.input->channels) + "\n";
  }
  for (const auto& item : spec.items) {
    if (const auto* c = std::get_if<ConvLayer>(&item)) {
      out += "conv " + std::to_string(c->kernel_size) + " " +
             std::to_string(c->in_channels) + " " +
             std::to_string(c->out_channels);
      if (c->relu) out += " relu";
      if (c->has_bias) out += " bias";
      out += "\n";
    } else {
      const auto& d = std::get<DownsampleStep>(item);
      out += "down " + std::to_string(d.factor) + " " +
             std::string(reducer_name(d.reducer)) + "\n";
    }
  }
  return out;
}

NetworkSpec read_network_spec(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_network_spec(
      std::string_view(reinterpret_cast<const char*>(bytes.data()),
                       bytes.size()),
      path);
}

void write_network_spec(const std::string& path, const NetworkSpec& spec) {
  const std::string text = format_network_spec(spec);
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> encode_weights(const NetworkSpec& spec) {
  ByteWriter w;
  w.magic("MRW1");
  for (const auto& item : spec.items) {
    const auto* c = std::get_if<ConvLayer>(&item);
    if (c == nullptr) continue;
    w.u32(c->kernel_size);
    w.u32(c->in_channels);
    w.u32(c->out_channels);
    for (float v : c->weights) w.f32(v);
    for (int co = 0; co < c->out_channels; ++co) w.f32(c->bias_at(co));
  }
  return w.take();
}

void decode_weights(const std::vector<std::uint8_t>& bytes, NetworkSpec& spec,
                    const std::string& path) {
  ByteReader r(bytes, path);
  r.expect_magic("MRW1");
  int index = 0;
  for (auto& item : spec.items) {
    auto* c = std::get_if<ConvLayer>(&item);
    if (c == nullptr) continue;
    const std::size_t header_at = r.offset();
    const std::uint32_t k = r.u32("kernel size");
    const std::uint32_t cin = r.u32("in channels");
    const std::uint32_t cout = r.u32("out channels");
    if (k != static_cast<std::uint32_t>(c->kernel_size) ||
        cin != static_cast<std::uint32_t>(c->in_channels) ||
        cout != static_cast<std::uint32_t>(c->out_channels)) {
      throw FileError(path, header_at,
                      "conv " + std::to_string(index) + " is " +
                          std::to_string(k) + "/" + std::to_string(cin) + "/" +
                          std::to_string(cout) + " in the weights file but " +
                          std::to_string(c->kernel_size) + "/" +
                          std::to_string(c->in_channels) + "/" +
                          std::to_string(c->out_channels) + " in the network spec");
    }
    for (float& v : c->weights) v = r.f32("conv weights");
    std::vector<float> bias(c->out_channels);
    for (float& v : bias) v = r.f32("conv biases");
    if (c->has_bias) {
      c->bias = std::move(bias);
    } else {
      c->bias.clear();
    }
    ++index;
  }
  r.expect_end();
}

void read_weights(const std::string& path, NetworkSpec& spec) {
  decode_weights(read_file_bytes(path), spec, path);
}

void write_weights(const std::string& path, const NetworkSpec& spec) {
  write_file_bytes(path, encode_weights(spec));
}

}  // namespace mrconv
