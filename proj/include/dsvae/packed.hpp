/*
 * Copyright 2026 The dsvae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "dsvae/binary.hpp"
#include "dsvae/dataset.hpp"
#include "dsvae/error.hpp"

namespace dsvae {

/// Packed dataset layout (all integers little-endian):
///   "SQDS" | u32 version=1 | u32 count |
///   per sequence: u32 T | u16 H | u16 W | u16 C | u16 flags | T*H*W*C f32 pixels [t,h,w,c]
///                 | if flags bit0: u32 length + UTF-8 label record
inline constexpr char kPackedMagic[4] = {'S', 'Q', 'D', 'S'};
inline constexpr std::uint32_t kPackedVersion = 1;
inline constexpr std::uint16_t kPackedHasLabels = 1;

inline std::vector<unsigned char> encode_packed(const SequenceDataset& ds) {
  binary::Writer w;
  w.bytes(kPackedMagic, 4);
  w.u32(kPackedVersion);
  if (ds.size() > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("too many sequences");
  w.u32(static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sequence& s = ds.sequences[i];
    const auto& d = s.frames.dims();
    if (d.size() != 4) throw ConfigError("sequence frames must be [T,H,W,C]");
    if (d[0] > std::numeric_limits<std::uint32_t>::max() || d[1] > 0xFFFF || d[2] > 0xFFFF || d[3] > 0xFFFF) {
      throw ConfigError("sequence '" + s.id + "' extents exceed the packed format limits");
    }
    const bool record = s.labeled() || !s.dynamic_labels.empty() || s.id != std::to_string(i);
    w.u32(static_cast<std::uint32_t>(d[0]));
    w.u16(static_cast<std::uint16_t>(d[1]));
    w.u16(static_cast<std::uint16_t>(d[2]));
    w.u16(static_cast<std::uint16_t>(d[3]));
    w.u16(record ? kPackedHasLabels : 0);
    w.f32s(s.frames.data(), s.frames.size());
    if (record) w.str32(encode_label_record(s));
  }
  return w.buffer();
}

inline SequenceDataset decode_packed(binary::Reader r) {
  if (r.fixed(4, "magic") != std::string(kPackedMagic, 4)) throw FormatError(0, "bad magic, expected SQDS");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kPackedVersion) throw FormatError(version_at, "unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32("sequence count");
  SequenceDataset ds;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t header_at = r.offset();
    const std::uint64_t t = r.u32("sequence length");
    const std::uint64_t h = r.u16("height"), w = r.u16("width"), c = r.u16("channels");
    const std::uint16_t flags = r.u16("flags");
    if (t == 0 || h == 0 || w == 0 || c == 0) throw FormatError(header_at, "zero extent in sequence header");
    if (flags & ~kPackedHasLabels) throw FormatError(header_at, "unknown flag bits");
    const std::uint64_t frame = h * w * c;
    if (t > (r.remaining() / 4) / frame) {
      throw FormatError(r.offset(), "sequence " + std::to_string(i) + " extents exceed the remaining file");
    }
    Sequence s;
    s.id = std::to_string(i);
    s.frames = Tensor<float>({t, h, w, c});
    r.f32s(s.frames.data(), s.frames.size(), "pixels");
    if (flags & kPackedHasLabels) {
      const std::size_t label_at = r.offset();
      const std::string text = r.str32("label record");
      try {
        decode_label_record(text, s);
      } catch (const ConfigError& e) {
        throw FormatError(label_at, std::string("bad label record: ") + e.what());
      }
    }
    ds.sequences.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError(r.offset(), "trailing bytes after last sequence");
  if (!ds.empty()) {
    try {
      ds.validate();
    } catch (const DataError& e) {
      throw FormatError(r.offset(), e.what());
    }
  }
  return ds;
}

inline void write_packed(const SequenceDataset& ds, const std::string& path) {
  binary::Writer w;
  const auto bytes = encode_packed(ds);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

inline SequenceDataset load_packed(const std::string& path) {
  return decode_packed(binary::Reader::from_file(path));
}

/// `<packed path>.manifest` text: generator config plus the dataset geometry.
inline void write_manifest(const SequenceDataset& ds, const std::string& path) {
  std::string text = "# generator configuration\n" + ds.generator_config;
  if (!ds.empty()) {
    text += "frame_shape = " + std::to_string(ds.height()) + "x" + std::to_string(ds.width()) + "x" +
            std::to_string(ds.channels()) + "\n";
  }
  binary::Writer w;
  w.bytes(text.data(), text.size());
  w.save(path);
}

}  // namespace dsvae
