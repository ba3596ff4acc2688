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

#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsvae/error.hpp"
#include "dsvae/keyvalues.hpp"
#include "dsvae/tensor.hpp"

namespace dsvae {

/// Ground-truth identity of a generated sequence (evaluation only).
struct StaticLabel {
  std::size_t shape = 0;
  std::size_t color = 0;
  friend bool operator==(const StaticLabel&, const StaticLabel&) = default;
};

/// Ground-truth per-frame object centre in pixels (evaluation only).
struct Position {
  double x = 0;
  double y = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

/// One sequence: frames [T,H,W,C] in [0,1] plus optional evaluation labels.
struct Sequence {
  std::string id;
  Tensor<float> frames;
  std::optional<StaticLabel> static_label;
  std::vector<Position> dynamic_labels;

  std::size_t length() const { return frames.rows(); }
  bool labeled() const { return static_label.has_value(); }

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

/// The part of a sequence training is allowed to see.
struct SequenceFrames {
  std::string_view id;
  const Tensor<float>* frames;
};

struct SequenceDataset {
  std::vector<Sequence> sequences;
  std::string generator_config;  // echoed into the manifest, not the packed file

  std::size_t size() const { return sequences.size(); }
  bool empty() const { return sequences.empty(); }
  std::size_t height() const { return sequences.at(0).frames.dim(1); }
  std::size_t width() const { return sequences.at(0).frames.dim(2); }
  std::size_t channels() const { return sequences.at(0).frames.dim(3); }

  const Sequence& find(const std::string& id) const {
    for (const auto& s : sequences) {
      if (s.id == id) return s;
    }
    throw DataError("no sequence with id '" + id + "'");
  }

  std::vector<SequenceFrames> frames_only() const {
    std::vector<SequenceFrames> out;
    out.reserve(sequences.size());
    for (const auto& s : sequences) out.push_back({s.id, &s.frames});
    return out;
  }

  /// Checks the shared-geometry and pixel-range invariants.
  void validate() const {
    for (const auto& s : sequences) {
      if (s.frames.rank() != 4) throw DataError("sequence '" + s.id + "' frames must be [T,H,W,C]");
      if (s.frames.dims()[1] != height() || s.frames.dims()[2] != width() || s.frames.dims()[3] != channels()) {
        throw DataError("sequence '" + s.id + "' frame size differs from the dataset");
      }
      for (float v : s.frames.span()) {
        if (!(v >= 0.0f && v <= 1.0f)) throw DataError("sequence '" + s.id + "' has pixels outside [0,1]");
      }
      if (!s.dynamic_labels.empty() && s.dynamic_labels.size() != s.length()) {
        throw DataError("sequence '" + s.id + "' has a dynamic label count different from its length");
      }
    }
  }

  friend bool operator==(const SequenceDataset& a, const SequenceDataset& b) {
    return a.sequences == b.sequences;
  }
};

/// Text record carrying id and labels, `key=value` per line.
inline std::string encode_label_record(const Sequence& s) {
  std::ostringstream out;
  out << "id=" << s.id << "\n";
  if (s.static_label) {
    out << "shape=" << s.static_label->shape << "\n";
    out << "color=" << s.static_label->color << "\n";
  }
  if (!s.dynamic_labels.empty()) {
    out << "positions=";
    for (std::size_t i = 0; i < s.dynamic_labels.size(); ++i) {
      if (i) out << ";";
      out << format_double(s.dynamic_labels[i].x) << "," << format_double(s.dynamic_labels[i].y);
    }
    out << "\n";
  }
  return out.str();
}

/// Inverse of encode_label_record; throws ConfigError on malformed text.
inline void decode_label_record(const std::string& text, Sequence& s) {
  KeyValues kv = KeyValues::parse(text);
  kv.take("id", s.id);
  std::size_t shape = 0, color = 0;
  const bool has_shape = kv.take_int("shape", shape);
  const bool has_color = kv.take_int("color", color);
  if (has_shape != has_color) throw ConfigError("label record needs both shape and color");
  if (has_shape) s.static_label = StaticLabel{shape, color};
  std::string positions;
  if (kv.take("positions", positions)) {
    std::istringstream in(positions);
    std::string item;
    while (std::getline(in, item, ';')) {
      const auto comma = item.find(',');
      if (comma == std::string::npos) throw ConfigError("malformed position '" + item + "'");
      try {
        s.dynamic_labels.push_back({std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1))});
      } catch (const std::exception&) {
        throw ConfigError("malformed position '" + item + "'");
      }
    }
  }
  kv.expect_consumed("label record");
}

}  // namespace dsvae
