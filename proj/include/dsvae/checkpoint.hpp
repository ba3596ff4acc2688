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

#include "dsvae/adam.hpp"
#include "dsvae/binary.hpp"
#include "dsvae/config.hpp"
#include "dsvae/network.hpp"
#include "dsvae/parameters.hpp"
#include "dsvae/rng.hpp"

namespace dsvae {

/// Everything needed to continue training exactly where it stopped.
/// The training step counter is adam.step.
struct Checkpoint {
  ModelConfig config;
  ParameterSet<float> params;
  AdamState<float> adam;
  Rng::State rng{};

  std::uint64_t step() const { return adam.step; }

  /// Fresh state: parameters initialized from `seed`, the same stream then drives training.
  static Checkpoint initial(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    Checkpoint c;
    c.config = cfg;
    c.params = init_parameters<float>(cfg, rng);
    c.adam = AdamState<float>::for_parameters(c.params);
    c.rng = rng.state();
    return c;
  }
};

inline constexpr char kCheckpointMagic[4] = {'S', 'Q', 'D', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_tensor_block(binary::Writer& w, const ParameterSet<float>& set) {
  w.u32(static_cast<std::uint32_t>(set.size()));
  for (const auto& e : set) {
    if (e.name.size() > 0xFFFF || e.value.rank() > 0xFF) throw ConfigError("tensor '" + e.name + "' not encodable");
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.u8(static_cast<std::uint8_t>(e.value.rank()));
    for (auto d : e.value.dims()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("tensor extent too large");
      w.u32(static_cast<std::uint32_t>(d));
    }
    w.f32s(e.value.data(), e.value.size());
  }
}

inline ParameterSet<float> read_tensor_block(binary::Reader& r) {
  ParameterSet<float> set;
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const std::uint16_t name_len = r.u16("tensor name length");
    std::string name = r.fixed(name_len, "tensor name");
    const std::uint8_t rank = r.u8("tensor rank");
    if (rank == 0) throw FormatError(at, "tensor '" + name + "' has rank 0");
    Shape dims;
    std::uint64_t total = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const std::uint32_t d = r.u32("tensor extent");
      if (d == 0) throw FormatError(r.offset() - 4, "tensor '" + name + "' has a zero extent");
      total *= d;
      if (total > r.remaining() / 4 + 1) throw FormatError(r.offset(), "tensor '" + name + "' extents exceed the file");
      dims.push_back(d);
    }
    Tensor<float> t(dims);
    r.f32s(t.data(), t.size(), "tensor data");
    if (set.contains(name)) throw FormatError(at, "duplicate tensor '" + name + "'");
    set.add(std::move(name), std::move(t));
  }
  return set;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  KeyValues kv;
  c.config.to_keys(kv);
  kv.set("adam_beta1", format_double(c.adam.beta1));
  kv.set("adam_beta2", format_double(c.adam.beta2));
  kv.set("adam_epsilon", format_double(c.adam.epsilon));
  binary::Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.str32(kv.to_text());
  detail::write_tensor_block(w, c.params);
  detail::write_tensor_block(w, c.adam.first_moment);
  detail::write_tensor_block(w, c.adam.second_moment);
  w.u64(c.adam.step);
  for (auto s : c.rng) w.u64(s);
  return w.buffer();
}

inline Checkpoint decode_checkpoint(binary::Reader r) {
  if (r.fixed(4, "magic") != std::string(kCheckpointMagic, 4)) throw FormatError(0, "bad magic, expected SQDC");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) throw FormatError(version_at, "unsupported version " + std::to_string(version));
  const std::size_t config_at = r.offset();
  Checkpoint c;
  try {
    KeyValues kv = KeyValues::parse(r.str32("config record"));
    c.config = ModelConfig::from_keys(kv);
    kv.take_double("adam_beta1", c.adam.beta1);
    kv.take_double("adam_beta2", c.adam.beta2);
    kv.take_double("adam_epsilon", c.adam.epsilon);
    kv.expect_consumed("checkpoint config");
    c.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(config_at, std::string("bad config record: ") + e.what());
  }
  const std::size_t params_at = r.offset();
  c.params = detail::read_tensor_block(r);
  try {
    check_parameters(c.config, c.params);
  } catch (const ConfigError& e) {
    throw FormatError(params_at, std::string("parameters do not match embedded config: ") + e.what());
  }
  const std::size_t m_at = r.offset();
  c.adam.first_moment = detail::read_tensor_block(r);
  const std::size_t v_at = r.offset();
  c.adam.second_moment = detail::read_tensor_block(r);
  if (!c.params.same_layout(c.adam.first_moment)) throw FormatError(m_at, "first-moment layout differs from parameters");
  if (!c.params.same_layout(c.adam.second_moment)) throw FormatError(v_at, "second-moment layout differs from parameters");
  c.adam.step = r.u64("step");
  for (auto& s : c.rng) s = r.u64("rng state");
  if (!r.at_end()) throw FormatError(r.offset(), "trailing bytes after checkpoint");
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  binary::Writer w;
  const auto bytes = encode_checkpoint(c);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(binary::Reader::from_file(path));
}

}  // namespace dsvae
