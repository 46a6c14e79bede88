#pragma once

// Data model for embedded demonstrations: schema-typed action records,
// embedding/action frames grouped into trajectories, and the DemoSet that
// the search index is built from. Includes the canonical binary ".sbc"
// serialization (bit-exact, deterministic) and a JSONL debug format.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sbc/prng.hpp"

namespace sbc {

using Embedding = std::vector<float>;

enum class ControlKind { boolean, real };

struct SchemaEntry {
  std::string name;
  ControlKind kind = ControlKind::boolean;
  float min_value = 0.0f;  // real controls only
  float max_value = 0.0f;
  bool operator==(const SchemaEntry&) const = default;
};

struct ActionSchema {
  std::vector<SchemaEntry> entries;

  int index_of(std::string_view name) const {
    for (size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  bool operator==(const ActionSchema&) const = default;
};

using ControlValue = std::variant<bool, float>;

// Control values stored in schema order. Lexicographic comparison of
// `values` is the canonical total order on actions of one schema.
struct ActionRecord {
  std::vector<ControlValue> values;
  bool operator==(const ActionRecord&) const = default;
};

// Record with every control at its default (false / min_value).
inline ActionRecord default_action(const ActionSchema& schema) {
  ActionRecord rec;
  rec.values.reserve(schema.entries.size());
  for (const auto& e : schema.entries) {
    if (e.kind == ControlKind::boolean) {
      rec.values.emplace_back(false);
    } else {
      rec.values.emplace_back(e.min_value);
    }
  }
  return rec;
}

inline void set_control(ActionRecord& rec, const ActionSchema& schema,
                        std::string_view name, ControlValue value) {
  int idx = schema.index_of(name);
  if (idx < 0) throw std::invalid_argument("unknown control: " + std::string(name));
  rec.values.at(static_cast<size_t>(idx)) = value;
}

struct Frame {
  Embedding embedding;
  ActionRecord action;
  bool operator==(const Frame&) const = default;
};

struct Trajectory {
  uint64_t id = 0;
  std::vector<Frame> frames;
  bool operator==(const Trajectory&) const = default;
};

struct DemoSet {
  uint32_t dimension = 0;
  ActionSchema schema;
  std::vector<Trajectory> trajectories;

  size_t total_frames() const {
    size_t n = 0;
    for (const auto& t : trajectories) n += t.frames.size();
    return n;
  }

  bool operator==(const DemoSet&) const = default;
};

// Pointer into a DemoSet: (trajectory id, frame offset).
struct SituationRef {
  uint64_t traj_id = 0;
  uint32_t offset = 0;
  auto operator<=>(const SituationRef&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  int64_t traj_id = -1;      // -1 when not tied to a trajectory
  int64_t frame_index = -1;  // -1 when not tied to a frame
  std::string rule;

  std::string to_string() const {
    std::ostringstream os;
    if (traj_id >= 0) os << "traj " << traj_id << " ";
    if (frame_index >= 0) os << "frame " << frame_index << " ";
    os << rule;
    return os.str();
  }
};

inline std::vector<Violation> validate(const DemoSet& demos) {
  std::vector<Violation> out;
  if (demos.dimension == 0) {
    out.push_back({-1, -1, "dimension must be positive"});
  }
  std::set<std::string> names;
  for (const auto& e : demos.schema.entries) {
    if (e.name.empty()) out.push_back({-1, -1, "empty control name"});
    if (!names.insert(e.name).second) {
      out.push_back({-1, -1, "duplicate control name " + e.name});
    }
    if (e.kind == ControlKind::real && !(e.min_value < e.max_value)) {
      out.push_back({-1, -1, "control " + e.name + ": min must be < max"});
    }
  }
  if (demos.trajectories.empty()) {
    out.push_back({-1, -1, "empty demo set"});
  }
  std::set<uint64_t> ids;
  for (const auto& traj : demos.trajectories) {
    int64_t tid = static_cast<int64_t>(traj.id);
    if (!ids.insert(traj.id).second) {
      out.push_back({tid, -1, "duplicate id " + std::to_string(traj.id)});
    }
    if (traj.frames.empty()) {
      out.push_back({tid, -1, "empty trajectory"});
      continue;
    }
    for (size_t f = 0; f < traj.frames.size(); ++f) {
      const Frame& frame = traj.frames[f];
      int64_t fi = static_cast<int64_t>(f);
      if (frame.embedding.size() != demos.dimension) {
        out.push_back({tid, fi, "embedding length mismatch"});
      }
      for (float v : frame.embedding) {
        if (!std::isfinite(v)) {
          out.push_back({tid, fi, "non-finite"});
          break;
        }
      }
      const auto& vals = frame.action.values;
      if (vals.size() != demos.schema.entries.size()) {
        out.push_back({tid, fi, "action does not match schema"});
        continue;
      }
      for (size_t c = 0; c < vals.size(); ++c) {
        const SchemaEntry& e = demos.schema.entries[c];
        if (e.kind == ControlKind::boolean) {
          if (!std::holds_alternative<bool>(vals[c])) {
            out.push_back({tid, fi, "control " + e.name + ": expected boolean"});
          }
        } else {
          if (!std::holds_alternative<float>(vals[c])) {
            out.push_back({tid, fi, "control " + e.name + ": expected real"});
          } else {
            float v = std::get<float>(vals[c]);
            if (!std::isfinite(v)) {
              out.push_back({tid, fi, "control " + e.name + ": non-finite"});
            } else if (v < e.min_value || v > e.max_value) {
              out.push_back({tid, fi, "control " + e.name + ": out of range"});
            }
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary format ".sbc", little-endian.
//
//   magic "SBCD" | u32 version=1 | u32 dimension | u32 schema_len |
//   schema JSON (UTF-8, ordered array of {name, kind, min?, max?}) |
//   u32 trajectory count | per trajectory: u64 id, u32 frame count,
//   frames as [d x f32 embedding][booleans as u8 in schema order, then
//   reals as f32 in schema order].

namespace detail {

inline void put_u32(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64(std::string& buf, uint64_t v) {
  put_u32(buf, static_cast<uint32_t>(v & 0xffffffffull));
  put_u32(buf, static_cast<uint32_t>(v >> 32));
}

inline void put_f32(std::string& buf, float v) {
  put_u32(buf, std::bit_cast<uint32_t>(v));
}

class ByteReader {
 public:
  ByteReader(const std::string& data) : data_(data) {}

  size_t offset() const { return pos_; }
  bool exhausted() const { return pos_ >= data_.size(); }

  void take(void* dst, size_t n, const char* what) {
    if (pos_ + n > data_.size()) {
      throw std::runtime_error("truncated file at byte " + std::to_string(pos_) +
                               " while reading " + what);
    }
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  uint32_t u32(const char* what) {
    unsigned char b[4];
    take(b, 4, what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }

  uint64_t u64(const char* what) {
    uint64_t lo = u32(what);
    uint64_t hi = u32(what);
    return lo | (hi << 32);
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  uint8_t u8(const char* what) {
    unsigned char b;
    take(&b, 1, what);
    return b;
  }

  std::string bytes(size_t n, const char* what) {
    std::string s(n, '\0');
    take(s.data(), n, what);
    return s;
  }

 private:
  const std::string& data_;
  size_t pos_ = 0;
};

inline nlohmann::json schema_to_json(const ActionSchema& schema) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : schema.entries) {
    nlohmann::json obj;
    obj["name"] = e.name;
    obj["kind"] = e.kind == ControlKind::boolean ? "boolean" : "real";
    if (e.kind == ControlKind::real) {
      obj["min"] = static_cast<double>(e.min_value);
      obj["max"] = static_cast<double>(e.max_value);
    }
    arr.push_back(obj);
  }
  return arr;
}

inline ActionSchema schema_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw std::runtime_error("schema JSON is not an array");
  ActionSchema schema;
  for (const auto& obj : arr) {
    SchemaEntry e;
    e.name = obj.at("name").get<std::string>();
    std::string kind = obj.at("kind").get<std::string>();
    if (kind == "boolean") {
      e.kind = ControlKind::boolean;
    } else if (kind == "real") {
      e.kind = ControlKind::real;
      e.min_value = static_cast<float>(obj.at("min").get<double>());
      e.max_value = static_cast<float>(obj.at("max").get<double>());
    } else {
      throw std::runtime_error("unknown control kind: " + kind);
    }
    schema.entries.push_back(std::move(e));
  }
  return schema;
}

}  // namespace detail

inline constexpr char kMagic[4] = {'S', 'B', 'C', 'D'};
inline constexpr uint32_t kFormatVersion = 1;

inline std::string serialize(const DemoSet& demos) {
  auto violations = validate(demos);
  if (!violations.empty()) {
    throw std::invalid_argument("cannot save invalid demo set: " +
                                violations.front().to_string());
  }
  std::string buf;
  buf.append(kMagic, 4);
  detail::put_u32(buf, kFormatVersion);
  detail::put_u32(buf, demos.dimension);
  std::string schema_json = detail::schema_to_json(demos.schema).dump();
  detail::put_u32(buf, static_cast<uint32_t>(schema_json.size()));
  buf.append(schema_json);
  detail::put_u32(buf, static_cast<uint32_t>(demos.trajectories.size()));
  for (const auto& traj : demos.trajectories) {
    detail::put_u64(buf, traj.id);
    detail::put_u32(buf, static_cast<uint32_t>(traj.frames.size()));
    for (const auto& frame : traj.frames) {
      for (float v : frame.embedding) detail::put_f32(buf, v);
      for (size_t c = 0; c < demos.schema.entries.size(); ++c) {
        if (demos.schema.entries[c].kind == ControlKind::boolean) {
          buf.push_back(std::get<bool>(frame.action.values[c]) ? 1 : 0);
        }
      }
      for (size_t c = 0; c < demos.schema.entries.size(); ++c) {
        if (demos.schema.entries[c].kind == ControlKind::real) {
          detail::put_f32(buf, std::get<float>(frame.action.values[c]));
        }
      }
    }
  }
  return buf;
}

// `check` re-validates after decoding; pass false to inspect a structurally
// well-formed file whose content may violate the model rules.
inline DemoSet deserialize(const std::string& data, bool check = true) {
  detail::ByteReader r(data);
  char magic[4];
  r.take(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad magic");
  uint32_t version = r.u32("version");
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported format version " + std::to_string(version));
  }
  DemoSet demos;
  demos.dimension = r.u32("dimension");
  uint32_t schema_len = r.u32("schema length");
  std::string schema_json = r.bytes(schema_len, "schema JSON");
  try {
    demos.schema = detail::schema_from_json(nlohmann::json::parse(schema_json));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed schema JSON: ") + e.what());
  }
  uint32_t traj_count = r.u32("trajectory count");
  demos.trajectories.reserve(traj_count);
  for (uint32_t t = 0; t < traj_count; ++t) {
    Trajectory traj;
    traj.id = r.u64("trajectory id");
    uint32_t frame_count = r.u32("frame count");
    traj.frames.reserve(frame_count);
    for (uint32_t f = 0; f < frame_count; ++f) {
      Frame frame;
      frame.embedding.resize(demos.dimension);
      for (uint32_t i = 0; i < demos.dimension; ++i) {
        frame.embedding[i] = r.f32("embedding");
      }
      frame.action = default_action(demos.schema);
      for (size_t c = 0; c < demos.schema.entries.size(); ++c) {
        if (demos.schema.entries[c].kind == ControlKind::boolean) {
          uint8_t b = r.u8("boolean control");
          if (b > 1) throw std::runtime_error("malformed boolean control");
          frame.action.values[c] = (b != 0);
        }
      }
      for (size_t c = 0; c < demos.schema.entries.size(); ++c) {
        if (demos.schema.entries[c].kind == ControlKind::real) {
          frame.action.values[c] = r.f32("real control");
        }
      }
      traj.frames.push_back(std::move(frame));
    }
    demos.trajectories.push_back(std::move(traj));
  }
  if (!r.exhausted()) {
    throw std::runtime_error("trailing bytes at offset " + std::to_string(r.offset()));
  }
  if (check) {
    auto violations = validate(demos);
    if (!violations.empty()) {
      throw std::runtime_error("loaded demo set is invalid: " +
                               violations.front().to_string());
    }
  }
  return demos;
}

inline void save(const DemoSet& demos, const std::filesystem::path& path) {
  std::string bytes = serialize(demos);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline DemoSet load(const std::filesystem::path& path, bool check = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str(), check);
}

// ---------------------------------------------------------------------------
// JSONL debug format: header line {dimension, schema, version}, then one
// trajectory per line. The binary format is canonical; this one is for
// eyeballing and quick scripting.

inline void save_jsonl(const DemoSet& demos, const std::filesystem::path& path) {
  auto violations = validate(demos);
  if (!violations.empty()) {
    throw std::invalid_argument("cannot save invalid demo set: " +
                                violations.front().to_string());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  nlohmann::json header;
  header["version"] = kFormatVersion;
  header["dimension"] = demos.dimension;
  header["schema"] = detail::schema_to_json(demos.schema);
  out << header.dump() << "\n";
  for (const auto& traj : demos.trajectories) {
    nlohmann::json line;
    line["id"] = traj.id;
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& frame : traj.frames) {
      nlohmann::json jf;
      nlohmann::json emb = nlohmann::json::array();
      for (float v : frame.embedding) emb.push_back(static_cast<double>(v));
      jf["embedding"] = emb;
      nlohmann::json act;
      for (size_t c = 0; c < demos.schema.entries.size(); ++c) {
        const auto& e = demos.schema.entries[c];
        if (e.kind == ControlKind::boolean) {
          act[e.name] = std::get<bool>(frame.action.values[c]);
        } else {
          act[e.name] = static_cast<double>(std::get<float>(frame.action.values[c]));
        }
      }
      jf["action"] = act;
      frames.push_back(jf);
    }
    line["frames"] = frames;
    out << line.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline DemoSet load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty JSONL file");
  DemoSet demos;
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("version").get<uint32_t>() != kFormatVersion) {
      throw std::runtime_error("unsupported format version");
    }
    demos.dimension = header.at("dimension").get<uint32_t>();
    demos.schema = detail::schema_from_json(header.at("schema"));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json jt = nlohmann::json::parse(line);
      Trajectory traj;
      traj.id = jt.at("id").get<uint64_t>();
      for (const auto& jf : jt.at("frames")) {
        Frame frame;
        for (const auto& v : jf.at("embedding")) {
          frame.embedding.push_back(static_cast<float>(v.get<double>()));
        }
        frame.action = default_action(demos.schema);
        const auto& act = jf.at("action");
        for (size_t c = 0; c < demos.schema.entries.size(); ++c) {
          const auto& e = demos.schema.entries[c];
          if (e.kind == ControlKind::boolean) {
            frame.action.values[c] = act.at(e.name).get<bool>();
          } else {
            frame.action.values[c] = static_cast<float>(act.at(e.name).get<double>());
          }
        }
        traj.frames.push_back(std::move(frame));
      }
      demos.trajectories.push_back(std::move(traj));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed JSONL: ") + e.what());
  }
  auto violations = validate(demos);
  if (!violations.empty()) {
    throw std::runtime_error("loaded demo set is invalid: " +
                             violations.front().to_string());
  }
  return demos;
}

// ---------------------------------------------------------------------------
// Subsets.
//
// seed == 0 selects the leading prefix (first n trajectories in stored
// order). Any other seed draws a uniform n-subset with a partial
// Fisher-Yates shuffle on Pcg32(seed, streams::kSubset): for i in [0, n),
// j = i + uniform_below(count - i), swap positions i and j; the first n
// positions are the sample, emitted in ascending stored order.

inline DemoSet subset(const DemoSet& demos, uint32_t n, uint64_t seed) {
  uint32_t count = static_cast<uint32_t>(demos.trajectories.size());
  if (n < 1 || n > count) {
    throw std::invalid_argument("subset size " + std::to_string(n) +
                                " out of range [1, " + std::to_string(count) + "]");
  }
  std::vector<uint32_t> positions(count);
  for (uint32_t i = 0; i < count; ++i) positions[i] = i;
  if (seed != 0) {
    Pcg32 rng(seed, streams::kSubset);
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t j = i + rng.uniform_below(count - i);
      std::swap(positions[i], positions[j]);
    }
    std::sort(positions.begin(), positions.begin() + n);
  }
  DemoSet out;
  out.dimension = demos.dimension;
  out.schema = demos.schema;
  out.trajectories.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    out.trajectories.push_back(demos.trajectories[positions[i]]);
  }
  return out;
}

}  // namespace sbc
