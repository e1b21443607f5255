#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include <boost/crc.hpp>
#include <json.hpp>

#include "curate/error.hpp"
#include "curate/forgetstore.hpp"
#include "curate/gate.hpp"
#include "curate/datagen.hpp"
#include "curate/text.hpp"
#include "curate/trainer.hpp"

namespace curate::io {

static_assert(std::endian::native == std::endian::little,
              "on-disk layout is little-endian; add byte swapping for this platform");

inline constexpr std::array<char, 4> kMagic = {'C', 'U', 'R', '8'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::uint16_t kStoreVersion = 1;

inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  template <typename T>
  void put_array(std::span<const T> values) {
    for (const T& v : values) put(v);
  }

  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  std::vector<T> get_array(std::size_t n) {
    need(n * sizeof(T));
    std::vector<T> out(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return out;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw Error(ErrorCode::ParseError, "unexpected end of payload");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct Section {
  std::string tag;  // up to 8 ASCII bytes: STORE, HEAD, META, ...
  std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

// Writes to a temporary file next to `path`, then renames over it.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::IoError, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

// Layout: "CUR8" u16 version u16 section count, then per section:
// tag[8] (zero padded) u64 length payload u32 crc32(payload).
inline std::vector<std::uint8_t> encode_container(const std::vector<Section>& sections) {
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic.data(), kMagic.size()));
  w.put<std::uint16_t>(kContainerVersion);
  if (sections.size() > 0xffff) throw Error(ErrorCode::InvalidArgument, "too many sections");
  w.put<std::uint16_t>(static_cast<std::uint16_t>(sections.size()));
  for (const auto& s : sections) {
    if (s.tag.empty() || s.tag.size() > 8) {
      throw Error(ErrorCode::InvalidArgument, "section tag must be 1-8 bytes");
    }
    std::array<std::uint8_t, 8> tag{};
    std::memcpy(tag.data(), s.tag.data(), s.tag.size());
    w.put_bytes(tag);
    w.put<std::uint64_t>(s.payload.size());
    w.put_bytes(s.payload);
    w.put<std::uint32_t>(crc32(s.payload));
  }
  return std::move(w.bytes());
}

inline std::vector<Section> decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw Error(ErrorCode::ParseError, "not a CUR8 container");
  }
  if (bytes.size() < 8) throw Error(ErrorCode::ChecksumError, "truncated container header");
  ByteReader r(bytes.subspan(4));
  const auto version = r.get<std::uint16_t>();
  if (version != kContainerVersion) {
    throw Error(ErrorCode::VersionError, "unsupported container version " + std::to_string(version));
  }
  const auto count = r.get<std::uint16_t>();
  std::vector<Section> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (r.remaining() < 16) throw Error(ErrorCode::ChecksumError, "truncated section header");
    const auto tag_bytes = r.get_bytes(8);
    std::string tag(reinterpret_cast<const char*>(tag_bytes.data()), 8);
    tag.erase(tag.find_last_not_of('\0') + 1);
    const auto length = r.get<std::uint64_t>();
    if (length > r.remaining() || r.remaining() - length < 4) {
      throw Error(ErrorCode::ChecksumError, "section '" + tag + "' is truncated");
    }
    const auto payload = r.get_bytes(static_cast<std::size_t>(length));
    const auto crc = r.get<std::uint32_t>();
    if (crc != crc32(payload)) {
      throw Error(ErrorCode::ChecksumError, "section '" + tag + "' fails its CRC32 check");
    }
    out.push_back({std::move(tag), std::vector<std::uint8_t>(payload.begin(), payload.end())});
  }
  if (r.remaining() != 0) throw Error(ErrorCode::ParseError, "trailing bytes after last section");
  return out;
}

inline void save_container(const std::filesystem::path& path, const std::vector<Section>& sections) {
  write_file_atomic(path, encode_container(sections));
}

inline std::vector<Section> load_container(const std::filesystem::path& path) {
  return decode_container(read_file(path));
}

inline const Section* find_section(const std::vector<Section>& sections, std::string_view tag) {
  for (const auto& s : sections) {
    if (s.tag == tag) return &s;
  }
  return nullptr;
}

// --- STORE section -------------------------------------------------------

inline std::vector<std::uint8_t> encode_store(const StoreState& state) {
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic.data(), kMagic.size()));
  w.put<std::uint16_t>(kStoreVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(state.variant));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.k));
  w.put<std::uint64_t>(state.records.size());
  if (state.variant == StoreVariant::Exact) {
    w.put_array(std::span<const float>(state.exact_rows));
  } else {
    const auto& pca = *state.pca;
    w.put_array(std::span<const double>(pca.mean));
    w.put_array(std::span<const double>(pca.components.data()));
    w.put_array(std::span<const double>(pca.explained_variance));
    w.put<std::uint64_t>(state.block.count);
    w.put_bytes(state.block.codes);
    w.put_array(std::span<const double>(state.block.scale));
    w.put_array(std::span<const double>(state.block.offset));
    w.put_array(std::span<const std::uint64_t>(state.row_record));
  }
  nlohmann::json trailer;
  trailer["records"] = nlohmann::json::array();
  for (const auto& r : state.records) {
    trailer["records"].push_back({{"id", r.id}, {"text", r.text}, {"accepted_at", r.accepted_at}});
  }
  const std::string json = trailer.dump();
  w.put<std::uint64_t>(json.size());
  w.put_bytes(json);
  return std::move(w.bytes());
}

inline StoreState decode_store(std::span<const std::uint8_t> payload) {
  if (payload.size() < 4 || std::memcmp(payload.data(), kMagic.data(), 4) != 0) {
    throw Error(ErrorCode::ParseError, "STORE section lacks its CUR8 magic");
  }
  ByteReader r(payload.subspan(4));
  const auto version = r.get<std::uint16_t>();
  if (version != kStoreVersion) {
    throw Error(ErrorCode::VersionError, "unsupported store version " + std::to_string(version));
  }
  StoreState s;
  const auto mode = r.get<std::uint8_t>();
  if (mode > 2) throw Error(ErrorCode::ParseError, "unknown store mode tag");
  s.variant = static_cast<StoreVariant>(mode);
  s.dim = r.get<std::uint32_t>();
  s.k = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (s.variant == StoreVariant::Exact) {
    s.exact_rows = r.get_array<float>(static_cast<std::size_t>(count * s.dim));
  } else {
    PcaTransform pca;
    pca.mean = r.get_array<double>(s.dim);
    pca.components = Matrix(s.k, s.dim);
    pca.components.data() = r.get_array<double>(s.k * s.dim);
    pca.explained_variance = r.get_array<double>(s.k);
    s.pca = std::move(pca);
    s.block.count = static_cast<std::size_t>(r.get<std::uint64_t>());
    s.block.width = s.k;
    const auto codes = r.get_bytes(s.block.count * s.k);
    s.block.codes.assign(codes.begin(), codes.end());
    s.block.scale = r.get_array<double>(s.k);
    s.block.offset = r.get_array<double>(s.k);
    s.row_record = r.get_array<std::uint64_t>(s.block.count);
  }
  const auto json_len = r.get<std::uint64_t>();
  const auto json_bytes = r.get_bytes(static_cast<std::size_t>(json_len));
  try {
    const auto trailer = nlohmann::json::parse(json_bytes.begin(), json_bytes.end());
    for (const auto& rec : trailer.at("records")) {
      s.records.push_back({rec.at("id").get<std::string>(), rec.at("text").get<std::string>(),
                           rec.at("accepted_at").get<std::int64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad STORE trailer: ") + e.what());
  }
  if (s.records.size() != count) {
    throw Error(ErrorCode::ParseError, "STORE trailer record count does not match header");
  }
  return s;
}

// --- HEAD section --------------------------------------------------------

inline std::vector<std::uint8_t> encode_head(const ProjectionHead& head) {
  ByteWriter w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(head.out_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(head.in_dim()));
  w.put_array(std::span<const double>(head.weight()));
  w.put_array(std::span<const double>(head.bias()));
  return std::move(w.bytes());
}

inline ProjectionHead decode_head(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  const auto out = r.get<std::uint32_t>();
  const auto in = r.get<std::uint32_t>();
  auto weight = r.get_array<double>(static_cast<std::size_t>(out) * in);
  auto bias = r.get_array<double>(out);
  return ProjectionHead(out, in, std::move(weight), std::move(bias));
}

// --- whole files ---------------------------------------------------------

inline void save_store(const std::filesystem::path& path, const ForgetStore& store,
                       const nlohmann::json& meta = nlohmann::json::object()) {
  std::vector<Section> sections;
  sections.push_back({"STORE", encode_store(store.export_state())});
  const std::string m = meta.dump();
  sections.push_back({"META", std::vector<std::uint8_t>(m.begin(), m.end())});
  save_container(path, sections);
}

inline std::unique_ptr<ForgetStore> load_store(const std::filesystem::path& path,
                                               std::size_t capacity = ForgetStore::kDefaultCapacity) {
  const auto sections = load_container(path);
  const auto* s = find_section(sections, "STORE");
  if (!s) throw Error(ErrorCode::ParseError, path.string() + " has no STORE section");
  return ForgetStore::from_state(decode_store(s->payload), capacity);
}

inline void save_head(const std::filesystem::path& path, const ProjectionHead& head,
                      const nlohmann::json& meta = nlohmann::json::object()) {
  std::vector<Section> sections;
  sections.push_back({"HEAD", encode_head(head)});
  const std::string m = meta.dump();
  sections.push_back({"META", std::vector<std::uint8_t>(m.begin(), m.end())});
  save_container(path, sections);
}

inline ProjectionHead load_head(const std::filesystem::path& path) {
  const auto sections = load_container(path);
  const auto* s = find_section(sections, "HEAD");
  if (!s) throw Error(ErrorCode::ParseError, path.string() + " has no HEAD section");
  return decode_head(s->payload);
}

inline nlohmann::json load_meta(const std::filesystem::path& path) {
  const auto sections = load_container(path);
  const auto* s = find_section(sections, "META");
  if (!s) return nlohmann::json::object();
  return nlohmann::json::parse(s->payload.begin(), s->payload.end());
}

// --- JSONL datasets ------------------------------------------------------

inline nlohmann::json to_json(const LabeledPair& p) {
  nlohmann::json j{{"a", p.text_a}, {"b", p.text_b}, {"label", p.label},
                   {"type", p.pair_type}, {"seed_id", p.seed_id}};
  if (!p.seed_id_b.empty()) j["seed_id_b"] = p.seed_id_b;
  return j;
}

inline LabeledPair pair_from_json(const nlohmann::json& j) {
  LabeledPair p;
  p.text_a = j.at("a").get<std::string>();
  p.text_b = j.at("b").get<std::string>();
  p.label = j.at("label").get<int>();
  p.pair_type = j.at("type").get<int>();
  p.seed_id = j.at("seed_id").get<std::string>();
  if (j.contains("seed_id_b")) p.seed_id_b = j["seed_id_b"].get<std::string>();
  validate(p);
  return p;
}

inline void save_dataset(const std::filesystem::path& path, const TrainingDataset& dataset) {
  std::string out;
  for (const auto& p : dataset) {
    out += to_json(p).dump();
    out += '\n';
  }
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
}

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct DatasetLoad {
  TrainingDataset dataset;
  std::vector<LineError> skipped;  // lenient mode only
};

// Strict mode throws ParseError naming the first bad line; lenient mode
// skips bad lines and reports them.
inline DatasetLoad load_dataset(const std::filesystem::path& path, bool strict = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  DatasetLoad out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    try {
      out.dataset.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      const std::string msg = "line " + std::to_string(line_no) + ": " + e.what();
      if (strict) throw Error(ErrorCode::ParseError, path.string() + " " + msg);
      out.skipped.push_back({line_no, e.what()});
    }
  }
  return out;
}

// Seeds: JSONL with {"id", "question", "answer"?}, or plain text with one
// question per line (ids are then "s<line>").
inline std::vector<SeedQuestion> load_seeds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<SeedQuestion> seeds;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '{') {
      try {
        const auto j = nlohmann::json::parse(t);
        SeedQuestion s;
        s.id = j.contains("id") ? j["id"].get<std::string>() : "s" + std::to_string(line_no);
        s.text = j.at("question").get<std::string>();
        if (j.contains("answer") && j["answer"].is_string()) s.answer = j["answer"].get<std::string>();
        if (s.text.empty()) throw Error(ErrorCode::ParseError, "empty question");
        seeds.push_back(std::move(s));
      } catch (const std::exception& e) {
        throw Error(ErrorCode::ParseError,
                    path.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
    } else {
      seeds.push_back({"s" + std::to_string(line_no), t, std::nullopt});
    }
  }
  return seeds;
}

inline RefusalSet load_refusals(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return RefusalSet::parse(ss.str());
}

}  // namespace curate::io
