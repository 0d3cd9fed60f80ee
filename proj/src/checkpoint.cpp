#include "segkey/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "segkey/errors.hpp"

namespace segkey {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'G', 'K', 'E', 'Y', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

void ModelProtection::validate() const {
  validate_hooks(hooks);
  if (!hooks.empty() && block) {
    throw InvalidArgument("a model is protected by hooks or by a block transform, not both");
  }
  if (block && block->block_size == 0) {
    throw InvalidArgument("block size must be >= 1");
  }
}

ModelProtection parse_protection(std::string_view text) {
  ModelProtection p;
  if (text == "none") return p;
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw InvalidArgument("protection must look like hooks=6 or shf=16, got '" +
                          std::string(text) + "'");
  }
  const std::string_view kind = text.substr(0, eq);
  std::string_view rest = text.substr(eq + 1);
  if (kind == "hooks") {
    if (rest.empty()) throw InvalidArgument("hooks= needs at least one hook id");
    for (;;) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      p.hooks.push_back(static_cast<int>(parse_size(item, "hook")));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    std::ranges::sort(p.hooks);
  } else {
    p.block = BlockScheme{parse_block_kind(kind), parse_size(rest, "block size")};
  }
  p.validate();
  return p;
}

std::string to_string(const ModelProtection& protection) {
  if (protection.block) {
    return std::string(to_string(protection.block->kind)) + "=" +
           std::to_string(protection.block->block_size);
  }
  if (protection.hooks.empty()) return "none";
  std::string out = "hooks=";
  for (std::size_t i = 0; i < protection.hooks.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(protection.hooks[i]);
  }
  return out;
}

std::string default_model_id(const ModelProtection& protection) {
  if (protection.block) {
    return std::string(to_string(protection.block->kind)) + "-b" +
           std::to_string(protection.block->block_size);
  }
  if (protection.hooks.empty()) return "baseline";
  std::string out = "model-";
  for (std::size_t i = 0; i < protection.hooks.size(); ++i) {
    if (i) out += '+';
    out += std::to_string(protection.hooks[i]);
  }
  return out;
}

std::string Checkpoint::header_json() const {
  nlohmann::json j;
  j["model_id"] = model_id;
  j["config"] = {{"in_channels", config.in_channels},
                 {"num_classes", config.num_classes},
                 {"widths", config.widths},
                 {"input_size", config.input_size}};
  j["protection"] = to_string(protection);
  return j.dump();
}

std::string Checkpoint::config_digest() const {
  const std::string header = header_json();
  const Digest d = sha256({reinterpret_cast<const std::uint8_t*>(header.data()),
                           header.size()});
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : d) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

namespace {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source_ + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }

  std::span<const std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  ckpt.params.check_matches(ckpt.config);
  Writer w;
  w.put_bytes({kMagic, sizeof(kMagic)});
  w.put<std::uint32_t>(kVersion);
  const std::string header = ckpt.header_json();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  w.put_bytes(header);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.tensors().size()));
  for (const NamedTensor& t : ckpt.params.tensors()) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.put<std::uint64_t>(d);
    for (double v : t.values) w.put<double>(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes,
                                  const std::string& source) {
  Reader r(bytes, source);
  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    r.fail("not a segkey checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = r.get<std::uint32_t>();
  const std::string header = r.get_string(header_len);

  Checkpoint ckpt;
  try {
    const auto j = nlohmann::json::parse(header);
    ckpt.model_id = j.at("model_id").get<std::string>();
    const auto& c = j.at("config");
    ckpt.config.in_channels = c.at("in_channels").get<std::size_t>();
    ckpt.config.num_classes = c.at("num_classes").get<std::size_t>();
    ckpt.config.widths = c.at("widths").get<std::array<std::size_t, 4>>();
    ckpt.config.input_size = c.at("input_size").get<std::size_t>();
    ckpt.config.validate();
    ckpt.protection = parse_protection(j.at("protection").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad header: ") + e.what());
  } catch (const InvalidArgument& e) {
    r.fail(std::string("bad header: ") + e.what());
  }

  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string(r.get<std::uint16_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("tensor rank too large");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
      n *= t.shape.back();
      if (n > (std::size_t{1} << 32)) r.fail("tensor too large");
    }
    t.values.resize(n);
    for (double& v : t.values) v = r.get<double>();
    ckpt.params.tensors().push_back(std::move(t));
  }
  if (!r.at_end()) r.fail("trailing bytes after tensors");
  ckpt.params.touch();
  try {
    ckpt.params.check_matches(ckpt.config);
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes, path.string());
}

}  // namespace segkey
