#pragma once

#include <airl/encoder/params.hpp>

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace airl {

// Binary layout, all integers little-endian:
//   "AIRL" | u32 version | u32 metadata length | metadata (UTF-8 JSON)
//   then until EOF: u32 name length | name | u8 role | u8 rank | u64 dims[rank]
//                   | f64 payload[numel]
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  ParamSet records;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.meta == b.meta && a.records == b.records;
  }
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  U bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (std::size_t i = 0; i < sizeof bits; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view buf) : buf_(buf) {}

  bool done() const { return pos_ == buf_.size(); }

  template <class T>
  T get_le(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(U), what);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    T v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n)
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }

  std::string_view buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
  std::string out = "AIRL";
  detail::put_le(out, Checkpoint::kVersion);
  const std::string meta = c.meta.dump();
  detail::put_le(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  for (const auto& e : c.records) {
    detail::put_le(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    detail::put_le(out, static_cast<std::uint8_t>(e.role));
    detail::put_le(out, static_cast<std::uint8_t>(e.value.rank()));
    for (auto d : e.value.shape()) detail::put_le(out, static_cast<std::uint64_t>(d));
    for (double v : e.value.values()) detail::put_le(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view buf) {
  detail::Reader r(buf);
  if (r.bytes(4, "magic") != "AIRL") throw FormatError("not an AIRL checkpoint (bad magic)");
  const auto version = r.get_le<std::uint32_t>("version");
  if (version != Checkpoint::kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  const auto meta_len = r.get_le<std::uint32_t>("metadata length");
  const auto meta = r.bytes(meta_len, "metadata");
  try {
    c.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  while (!r.done()) {
    const auto name_len = r.get_le<std::uint32_t>("record name length");
    std::string name(r.bytes(name_len, "record name"));
    const auto role = r.get_le<std::uint8_t>("role tag");
    if (role > static_cast<std::uint8_t>(Role::state))
      throw FormatError("record '" + name + "': unknown role tag " + std::to_string(role));
    const auto rank = r.get_le<std::uint8_t>("rank");
    Shape shape;
    for (std::uint8_t i = 0; i < rank; ++i) shape.push_back(r.get_le<std::uint64_t>("dims"));
    Tensor t(shape);
    for (double& v : t.values()) v = r.get_le<double>("payload");
    c.records.add(std::move(name), static_cast<Role>(role), std::move(t));
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = encode_checkpoint(c);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write checkpoint '" + path.string() + "'");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("failed writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

// Records whose name starts with `prefix`, with the prefix stripped.
inline ParamSet records_with_prefix(const ParamSet& records, const std::string& prefix) {
  ParamSet out;
  for (const auto& e : records)
    if (e.name.starts_with(prefix)) out.add(e.name.substr(prefix.size()), e.role, e.value);
  return out;
}

}  // namespace airl
