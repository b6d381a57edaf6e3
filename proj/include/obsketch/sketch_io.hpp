#pragma once

// Binary sketch file format, little-endian:
//
//   "OBSK" | u16 version = 1
//   config: n d h_m N N0 s (u64) | b (f64) | N_u (u64) | p_u (f64) | seed (u64)
//           random_shift (u8) | shift_k (u64) | mode (u8)
//   r (u64) | weights: r x f64 | buckets: r*d x f64, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "obsketch/errors.hpp"
#include "obsketch/sketch.hpp"

namespace obsketch {

inline constexpr char kSketchMagic[4] = {'O', 'B', 'S', 'K'};
inline constexpr std::uint16_t kSketchVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "sketch IO assumes a little-endian host");

class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return v;
  }
  void get_bytes(void* out, std::size_t size) {
    if (bytes_.size() - pos_ < size) {
      fail(ErrorCategory::truncated, "sketch file truncated at byte " + std::to_string(pos_));
    }
    std::memcpy(out, bytes_.data() + pos_, size);
    pos_ += size;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const SketchState& state) {
  const SketchConfig& c = state.config();
  detail::ByteWriter w;
  w.put_bytes(kSketchMagic, 4);
  w.put<std::uint16_t>(kSketchVersion);
  w.put<std::uint64_t>(c.n);
  w.put<std::uint64_t>(c.d);
  w.put<std::uint64_t>(c.h_m);
  w.put<std::uint64_t>(c.N);
  w.put<std::uint64_t>(c.N0);
  w.put<std::uint64_t>(c.s);
  w.put<double>(c.b);
  w.put<std::uint64_t>(c.N_u);
  w.put<double>(c.p_u);
  w.put<std::uint64_t>(c.seed);
  w.put<std::uint8_t>(c.random_shift ? 1 : 0);
  w.put<std::uint64_t>(c.shift_k);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.mode));
  w.put<std::uint64_t>(state.rows());
  w.put_bytes(state.weights().data(), sizeof(double) * static_cast<std::size_t>(state.weights().size()));
  w.put_bytes(state.buckets().data(), sizeof(double) * static_cast<std::size_t>(state.buckets().size()));
  return w.take();
}

inline SketchState deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  char magic[4];
  if (bytes.size() < 4) detail::fail(ErrorCategory::truncated, "sketch file truncated in header");
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kSketchMagic, 4) != 0) {
    detail::fail(ErrorCategory::bad_magic, "bad magic: not an OBSK sketch file");
  }
  const auto version = r.get<std::uint16_t>();
  if (version != kSketchVersion) {
    detail::fail(ErrorCategory::version_mismatch,
                 "sketch file version " + std::to_string(version) + " is not supported");
  }
  SketchConfig c;
  c.n = r.get<std::uint64_t>();
  c.d = r.get<std::uint64_t>();
  c.h_m = r.get<std::uint64_t>();
  c.N = r.get<std::uint64_t>();
  c.N0 = r.get<std::uint64_t>();
  c.s = r.get<std::uint64_t>();
  c.b = r.get<double>();
  c.N_u = r.get<std::uint64_t>();
  c.p_u = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  c.random_shift = r.get<std::uint8_t>() != 0;
  c.shift_k = r.get<std::uint64_t>();
  const auto mode = r.get<std::uint8_t>();
  detail::require(mode <= 1, ErrorCategory::parse, "sketch file: unknown plan mode");
  c.mode = static_cast<PlanMode>(mode);
  validate(c);
  const auto rows = r.get<std::uint64_t>();
  detail::require(rows == c.rows(), ErrorCategory::parse, "sketch file: row count disagrees with config");
  // Size check up front so a corrupt header cannot trigger a huge allocation.
  const unsigned __int128 payload = static_cast<unsigned __int128>(rows) * (c.d + 1) * sizeof(double);
  if (payload > r.remaining()) detail::fail(ErrorCategory::truncated, "sketch file truncated in payload");

  Vector weights(static_cast<Eigen::Index>(rows));
  r.get_bytes(weights.data(), sizeof(double) * rows);
  RowMatrix buckets(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(c.d));
  r.get_bytes(buckets.data(), sizeof(double) * rows * c.d);
  return SketchState(c, std::move(buckets), std::move(weights));
}

inline void write_sketch_file(const std::string& path, const SketchState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::fail(ErrorCategory::io, "cannot open " + path + " for writing");
  const auto bytes = serialize(state);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) detail::fail(ErrorCategory::io, "failed writing " + path);
}

inline SketchState read_sketch_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail(ErrorCategory::io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace obsketch
