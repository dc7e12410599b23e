#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmx/hash.hpp"

namespace cmx {

/// Depth, width and per-replicate hash seeds. Immutable once constructed.
class SketchConfig {
 public:
  SketchConfig(std::uint32_t depth, std::uint32_t width, std::vector<std::uint64_t> seeds)
      : depth_(depth), width_(width), seeds_(std::move(seeds)) {
    if (depth_ < 1) throw std::invalid_argument("sketch depth must be >= 1");
    if (width_ < 1) throw std::invalid_argument("sketch width must be >= 1");
    if (seeds_.size() != depth_) {
      throw std::invalid_argument("expected " + std::to_string(depth_) + " seeds, got " +
                                  std::to_string(seeds_.size()));
    }
    std::set<std::uint64_t> unique(seeds_.begin(), seeds_.end());
    if (unique.size() != seeds_.size()) throw std::invalid_argument("sketch seeds must be pairwise distinct");
  }

  /// Derives `depth` distinct seeds from a single master seed with splitmix64.
  static SketchConfig from_master_seed(std::uint32_t depth, std::uint32_t width, std::uint64_t master) {
    std::vector<std::uint64_t> seeds;
    std::set<std::uint64_t> seen;
    std::uint64_t state = master;
    while (seeds.size() < depth) {
      std::uint64_t s = splitmix64(state);
      if (seen.insert(s).second) seeds.push_back(s);
    }
    return SketchConfig(depth, width, std::move(seeds));
  }

  std::uint32_t depth() const { return depth_; }
  std::uint32_t width() const { return width_; }
  const std::vector<std::uint64_t>& seeds() const { return seeds_; }
  std::size_t size() const { return static_cast<std::size_t>(depth_) * width_; }

  friend bool operator==(const SketchConfig&, const SketchConfig&) = default;

 private:
  std::uint32_t depth_;
  std::uint32_t width_;
  std::vector<std::uint64_t> seeds_;
};

/// One (replicate, column) cell of the counter matrix.
struct CounterIndex {
  std::uint32_t replicate;
  std::uint32_t column;
  friend bool operator==(const CounterIndex&, const CounterIndex&) = default;
  friend auto operator<=>(const CounterIndex&, const CounterIndex&) = default;
};

/// The cells an item (or a set of items) hashes to.
using IndexSet = std::vector<CounterIndex>;

/// Sparse 0/1 row of the design matrix: flattened positions (replicate * width + column) holding a one.
using DesignRow = std::vector<std::size_t>;

/// The r x k Count+ counter matrix.
///
/// Counters are 64-bit and never decrease; every row sums to total_count().
/// Updates need exclusive access; concurrent reads are fine once writes stop.
class CountPlusSketch {
 public:
  explicit CountPlusSketch(SketchConfig config)
      : config_(std::move(config)), counters_(config_.size(), 0) {}

  const SketchConfig& config() const { return config_; }
  std::uint32_t depth() const { return config_.depth(); }
  std::uint32_t width() const { return config_.width(); }
  std::uint64_t total_count() const { return total_; }

  /// Monotone mutation counter; identifies the state an error sample was built from.
  std::uint64_t epoch() const { return epoch_; }

  std::optional<std::uint64_t> distinct_hint() const { return distinct_hint_; }
  void set_distinct_hint(std::optional<std::uint64_t> d) { distinct_hint_ = d; }

  std::uint32_t column(std::uint32_t replicate, std::string_view item) const {
    return static_cast<std::uint32_t>(xxh64(item, config_.seeds()[replicate]) % config_.width());
  }

  IndexSet indices(std::string_view item) const {
    IndexSet out;
    out.reserve(depth());
    for (std::uint32_t a = 0; a < depth(); ++a) out.push_back({a, column(a, item)});
    return out;
  }

  DesignRow design_row(std::string_view item) const {
    DesignRow row;
    row.reserve(depth());
    for (std::uint32_t a = 0; a < depth(); ++a) row.push_back(flat(a, column(a, item)));
    return row;
  }

  std::size_t flat(std::uint32_t replicate, std::uint32_t column) const {
    return static_cast<std::size_t>(replicate) * width() + column;
  }

  /// Adds `count` to the item's cell in every replicate.
  void update(std::string_view item, std::int64_t count) {
    if (count < 0) throw std::invalid_argument("count must be non-negative");
    const auto c = static_cast<std::uint64_t>(count);
    if (total_ > std::numeric_limits<std::uint64_t>::max() - c) throw std::overflow_error("total count overflow");
    // Every counter is bounded by total_, so the check above covers the cells too.
    for (std::uint32_t a = 0; a < depth(); ++a) counters_[flat(a, column(a, item))] += c;
    total_ += c;
    ++epoch_;
  }

  std::uint64_t counter(std::uint32_t replicate, std::uint32_t column) const {
    return counters_[flat(replicate, column)];
  }

  std::span<const std::uint64_t> row(std::uint32_t replicate) const {
    return std::span<const std::uint64_t>(counters_).subspan(static_cast<std::size_t>(replicate) * width(), width());
  }

  /// Row-major flattened counters.
  std::span<const std::uint64_t> counters() const { return counters_; }

  /// Counter values at an index set, in index-set order.
  std::vector<double> values_at(const IndexSet& idx) const {
    std::vector<double> v;
    v.reserve(idx.size());
    for (const auto& c : idx) v.push_back(static_cast<double>(counter(c.replicate, c.column)));
    return v;
  }

  std::vector<double> item_values(std::string_view item) const { return values_at(indices(item)); }

  /// Elementwise sum; configs (seeds included) must match.
  void merge(const CountPlusSketch& other) {
    if (!(config_ == other.config_)) throw std::invalid_argument("cannot merge sketches with different configs");
    if (total_ > std::numeric_limits<std::uint64_t>::max() - other.total_) {
      throw std::overflow_error("total count overflow");
    }
    for (std::size_t i = 0; i < counters_.size(); ++i) counters_[i] += other.counters_[i];
    total_ += other.total_;
    ++epoch_;
  }

  /// Rebuilds a sketch from raw state (deserialization); checks row sums.
  static CountPlusSketch from_state(SketchConfig config, std::uint64_t total, std::vector<std::uint64_t> counters) {
    CountPlusSketch s(std::move(config));
    if (counters.size() != s.counters_.size()) throw std::invalid_argument("counter matrix has the wrong size");
    s.counters_ = std::move(counters);
    s.total_ = total;
    for (std::uint32_t a = 0; a < s.depth(); ++a) {
      std::uint64_t sum = 0;
      for (auto v : s.row(a)) sum += v;
      if (sum != total) throw std::invalid_argument("row sum does not match total count");
    }
    return s;
  }

  friend bool operator==(const CountPlusSketch& a, const CountPlusSketch& b) {
    return a.config_ == b.config_ && a.total_ == b.total_ && a.counters_ == b.counters_;
  }

 private:
  SketchConfig config_;
  std::vector<std::uint64_t> counters_;
  std::uint64_t total_ = 0;
  std::uint64_t epoch_ = 0;
  std::optional<std::uint64_t> distinct_hint_;
};

inline CountPlusSketch merge(const CountPlusSketch& a, const CountPlusSketch& b) {
  CountPlusSketch out = a;
  out.merge(b);
  return out;
}

// ---------------------------------------------------------------------------
// Binary format "CMX1": magic, u32 r, u32 k, r x u64 seeds, u64 total,
// r*k x u64 counters (row-major), u64 xxh64 of all preceding bytes.
// All integers little-endian.

class SerializationError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, checksum, invalid };
  SerializationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
  std::uint64_t u64() { return read(8); }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t read(std::size_t n) {
    if (remaining() < n) throw SerializationError(SerializationError::Kind::truncated, "truncated sketch payload");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr char kSketchMagic[4] = {'C', 'M', 'X', '1'};

inline std::vector<std::uint8_t> serialize(const CountPlusSketch& s) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 8 + 8 * s.depth() + 8 + 8 * s.counters().size() + 8);
  out.insert(out.end(), std::begin(kSketchMagic), std::end(kSketchMagic));
  detail::put_u32(out, s.depth());
  detail::put_u32(out, s.width());
  for (auto seed : s.config().seeds()) detail::put_u64(out, seed);
  detail::put_u64(out, s.total_count());
  for (auto v : s.counters()) detail::put_u64(out, v);
  detail::put_u64(out, xxh64(out.data(), out.size(), 0));
  return out;
}

inline CountPlusSketch deserialize(std::span<const std::uint8_t> bytes) {
  using Kind = SerializationError::Kind;
  if (bytes.size() < 4) throw SerializationError(Kind::truncated, "truncated sketch payload");
  if (!std::equal(bytes.begin(), bytes.begin() + 3, kSketchMagic)) {
    throw SerializationError(Kind::bad_magic, "not a CMX sketch file");
  }
  if (bytes[3] != static_cast<std::uint8_t>(kSketchMagic[3])) {
    throw SerializationError(Kind::version_mismatch,
                             std::string("unsupported sketch format version '") + static_cast<char>(bytes[3]) + "'");
  }
  detail::ByteReader in(bytes.subspan(4));
  const std::uint32_t r = in.u32();
  const std::uint32_t k = in.u32();
  if (r == 0 || k == 0) throw SerializationError(Kind::invalid, "sketch dimensions must be positive");
  const std::size_t cells = static_cast<std::size_t>(r) * k;
  const std::size_t expected = 8ull * r + 8 + 8 * cells + 8;
  if (in.remaining() < expected) throw SerializationError(Kind::truncated, "truncated sketch payload");
  std::vector<std::uint64_t> seeds(r);
  for (auto& seed : seeds) seed = in.u64();
  const std::uint64_t total = in.u64();
  std::vector<std::uint64_t> counters(cells);
  for (auto& v : counters) v = in.u64();
  const std::size_t body = 4 + in.offset();
  const std::uint64_t stored = in.u64();
  if (in.remaining() != 0) throw SerializationError(Kind::invalid, "trailing bytes after sketch payload");
  if (stored != xxh64(bytes.data(), body, 0)) throw SerializationError(Kind::checksum, "sketch checksum mismatch");
  try {
    return CountPlusSketch::from_state(SketchConfig(r, k, std::move(seeds)), total, std::move(counters));
  } catch (const std::invalid_argument& e) {
    throw SerializationError(Kind::invalid, e.what());
  }
}

inline void write_sketch_file(const std::string& path, const CountPlusSketch& s) {
  const auto bytes = serialize(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline CountPlusSketch read_sketch_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace cmx
