#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <map>
#include <random>
#include <sstream>

#include "cmx/hash.hpp"
#include "cmx/io.hpp"
#include "cmx/sketch.hpp"

using namespace cmx;

namespace {

std::string hundred_bytes() {
  std::string s;
  for (int i = 0; i < 100; ++i) s.push_back(static_cast<char>(i));
  return s;
}

CountPlusSketch random_sketch(std::uint32_t r, std::uint32_t k, std::uint64_t seed, int updates) {
  CountPlusSketch s(SketchConfig::from_master_seed(r, k, seed));
  std::mt19937_64 rng(seed);
  for (int i = 0; i < updates; ++i) s.update("x" + std::to_string(rng() % 500), static_cast<std::int64_t>(rng() % 20));
  return s;
}

}  // namespace

// Reference values from the xxhash reference implementation.
TEST(Hash, Xxh64KnownVectorsSeedZero) {
  EXPECT_EQ(xxh64("", 0), 0xef46db3751d8e999ULL);
  EXPECT_EQ(xxh64("a", 0), 0xd24ec4f1a98c6e5bULL);
  EXPECT_EQ(xxh64("abc", 0), 0x44bc2cf5ad770999ULL);
  EXPECT_EQ(xxh64("Nobody inspects the spammish repetition", 0), 0xfbcea83c8a378bf1ULL);
  EXPECT_EQ(xxh64(hundred_bytes(), 0), 0x6ac1e58032166597ULL);
}

TEST(Hash, Xxh64KnownVectorsSeeded) {
  EXPECT_EQ(xxh64("", 12345), 0x95584af7701f808dULL);
  EXPECT_EQ(xxh64("a", 12345), 0x747b860523d69ab6ULL);
  EXPECT_EQ(xxh64("abc", 12345), 0x1700e64f6f23509ULL);
  EXPECT_EQ(xxh64("Nobody inspects the spammish repetition", 12345), 0x81a876428a9313bULL);
  EXPECT_EQ(xxh64(hundred_bytes(), 12345), 0x28ba1ae2de4de27ULL);
}

TEST(Sketch, ConfigValidation) {
  EXPECT_THROW(SketchConfig(0, 4, {}), std::invalid_argument);
  EXPECT_THROW(SketchConfig(2, 0, {1, 2}), std::invalid_argument);
  EXPECT_THROW(SketchConfig(2, 4, {1}), std::invalid_argument);
  EXPECT_THROW(SketchConfig(2, 4, {7, 7}), std::invalid_argument);
}

TEST(Sketch, SingleUpdateTouchesOneCounterPerRow) {
  CountPlusSketch s(SketchConfig(2, 4, {11, 22}));
  s.update("a", 3);
  for (std::uint32_t a = 0; a < 2; ++a) {
    int nonzero = 0;
    std::uint64_t sum = 0;
    for (auto v : s.row(a)) {
      nonzero += v != 0;
      sum += v;
    }
    EXPECT_EQ(nonzero, 1);
    EXPECT_EQ(sum, 3u);
    EXPECT_EQ(s.counter(a, s.column(a, "a")), 3u);
  }
  EXPECT_EQ(s.total_count(), 3u);
}

TEST(Sketch, ZeroUpdateLeavesCountersAlone) {
  CountPlusSketch s(SketchConfig(2, 4, {11, 22}));
  s.update("a", 0);
  for (auto v : s.counters()) EXPECT_EQ(v, 0u);
  EXPECT_EQ(s.total_count(), 0u);
}

TEST(Sketch, RejectsNegativeCount) {
  CountPlusSketch s(SketchConfig(2, 4, {11, 22}));
  EXPECT_THROW(s.update("a", -1), std::invalid_argument);
}

TEST(Sketch, OverflowIsAnError) {
  CountPlusSketch s(SketchConfig(1, 2, {5}));
  s.update("a", std::numeric_limits<std::int64_t>::max());
  s.update("b", std::numeric_limits<std::int64_t>::max());
  EXPECT_THROW(s.update("c", 2), std::overflow_error);
}

TEST(Sketch, RowSumsMatchIndependentTotal) {
  CountPlusSketch s(SketchConfig::from_master_seed(5, 37, 9));
  std::mt19937_64 rng(3);
  std::uint64_t total = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto c = static_cast<std::int64_t>(rng() % 100);
    total += static_cast<std::uint64_t>(c);
    s.update("item" + std::to_string(rng() % 300), c);
  }
  EXPECT_EQ(s.total_count(), total);
  for (std::uint32_t a = 0; a < s.depth(); ++a) {
    std::uint64_t sum = 0;
    for (auto v : s.row(a)) sum += v;
    EXPECT_EQ(sum, total);
  }
}

TEST(Sketch, IndicesDeterministicAcrossInstances) {
  const auto cfg = SketchConfig::from_master_seed(4, 100, 42);
  CountPlusSketch a(cfg), b(cfg);
  for (int i = 0; i < 50; ++i) {
    const auto item = "k" + std::to_string(i);
    EXPECT_EQ(a.indices(item), a.indices(item));
    EXPECT_EQ(a.indices(item), b.indices(item));
  }
  const auto idx = a.indices("abc");
  ASSERT_EQ(idx.size(), 4u);
  for (std::uint32_t r = 0; r < 4; ++r) {
    EXPECT_EQ(idx[r].replicate, r);
    EXPECT_LT(idx[r].column, 100u);
  }
}

TEST(Sketch, ColumnsPassChiSquareUniformity) {
  constexpr std::uint32_t k = 64;
  CountPlusSketch s(SketchConfig(1, k, {0x9e3779b97f4a7c15ULL}));
  std::vector<double> observed(k, 0.0);
  std::mt19937_64 rng(17);
  constexpr int n = 100000;
  for (int i = 0; i < n; ++i) observed[s.column(0, std::to_string(rng()))] += 1.0;
  const double expected = static_cast<double>(n) / k;
  double stat = 0.0;
  for (double o : observed) stat += (o - expected) * (o - expected) / expected;
  const double critical = boost::math::quantile(boost::math::chi_squared(k - 1), 0.99);
  EXPECT_LT(stat, critical);
}

TEST(Sketch, ReplicateCollisionsAreIndependent) {
  constexpr std::uint32_t k = 50;
  CountPlusSketch s(SketchConfig::from_master_seed(2, k, 5));
  std::mt19937_64 rng(8);
  constexpr int pairs = 200000;
  int both = 0, first = 0;
  for (int i = 0; i < pairs; ++i) {
    const auto x = std::to_string(rng()), y = std::to_string(rng());
    const bool c0 = s.column(0, x) == s.column(0, y);
    const bool c1 = s.column(1, x) == s.column(1, y);
    first += c0;
    both += c0 && c1;
  }
  // A pair colliding in replicate 0 should collide in replicate 1 with probability 1/k.
  const double p = 1.0 / k;
  const double rate = static_cast<double>(both) / first;
  EXPECT_NEAR(rate, p, 3.0 * std::sqrt(p * (1 - p) / first));
  const double rate0 = static_cast<double>(first) / pairs;
  EXPECT_NEAR(rate0, p, 3.0 * std::sqrt(p * (1 - p) / pairs));
}

TEST(Sketch, DesignRowSingleReplicate) {
  CountPlusSketch s(SketchConfig(1, 4, {123}));
  const auto row = s.design_row("z");
  ASSERT_EQ(row.size(), 1u);
  EXPECT_EQ(row[0], s.column(0, "z"));
  std::vector<int> dense(4, 0);
  dense[row[0]] = 1;
  EXPECT_EQ(std::accumulate(dense.begin(), dense.end(), 0), 1);
}

TEST(Sketch, CountersEqualDesignTimesCounts) {
  CountPlusSketch s(SketchConfig::from_master_seed(3, 16, 77));
  std::map<std::string, std::uint64_t> truth;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto item = "w" + std::to_string(i);
    const auto c = rng() % 40;
    truth[item] += c;
    s.update(item, static_cast<std::int64_t>(c));
  }
  std::vector<std::uint64_t> v(s.counters().size(), 0);
  for (const auto& [item, c] : truth) {
    const auto row = s.design_row(item);
    EXPECT_EQ(row.size(), 3u);
    for (auto i : row) v[i] += c;
  }
  EXPECT_TRUE(std::equal(v.begin(), v.end(), s.counters().begin()));
}

TEST(Sketch, MinIsUpperBound) {
  CountPlusSketch s(SketchConfig::from_master_seed(4, 8, 2));
  std::map<std::string, std::uint64_t> truth;
  for (int i = 0; i < 50; ++i) {
    truth["u" + std::to_string(i)] += static_cast<std::uint64_t>(i);
    s.update("u" + std::to_string(i), i);
  }
  for (const auto& [item, c] : truth) {
    const auto v = s.item_values(item);
    EXPECT_GE(*std::min_element(v.begin(), v.end()), static_cast<double>(c));
  }
}

TEST(Sketch, MergeIdentityCommutativityAndLinearity) {
  const auto cfg = SketchConfig::from_master_seed(3, 31, 4);
  CountPlusSketch whole(cfg), first(cfg), second(cfg), empty(cfg);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 400; ++i) {
    const auto item = "m" + std::to_string(rng() % 90);
    const auto c = static_cast<std::int64_t>(rng() % 9);
    whole.update(item, c);
    (i < 200 ? first : second).update(item, c);
  }
  EXPECT_EQ(merge(first, empty), first);
  EXPECT_EQ(merge(first, second), merge(second, first));
  EXPECT_EQ(merge(first, second), whole);
  CountPlusSketch other(SketchConfig::from_master_seed(3, 31, 5));
  EXPECT_THROW(merge(first, other), std::invalid_argument);
}

TEST(Serialization, RoundTrip) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = random_sketch(static_cast<std::uint32_t>(seed), 17, seed, 300);
    EXPECT_EQ(deserialize(serialize(s)), s);
  }
  const CountPlusSketch empty(SketchConfig::from_master_seed(2, 3, 1));
  const auto back = deserialize(serialize(empty));
  EXPECT_EQ(back, empty);
  EXPECT_EQ(back.total_count(), 0u);
}

TEST(Serialization, LayoutIsLittleEndianWithHeader) {
  CountPlusSketch s(SketchConfig(1, 2, {0x0102030405060708ULL}));
  s.update("a", 5);
  const auto bytes = serialize(s);
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 8 + 2 * 8 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CMX1");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 0x08);
  EXPECT_EQ(bytes[19], 0x01);
  EXPECT_EQ(bytes[20], 5);
  const auto body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 7; i >= 0; --i) stored = (stored << 8) | bytes[body + static_cast<std::size_t>(i)];
  EXPECT_EQ(stored, xxh64(bytes.data(), body, 0));
}

TEST(Serialization, CorruptionDetected) {
  const auto s = random_sketch(2, 9, 3, 100);
  auto bytes = serialize(s);
  auto flipped = bytes;
  flipped[30] ^= 0x40;
  try {
    deserialize(flipped);
    FAIL() << "corruption not detected";
  } catch (const SerializationError& e) {
    EXPECT_EQ(e.kind(), SerializationError::Kind::checksum);
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  try {
    deserialize(truncated);
    FAIL() << "truncation not detected";
  } catch (const SerializationError& e) {
    EXPECT_EQ(e.kind(), SerializationError::Kind::truncated);
  }
  auto version = bytes;
  version[3] = '2';
  try {
    deserialize(version);
    FAIL() << "version not detected";
  } catch (const SerializationError& e) {
    EXPECT_EQ(e.kind(), SerializationError::Kind::version_mismatch);
  }
  auto magic = bytes;
  magic[0] = 'X';
  try {
    deserialize(magic);
    FAIL() << "magic not detected";
  } catch (const SerializationError& e) {
    EXPECT_EQ(e.kind(), SerializationError::Kind::bad_magic);
  }
}

TEST(Ingest, ParsesTabSeparatedLines) {
  std::istringstream in("a\t3\nb\n\nc\t10\n");
  std::map<std::string, std::int64_t> got;
  const auto stats = for_each_record(in, true, [&](std::string_view item, std::int64_t c) { got[std::string(item)] += c; });
  EXPECT_EQ(got.at("a"), 3);
  EXPECT_EQ(got.at("b"), 1);
  EXPECT_EQ(got.at("c"), 10);
  EXPECT_EQ(stats.records, 3u);
  EXPECT_EQ(stats.lines_read, 4u);
}

TEST(Ingest, StrictModeReportsLineNumber) {
  std::istringstream in("a\t3\nb\tx\n");
  try {
    for_each_record(in, true, [](std::string_view, std::int64_t) {});
    FAIL() << "malformed line accepted";
  } catch (const IngestError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Ingest, LenientModeSkips) {
  std::istringstream in("a\t3\nb\t-2\nc\t1\n");
  int n = 0;
  const auto stats = for_each_record(in, false, [&](std::string_view, std::int64_t) { ++n; });
  EXPECT_EQ(n, 2);
  EXPECT_EQ(stats.skipped, 1u);
}

TEST(Csv, RoundTripIsIdempotent) {
  std::ostringstream out;
  write_csv_row(out, {"plain", "with,comma", "with \"quote\"", format_number(0.1), format_number(1e300)});
  write_csv_row(out, {"x", "", "y", "1", "2"});
  std::istringstream in(out.str());
  const auto rows = read_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][1], "with,comma");
  EXPECT_EQ(rows[0][2], "with \"quote\"");
  EXPECT_EQ(std::stod(rows[0][3]), 0.1);
  std::ostringstream again;
  for (const auto& r : rows) write_csv_row(again, r);
  EXPECT_EQ(again.str(), out.str());
}
