#include "segkey/key.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "segkey/errors.hpp"

namespace segkey {
namespace {

SecretKey key_from_seed(std::uint64_t seed) {
  SplitMix64 s(seed);
  return random_key(s);
}

std::vector<std::uint8_t> first_bytes(SplitMix64 stream, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  stream.fill_bytes(out);
  return out;
}

TEST(Sha256Test, KnownVector) {
  const std::string abc = "abc";
  const Digest d = sha256({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()});
  EXPECT_EQ(SecretKey(d).to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(SecretKeyTest, HexRoundTrip) {
  const SecretKey k = key_from_seed(1);
  EXPECT_EQ(k.to_hex().size(), 64u);
  EXPECT_EQ(SecretKey::from_hex(k.to_hex()), k);
}

TEST(SecretKeyTest, RejectsBadHex) {
  EXPECT_THROW(SecretKey::from_hex("abc"), KeyError);
  EXPECT_THROW(SecretKey::from_hex(std::string(64, 'g')), KeyError);
  EXPECT_THROW(SecretKey::from_hex(std::string(66, 'a')), KeyError);
}

TEST(SecretKeyTest, KeyFileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "segkey_key_test.key";
  const SecretKey k = key_from_seed(2);
  write_key_file(path, k);
  EXPECT_EQ(read_key_file(path), k);
  {
    std::ofstream out(path);
    out << k.to_hex();  // no trailing newline
  }
  EXPECT_EQ(read_key_file(path), k);
  {
    std::ofstream out(path);
    out << "zz\n";
  }
  EXPECT_THROW(read_key_file(path), KeyError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_key_file(path), KeyError);
}

TEST(RandomKeyTest, DrawsDiffer) {
  EXPECT_NE(random_key(), random_key());
  SplitMix64 s(3);
  const SecretKey a = random_key(s);
  const SecretKey b = random_key(s);
  EXPECT_NE(a, b);
}

// Replays a fixed list of words; used to force a collision.
class ScriptedStream final : public RandomStream {
 public:
  explicit ScriptedStream(std::vector<std::uint64_t> words) : words_(std::move(words)) {}
  std::uint64_t next_u64() override { return words_[pos_++ % words_.size()]; }

 private:
  std::vector<std::uint64_t> words_;
  std::size_t pos_ = 0;
};

TEST(RandomKeyTest, ExcludingRedrawsOnCollision) {
  ZeroStream zeros;
  const SecretKey zero_key = random_key(zeros);
  // First four words reproduce zero_key, the next four do not.
  ScriptedStream scripted({0, 0, 0, 0, 1, 2, 3, 4});
  const SecretKey drawn = random_key_excluding(scripted, zero_key);
  EXPECT_NE(drawn, zero_key);
}

TEST(DeriveStreamTest, Deterministic) {
  const SecretKey k = key_from_seed(4);
  const DeriveContext ctx{Purpose::kChannelPerm, 0, 64};
  EXPECT_EQ(first_bytes(derive_stream(k, ctx), 1024), first_bytes(derive_stream(k, ctx), 1024));
}

TEST(DeriveStreamTest, ContextFieldsSeparateStreams) {
  const SecretKey k = key_from_seed(5);
  const DeriveContext base{Purpose::kChannelPerm, 0, 64};
  const auto reference = first_bytes(derive_stream(k, base), 1024);
  EXPECT_NE(first_bytes(derive_stream(k, {Purpose::kChannelPerm, 1, 64}), 1024), reference);
  EXPECT_NE(first_bytes(derive_stream(k, {Purpose::kShfPerm, 0, 64}), 1024), reference);
  EXPECT_NE(first_bytes(derive_stream(k, {Purpose::kChannelPerm, 0, 65}), 1024), reference);
  EXPECT_NE(first_bytes(derive_stream(key_from_seed(6), base), 1024), reference);
}

TEST(DeriveStreamTest, SeedIsBigEndianDigestPrefix) {
  const SecretKey k = key_from_seed(7);
  std::vector<std::uint8_t> msg(k.bytes().begin(), k.bytes().end());
  msg.push_back(static_cast<std::uint8_t>(Purpose::kNpMask));
  for (std::uint64_t v : {std::uint64_t{3}, std::uint64_t{48}}) {
    for (int shift = 56; shift >= 0; shift -= 8) msg.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  const Digest d = sha256(msg);
  std::uint64_t expected = 0;
  for (int i = 0; i < 8; ++i) expected = expected << 8 | d[i];
  EXPECT_EQ(derive_seed(k, {Purpose::kNpMask, 3, 48}), expected);
}

TEST(DeriveStreamTest, ZeroSizeRejected) {
  EXPECT_THROW(derive_stream(key_from_seed(8), {Purpose::kChannelPerm, 0, 0}), InvalidArgument);
}

TEST(SplitMix64Test, ReferenceOutputs) {
  // Reference values of the published splitmix64 for seed 0.
  SplitMix64 s(0);
  EXPECT_EQ(s.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(s.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(s.next_u64(), 0x06C45D188009454FULL);
}

TEST(UniformBelowTest, StaysInRange) {
  SplitMix64 s(9);
  for (std::uint64_t n : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL, (1ULL << 63) + 5}) {
    for (int i = 0; i < 200; ++i) EXPECT_LT(s.uniform_below(n), n);
  }
  EXPECT_THROW(s.uniform_below(0), InvalidArgument);
}

TEST(PermutationTest, SizeOneIsTrivial) {
  EXPECT_EQ(derive_permutation(key_from_seed(10), 3, 1).one_based(),
            std::vector<std::int64_t>{1});
}

TEST(PermutationTest, ZeroChannelsRejected) {
  EXPECT_THROW(derive_permutation(key_from_seed(10), 1, 0), InvalidArgument);
}

TEST(PermutationTest, DeterministicBijection) {
  const SecretKey k = key_from_seed(11);
  const auto p = derive_permutation(k, 2, 8);
  EXPECT_EQ(p, derive_permutation(k, 2, 8));
  auto sorted = p.one_based();
  std::ranges::sort(sorted);
  EXPECT_EQ(sorted, (std::vector<std::int64_t>{1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(PermutationTest, BijectionForManySizesAndKeys) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (std::size_t c : {1u, 2u, 3u, 16u, 64u, 257u}) {
      const auto p = derive_permutation(key_from_seed(seed), seed % 7, c);
      std::vector<bool> seen(c, false);
      for (std::size_t i = 0; i < c; ++i) {
        ASSERT_FALSE(seen[p.source(i)]);
        seen[p.source(i)] = true;
      }
    }
  }
}

TEST(PermutationTest, ZeroStreamGivesIdentity) {
  ZeroStream zeros;
  EXPECT_TRUE(permutation_from_stream(zeros, 17).is_identity());
}

// Chi-square over the 3! outcomes for 6000 keys; 20.515 is the 0.999
// quantile with 5 degrees of freedom.
TEST(PermutationTest, UniformOverAllPermutationsOfThree) {
  std::map<std::vector<std::int64_t>, int> counts;
  SplitMix64 keys(12);
  const int n = 6000;
  for (int i = 0; i < n; ++i) counts[derive_permutation(random_key(keys), 1, 3).one_based()]++;
  ASSERT_EQ(counts.size(), 6u);
  const double expected = n / 6.0;
  double chi2 = 0.0;
  for (const auto& [perm, count] : counts) {
    chi2 += (count - expected) * (count - expected) / expected;
  }
  EXPECT_LT(chi2, 20.515);
}

TEST(PermutationTest, CoversAllPermutationsForSmallWidths) {
  SplitMix64 keys(13);
  for (std::size_t c = 1; c <= 5; ++c) {
    std::size_t factorial = 1;
    for (std::size_t i = 2; i <= c; ++i) factorial *= i;
    std::set<std::vector<std::int64_t>> seen;
    for (std::size_t i = 0; i < 50 * factorial; ++i) {
      seen.insert(derive_permutation(random_key(keys), 4, c).one_based());
    }
    EXPECT_EQ(seen.size(), factorial) << "c=" << c;
  }
}

TEST(InvertTest, HandCases) {
  const std::vector<std::int64_t> id{1, 2, 3};
  EXPECT_EQ(invert_permutation(ChannelPermutation::from_one_based(id)).one_based(), id);
  const std::vector<std::int64_t> p{2, 3, 1};
  EXPECT_EQ(invert_permutation(ChannelPermutation::from_one_based(p)).one_based(),
            (std::vector<std::int64_t>{3, 1, 2}));
}

TEST(InvertTest, InvolutionAndComposition) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = derive_permutation(key_from_seed(seed), 1, 33);
    const auto q = invert_permutation(p);
    EXPECT_EQ(invert_permutation(q), p);
    EXPECT_TRUE(compose(p, q).is_identity());
    EXPECT_TRUE(compose(q, p).is_identity());
  }
}

TEST(ChannelPermutationTest, RejectsNonBijections) {
  const std::vector<std::int64_t> dup{1, 1, 2};
  const std::vector<std::int64_t> range{0, 1, 2};
  EXPECT_THROW(ChannelPermutation::from_one_based(dup), InvalidArgument);
  EXPECT_THROW(ChannelPermutation::from_one_based(range), InvalidArgument);
}

}  // namespace
}  // namespace segkey
