#include <gtest/gtest.h>

#include <random>

#include "rbqa/error.hpp"
#include "rbqa/text.hpp"
#include "test_support.hpp"

using namespace rbqa;

TEST(Text, FnvMatchesPublishedVectors) {
  EXPECT_EQ(text::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(text::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(text::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Text, HexRoundTrip) {
  EXPECT_EQ(text::hex64(0x1234abcdULL), "000000001234abcd");
  EXPECT_EQ(text::parse_hex64("000000001234abcd"), 0x1234abcdULL);
  EXPECT_THROW(text::parse_hex64("xyz"), std::invalid_argument);
}

TEST(Text, Base64KnownValues) {
  EXPECT_EQ(text::base64_encode(""), "");
  EXPECT_EQ(text::base64_encode("f"), "Zg==");
  EXPECT_EQ(text::base64_encode("fo"), "Zm8=");
  EXPECT_EQ(text::base64_encode("foo"), "Zm9v");
  EXPECT_EQ(text::base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(text::base64_decode("Zm9vYmE="), "fooba");
  EXPECT_THROW(text::base64_decode("Zm9v!"), std::invalid_argument);
}

TEST(Text, Base64RoundTripsArbitraryBytes) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 64);
  for (int i = 0; i < 200; ++i) {
    std::string s(static_cast<std::size_t>(len(rng)), '\0');
    for (auto& c : s) c = static_cast<char>(byte(rng));
    EXPECT_EQ(text::base64_decode(text::base64_encode(s)), s);
  }
}

TEST(Text, Utf8Boundaries) {
  const std::string s = "a\xC3\xA9z";  // a, e-acute, z
  EXPECT_EQ(text::floor_boundary(s, 2), 1u);
  EXPECT_EQ(text::ceil_boundary(s, 2), 3u);
  EXPECT_EQ(text::codepoint_count(s), 3u);
}

TEST(Text, TokenizeKeepsApostrophesOnRequest) {
  const auto plain = text::tokenize("Women's rider, 2nd.");
  ASSERT_EQ(plain.size(), 4u);
  EXPECT_EQ(plain[0].text, "Women");
  const auto kept = text::tokenize("Women's rider", true);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].text, "Women's");
  EXPECT_EQ(kept[1].begin, 8u);
}

TEST(Text, SplitKeepsEmptyFields) {
  EXPECT_EQ(text::split("a\t\tb", '\t'), (std::vector<std::string>{"a", "", "b"}));
}

TEST(Text, AtomicWriteAndRead) {
  rbqa::testkit::TempDir dir;
  text::write_file_atomic(dir / "f.txt", "hello");
  EXPECT_EQ(text::read_file(dir / "f.txt"), "hello");
  try {
    text::read_file(dir / "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}
