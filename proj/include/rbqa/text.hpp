#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rbqa::text {

inline bool is_utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

/// Largest offset <= pos that does not fall inside a UTF-8 sequence.
std::size_t floor_boundary(std::string_view s, std::size_t pos);
/// Smallest offset >= pos that does not fall inside a UTF-8 sequence.
std::size_t ceil_boundary(std::string_view s, std::size_t pos);

std::size_t codepoint_count(std::string_view s);

/// ASCII letters and digits, plus every non-ASCII byte so UTF-8 words stay whole.
inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

struct Token {
  std::string text;  // as written
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Maximal runs of word bytes. With `keep_apostrophes`, an apostrophe between two
/// word bytes stays inside the token ("women's").
std::vector<Token> tokenize(std::string_view s, bool keep_apostrophes = false);

/// Lowercased tokens of `s` with everything non-alphanumeric treated as a separator.
std::vector<std::string> normalized_tokens(std::string_view s);

constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = kFnvOffsetBasis) {
  std::uint64_t h = basis;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view s);

std::string base64_encode(std::string_view bytes);
/// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view encoded);

std::string read_file(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace rbqa::text
