#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace corpuslens::text {

inline constexpr char32_t kReplacementChar = 0xFFFD;

// One decoded code point and the byte range it occupied. Invalid bytes decode
// to a single-byte kReplacementChar with `valid == false`.
struct CodePoint {
  char32_t value;
  std::size_t offset;
  std::size_t length;
  bool valid;
};

std::vector<CodePoint> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);

std::string ascii_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool is_space(char32_t cp);
bool is_cjk(char32_t cp);
bool is_punct(char32_t cp);

std::vector<std::string> split(std::string_view s, char sep);

// Word-list files: UTF-8, one entry per line, `#` starts a comment line,
// blank lines ignored.
std::vector<std::string> read_word_list(const std::filesystem::path& path);

// Lines of the form `key<TAB>value` (or `key value`), `#` comments allowed.
std::vector<std::pair<std::string, std::string>> read_pair_list(
    const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

// Fixed-precision decimal rendering ("%.Nf"), locale-independent.
std::string fixed(double value, int decimals);

// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_now_iso();

}  // namespace corpuslens::text
