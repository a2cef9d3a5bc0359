#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace hallaudit::text {

// Scripts the non-target flagger can be asked to expect.
enum class Script { latin, cyrillic, greek, arabic, hebrew, han, hiragana, katakana, hangul, devanagari, thai, other };

const char* to_string(Script script);
Script parse_script(std::string_view name);

struct ScriptShare {
  std::size_t letters = 0;
  std::size_t outside = 0;
  double share() const { return letters == 0 ? 0.0 : static_cast<double>(outside) / static_cast<double>(letters); }
};

// Counts letters (digits and punctuation excluded) and how many of them are
// written in a script other than `expected`.
ScriptShare count_script_letters(std::string_view utf8, Script expected);

// Unicode simple lowercase of a UTF-8 string. Invalid sequences are dropped.
std::string lowercase(std::string_view utf8);

// Number of UTF-16 code units in the first `byte_offset` bytes of `utf8`.
std::size_t utf16_offset(std::string_view utf8, std::size_t byte_offset);

bool is_valid_utf8(std::string_view utf8);

}  // namespace hallaudit::text
