#include "hallaudit/text.hpp"

#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include <array>
#include <cstdint>

#include "hallaudit/error.hpp"

namespace hallaudit::text {

namespace {

constexpr std::array<std::pair<Script, const char*>, 12> kScriptNames{{
    {Script::latin, "latin"},
    {Script::cyrillic, "cyrillic"},
    {Script::greek, "greek"},
    {Script::arabic, "arabic"},
    {Script::hebrew, "hebrew"},
    {Script::han, "han"},
    {Script::hiragana, "hiragana"},
    {Script::katakana, "katakana"},
    {Script::hangul, "hangul"},
    {Script::devanagari, "devanagari"},
    {Script::thai, "thai"},
    {Script::other, "other"},
}};

Script classify(UChar32 cp) {
  UErrorCode status = U_ZERO_ERROR;
  const UScriptCode code = uscript_getScript(cp, &status);
  if (U_FAILURE(status)) return Script::other;
  switch (code) {
    case USCRIPT_LATIN: return Script::latin;
    case USCRIPT_CYRILLIC: return Script::cyrillic;
    case USCRIPT_GREEK: return Script::greek;
    case USCRIPT_ARABIC: return Script::arabic;
    case USCRIPT_HEBREW: return Script::hebrew;
    case USCRIPT_HAN: return Script::han;
    case USCRIPT_HIRAGANA: return Script::hiragana;
    case USCRIPT_KATAKANA: return Script::katakana;
    case USCRIPT_HANGUL: return Script::hangul;
    case USCRIPT_DEVANAGARI: return Script::devanagari;
    case USCRIPT_THAI: return Script::thai;
    default: return Script::other;
  }
}

}  // namespace

const char* to_string(Script script) {
  for (const auto& [s, name] : kScriptNames)
    if (s == script) return name;
  return "other";
}

Script parse_script(std::string_view name) {
  for (const auto& [s, n] : kScriptNames)
    if (name == n) return s;
  throw Error(ErrorKind::invalid_argument, "unknown script '" + std::string(name) + "'");
}

ScriptShare count_script_letters(std::string_view utf8, Script expected) {
  ScriptShare result;
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 cp = 0;
    U8_NEXT(s, i, length, cp);
    if (cp < 0 || !u_isalpha(cp)) continue;
    ++result.letters;
    if (classify(cp) != expected) ++result.outside;
  }
  return result;
}

std::string lowercase(std::string_view utf8) {
  std::string out;
  out.reserve(utf8.size());
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 cp = 0;
    U8_NEXT(s, i, length, cp);
    if (cp < 0) continue;
    const UChar32 lower = u_tolower(cp);
    std::array<uint8_t, U8_MAX_LENGTH> buf{};
    int32_t n = 0;
    UBool error = false;
    U8_APPEND(buf.data(), n, U8_MAX_LENGTH, lower, error);
    if (!error) out.append(reinterpret_cast<const char*>(buf.data()), static_cast<std::size_t>(n));
  }
  return out;
}

std::size_t utf16_offset(std::string_view utf8, std::size_t byte_offset) {
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto length = static_cast<int32_t>(std::min(byte_offset, utf8.size()));
  std::size_t units = 0;
  int32_t i = 0;
  while (i < length) {
    UChar32 cp = 0;
    U8_NEXT(s, i, length, cp);
    units += (cp > 0xFFFF) ? 2 : 1;
  }
  return units;
}

bool is_valid_utf8(std::string_view utf8) {
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 cp = 0;
    U8_NEXT(s, i, length, cp);
    if (cp < 0) return false;
  }
  return true;
}

}  // namespace hallaudit::text
