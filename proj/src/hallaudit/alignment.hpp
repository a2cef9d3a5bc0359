#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hallaudit::alignment {

// A normalized word. `begin`/`end` are UTF-8 byte offsets of the stripped
// token inside the text it was cut from.
struct Token {
  std::string surface;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

using TokenList = std::vector<Token>;

// Lowercases, splits on Unicode whitespace and strips leading/trailing
// punctuation from each piece. Internal punctuation survives ("a--a"), and
// runs of CJK without spaces stay one token.
TokenList normalize(std::string_view text);

std::vector<std::string> surfaces(std::span<const Token> tokens);

enum class EditOp : std::uint8_t { match, substitute, remove, insert };

const char* to_string(EditOp op);

struct AlignStep {
  EditOp op = EditOp::match;
  std::optional<std::size_t> ref;
  std::optional<std::size_t> hyp;

  bool operator==(const AlignStep&) const = default;
};

struct AlignmentResult {
  std::vector<AlignStep> steps;
  std::size_t ref_length = 0;
  std::size_t hyp_length = 0;
  std::size_t edit_distance = 0;
  double wer = 0.0;
};

// Optimal unit-cost alignment. Ties are broken left to right preferring
// match, then substitute, then delete, then insert.
AlignmentResult align(std::span<const std::string> ref, std::span<const std::string> hyp);
AlignmentResult align(std::span<const Token> ref, std::span<const Token> hyp);

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);

// Word error rate with the reference length clamped to at least 1.
double word_error_rate(std::size_t edit_distance, std::size_t ref_length);

// Half-open range [start, start + length) of hypothesis (or run) tokens.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t length = 0;
  std::string text;

  std::size_t end() const { return start + length; }
  bool operator==(const TokenSpan&) const = default;
};

TokenSpan make_span(std::span<const std::string> tokens, std::size_t start, std::size_t length);

// Maximal runs of consecutive inserts of length >= min_len, as spans over hyp.
std::vector<TokenSpan> insertion_spans(const AlignmentResult& alignment, std::span<const std::string> hyp,
                                       std::size_t min_len);

struct UnstableRegion {
  std::optional<TokenSpan> a;
  std::optional<TokenSpan> b;
  std::size_t op_count = 0;
};

// Aligns a against b and reports maximal runs of non-match steps with at
// least min_len steps. A side is empty when the run only deletes or inserts.
std::vector<UnstableRegion> unstable_regions(std::span<const std::string> a, std::span<const std::string> b,
                                             std::size_t min_len);

// Overlap of two sorted, disjoint span lists.
std::vector<TokenSpan> intersect_spans(std::span<const TokenSpan> lhs, std::span<const TokenSpan> rhs,
                                       std::span<const std::string> tokens);

void to_json(nlohmann::json& j, const Token& token);
void to_json(nlohmann::json& j, const TokenSpan& span);
void from_json(const nlohmann::json& j, TokenSpan& span);
void to_json(nlohmann::json& j, const AlignmentResult& result);

}  // namespace hallaudit::alignment
