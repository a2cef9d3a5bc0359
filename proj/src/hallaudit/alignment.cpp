#include "hallaudit/alignment.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>

#include "hallaudit/text.hpp"

namespace hallaudit::alignment {

namespace {

struct CodePoint {
  UChar32 cp;
  std::size_t begin;
  std::size_t end;
};

std::vector<CodePoint> decode(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 cp = 0;
    U8_NEXT(s, i, length, cp);
    out.push_back({cp, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
  }
  return out;
}

bool is_space(UChar32 cp) { return cp >= 0 && u_isUWhiteSpace(cp); }
bool is_punct(UChar32 cp) { return cp >= 0 && u_ispunct(cp); }

// Suffix cost table: cost[i][j] aligns ref[i..] with hyp[j..].
class SuffixTable {
 public:
  SuffixTable(std::size_t n, std::size_t m) : cols_(m + 1), cells_((n + 1) * (m + 1)) {}
  std::uint32_t& at(std::size_t i, std::size_t j) { return cells_[i * cols_ + j]; }

 private:
  std::size_t cols_;
  std::vector<std::uint32_t> cells_;
};

}  // namespace

TokenList normalize(std::string_view text) {
  TokenList tokens;
  const auto cps = decode(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i].cp)) ++i;
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j].cp)) ++j;
    std::size_t first = i;
    std::size_t last = j;
    while (first < last && is_punct(cps[first].cp)) ++first;
    while (last > first && is_punct(cps[last - 1].cp)) --last;
    if (first < last) {
      const std::size_t begin = cps[first].begin;
      const std::size_t end = cps[last - 1].end;
      auto surface = text::lowercase(text.substr(begin, end - begin));
      if (!surface.empty()) tokens.push_back({std::move(surface), begin, end});
    }
    i = j;
  }
  return tokens;
}

std::vector<std::string> surfaces(std::span<const Token> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

const char* to_string(EditOp op) {
  switch (op) {
    case EditOp::match: return "match";
    case EditOp::substitute: return "substitute";
    case EditOp::remove: return "delete";
    case EditOp::insert: return "insert";
  }
  return "match";
}

double word_error_rate(std::size_t edit_distance, std::size_t ref_length) {
  return static_cast<double>(edit_distance) / static_cast<double>(std::max<std::size_t>(1, ref_length));
}

AlignmentResult align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  SuffixTable cost(n, m);
  for (std::size_t j = 0; j <= m; ++j) cost.at(n, j) = static_cast<std::uint32_t>(m - j);
  for (std::size_t i = n; i-- > 0;) {
    cost.at(i, m) = static_cast<std::uint32_t>(n - i);
    for (std::size_t j = m; j-- > 0;) {
      const std::uint32_t diag = cost.at(i + 1, j + 1) + (ref[i] == hyp[j] ? 0u : 1u);
      const std::uint32_t del = cost.at(i + 1, j) + 1;
      const std::uint32_t ins = cost.at(i, j + 1) + 1;
      cost.at(i, j) = std::min({diag, del, ins});
    }
  }

  AlignmentResult result;
  result.ref_length = n;
  result.hyp_length = m;
  result.edit_distance = cost.at(0, 0);
  result.wer = word_error_rate(result.edit_distance, n);
  result.steps.reserve(std::max(n, m));

  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n || j < m) {
    const std::uint32_t here = cost.at(i, j);
    if (i < n && j < m && ref[i] == hyp[j] && here == cost.at(i + 1, j + 1)) {
      result.steps.push_back({EditOp::match, i++, j++});
    } else if (i < n && j < m && here == cost.at(i + 1, j + 1) + 1) {
      result.steps.push_back({EditOp::substitute, i++, j++});
    } else if (i < n && here == cost.at(i + 1, j) + 1) {
      result.steps.push_back({EditOp::remove, i++, std::nullopt});
    } else {
      result.steps.push_back({EditOp::insert, std::nullopt, j++});
    }
  }
  return result;
}

AlignmentResult align(std::span<const Token> ref, std::span<const Token> hyp) {
  const auto r = surfaces(ref);
  const auto h = surfaces(hyp);
  return align(r, h);
}

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t diag = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({diag, prev[j] + 1, row[j - 1] + 1});
    }
    std::swap(prev, row);
  }
  return prev[b.size()];
}

TokenSpan make_span(std::span<const std::string> tokens, std::size_t start, std::size_t length) {
  TokenSpan span{start, length, {}};
  for (std::size_t k = start; k < start + length && k < tokens.size(); ++k) {
    if (k > start) span.text += ' ';
    span.text += tokens[k];
  }
  return span;
}

std::vector<TokenSpan> insertion_spans(const AlignmentResult& alignment, std::span<const std::string> hyp,
                                       std::size_t min_len) {
  std::vector<TokenSpan> spans;
  std::size_t run_start = 0;
  std::size_t run_length = 0;
  auto flush = [&] {
    if (run_length > 0 && run_length >= min_len) spans.push_back(make_span(hyp, run_start, run_length));
    run_length = 0;
  };
  for (const auto& step : alignment.steps) {
    if (step.op == EditOp::insert) {
      if (run_length == 0) run_start = *step.hyp;
      ++run_length;
    } else {
      flush();
    }
  }
  flush();
  return spans;
}

std::vector<UnstableRegion> unstable_regions(std::span<const std::string> a, std::span<const std::string> b,
                                             std::size_t min_len) {
  const auto alignment = align(a, b);
  std::vector<UnstableRegion> regions;

  std::size_t ops = 0;
  std::optional<std::size_t> a_first, a_last, b_first, b_last;
  auto flush = [&] {
    if (ops > 0 && ops >= min_len) {
      UnstableRegion region;
      region.op_count = ops;
      if (a_first) region.a = make_span(a, *a_first, *a_last - *a_first + 1);
      if (b_first) region.b = make_span(b, *b_first, *b_last - *b_first + 1);
      regions.push_back(std::move(region));
    }
    ops = 0;
    a_first.reset(), a_last.reset(), b_first.reset(), b_last.reset();
  };
  for (const auto& step : alignment.steps) {
    if (step.op == EditOp::match) {
      flush();
      continue;
    }
    ++ops;
    if (step.ref) {
      if (!a_first) a_first = step.ref;
      a_last = step.ref;
    }
    if (step.hyp) {
      if (!b_first) b_first = step.hyp;
      b_last = step.hyp;
    }
  }
  flush();
  return regions;
}

std::vector<TokenSpan> intersect_spans(std::span<const TokenSpan> lhs, std::span<const TokenSpan> rhs,
                                       std::span<const std::string> tokens) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < lhs.size() && j < rhs.size()) {
    const std::size_t lo = std::max(lhs[i].start, rhs[j].start);
    const std::size_t hi = std::min(lhs[i].end(), rhs[j].end());
    if (lo < hi) out.push_back(make_span(tokens, lo, hi - lo));
    if (lhs[i].end() < rhs[j].end()) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const Token& token) {
  j = nlohmann::json{{"surface", token.surface}, {"begin", token.begin}, {"end", token.end}};
}

void to_json(nlohmann::json& j, const TokenSpan& span) {
  j = nlohmann::json{{"start", span.start}, {"length", span.length}, {"text", span.text}};
}

void from_json(const nlohmann::json& j, TokenSpan& span) {
  span.start = j.at("start").get<std::size_t>();
  span.length = j.at("length").get<std::size_t>();
  span.text = j.value("text", std::string{});
}

void to_json(nlohmann::json& j, const AlignmentResult& result) {
  auto steps = nlohmann::json::array();
  for (const auto& s : result.steps) {
    nlohmann::json step{{"op", to_string(s.op)}};
    step["ref"] = s.ref ? nlohmann::json(*s.ref) : nlohmann::json(nullptr);
    step["hyp"] = s.hyp ? nlohmann::json(*s.hyp) : nlohmann::json(nullptr);
    steps.push_back(std::move(step));
  }
  j = nlohmann::json{{"steps", std::move(steps)},
                     {"edit_distance", result.edit_distance},
                     {"wer", result.wer},
                     {"ref_length", result.ref_length},
                     {"hyp_length", result.hyp_length}};
}

}  // namespace hallaudit::alignment
