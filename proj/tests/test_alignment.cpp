#include <gtest/gtest.h>

#include <random>

#include "hallaudit/alignment.hpp"
#include "hallaudit/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hallaudit;
using namespace hallaudit::alignment;
using testing_support::oracle_distance;
using testing_support::random_tokens;
using testing_support::toks;

namespace {

std::vector<std::string> replay(const AlignmentResult& r, const std::vector<std::string>& ref,
                                const std::vector<std::string>& hyp) {
  std::vector<std::string> out;
  for (const auto& s : r.steps) {
    switch (s.op) {
      case EditOp::match:
        out.push_back(ref.at(*s.ref));
        break;
      case EditOp::substitute:
      case EditOp::insert:
        out.push_back(hyp.at(*s.hyp));
        break;
      case EditOp::remove:
        break;
    }
  }
  return out;
}

}  // namespace

TEST(Normalize, StripsEdgePunctuationAndLowercases) {
  EXPECT_EQ(toks("Thank you for watching!"), (std::vector<std::string>{"thank", "you", "for", "watching"}));
  EXPECT_TRUE(normalize("").empty());
  EXPECT_EQ(toks("  A--a  "), (std::vector<std::string>{"a--a"}));
  EXPECT_EQ(toks("\"Hello,\" she said..."), (std::vector<std::string>{"hello", "she", "said"}));
}

TEST(Normalize, UnicodeAndCjk) {
  EXPECT_EQ(toks("ПРИВЕТ Мир"), (std::vector<std::string>{"привет", "мир"}));
  EXPECT_EQ(toks("我们 走吧。"), (std::vector<std::string>{"我们", "走吧"}));
  EXPECT_TRUE(normalize("... !!! --").empty());
}

TEST(Normalize, OffsetsPointIntoSource) {
  const std::string s = "  Hé, World!";
  const auto t = normalize(s);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(s.substr(t[0].begin, t[0].end - t[0].begin), "Hé");
  EXPECT_EQ(s.substr(t[1].begin, t[1].end - t[1].begin), "World");
  EXPECT_LT(t[0].end, t[1].begin);
}

TEST(Align, RecipeExample) {
  const auto r = align(toks("pick the bread and peanut butter"), toks("take the bread and add butter"));
  EXPECT_EQ(r.edit_distance, 2u);
  EXPECT_NEAR(r.wer, 2.0 / 6.0, 1e-12);
}

TEST(Align, IdentityAndEmpty) {
  const auto a = toks("one two three");
  const auto r = align(a, a);
  EXPECT_EQ(r.edit_distance, 0u);
  EXPECT_EQ(r.wer, 0.0);
  const auto e = align(std::vector<std::string>{}, toks("a b c"));
  EXPECT_EQ(e.edit_distance, 3u);
  EXPECT_DOUBLE_EQ(e.wer, 3.0);
  EXPECT_EQ(align(std::vector<std::string>{}, std::vector<std::string>{}).edit_distance, 0u);
}

TEST(Align, TieBreakPrefersSubstituteOverIndel) {
  const auto r = align(toks("a"), toks("b"));
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_EQ(r.steps[0].op, EditOp::substitute);
  // [a b] vs [b]: delete then match, not substitute then delete.
  const auto d = align(toks("a b"), toks("b"));
  ASSERT_EQ(d.steps.size(), 2u);
  EXPECT_EQ(d.steps[0].op, EditOp::remove);
  EXPECT_EQ(d.steps[1].op, EditOp::match);
}

TEST(AlignProperty, MatchesRecursiveOracleAndReplays) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_tokens(rng, 10, 4);
    const auto b = random_tokens(rng, 10, 4);
    const auto r = align(a, b);
    ASSERT_EQ(r.edit_distance, oracle_distance(a, b));
    ASSERT_EQ(replay(r, a, b), b);
    std::size_t cost = 0;
    for (const auto& s : r.steps) cost += s.op == EditOp::match ? 0 : 1;
    ASSERT_EQ(cost, r.edit_distance);
    ASSERT_DOUBLE_EQ(r.wer, static_cast<double>(r.edit_distance) / std::max<std::size_t>(1, a.size()));
  }
}

TEST(AlignProperty, SymmetryAndTriangle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_tokens(rng, 8, 3);
    const auto b = random_tokens(rng, 8, 3);
    const auto c = random_tokens(rng, 8, 3);
    ASSERT_EQ(edit_distance(a, b), edit_distance(b, a));
    ASSERT_LE(edit_distance(a, c), edit_distance(a, b) + edit_distance(b, c));
  }
}

TEST(AlignProperty, DeterministicAcrossCalls) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_tokens(rng, 10, 3);
    const auto b = random_tokens(rng, 10, 3);
    EXPECT_EQ(align(a, b).steps, align(a, b).steps);
  }
}

TEST(InsertionSpans, AppendedTail) {
  const auto ref = toks("so then i went home");
  auto hyp = ref;
  for (const auto& t : toks("thank you for watching")) hyp.push_back(t);
  const auto spans = insertion_spans(align(ref, hyp), hyp, 2);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].start, ref.size());
  EXPECT_EQ(spans[0].length, 4u);
  EXPECT_EQ(spans[0].text, "thank you for watching");
}

TEST(InsertionSpans, NoneAndAlternating) {
  const auto ref = toks("a b c");
  EXPECT_TRUE(insertion_spans(align(ref, ref), ref, 1).empty());
  const auto hyp = toks("x a y b z c");
  const auto r = align(ref, hyp);
  EXPECT_TRUE(insertion_spans(r, hyp, 2).empty());
  EXPECT_EQ(insertion_spans(r, hyp, 1).size(), 3u);
}

TEST(InsertionSpans, PropertySortedDisjointCoveredByInserts) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_tokens(rng, 10, 3);
    const auto b = random_tokens(rng, 12, 5);
    const auto r = align(a, b);
    std::set<std::size_t> inserted;
    for (const auto& s : r.steps)
      if (s.op == EditOp::insert) inserted.insert(*s.hyp);
    std::size_t prev_end = 0;
    for (const auto& sp : insertion_spans(r, b, 1)) {
      ASSERT_GE(sp.length, 1u);
      ASSERT_GE(sp.start, prev_end);
      ASSERT_LE(sp.end(), b.size());
      for (auto i = sp.start; i < sp.end(); ++i) ASSERT_TRUE(inserted.contains(i));
      prev_end = sp.end();
    }
  }
}

TEST(UnstableRegions, AprilMayTails) {
  const auto april = toks("take the bread and add butter. In a large mixing bowl, combine the softened butter");
  const auto may = toks("take the bread and add butter. Take 2 or 3 sticks of butter out of the fridge");
  const auto regions = unstable_regions(april, may, 2);
  ASSERT_EQ(regions.size(), 1u);
  ASSERT_TRUE(regions[0].a && regions[0].b);
  EXPECT_EQ(regions[0].a->start, 6u);
  EXPECT_EQ(regions[0].b->start, 6u);
  EXPECT_EQ(regions[0].a->end(), april.size());
  EXPECT_EQ(regions[0].b->end(), may.size());
}

TEST(UnstableRegions, IdentityAndSingleToken) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_tokens(rng, 10, 4);
    ASSERT_TRUE(unstable_regions(a, a, 1).empty());
  }
  EXPECT_TRUE(unstable_regions(toks("a b c d"), toks("a x c d"), 2).empty());
  EXPECT_EQ(unstable_regions(toks("a b c d"), toks("a x c d"), 1).size(), 1u);
}

TEST(UnstableRegions, OneSidedRegion) {
  const auto r = unstable_regions(toks("a b"), toks("a b c d e"), 2);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_FALSE(r[0].a.has_value());
  ASSERT_TRUE(r[0].b.has_value());
  EXPECT_EQ(r[0].b->text, "c d e");
}

TEST(IntersectSpans, Overlap) {
  const auto t = toks("a b c d e f g");
  const std::vector<TokenSpan> l{make_span(t, 1, 3), make_span(t, 5, 2)};
  const std::vector<TokenSpan> r{make_span(t, 2, 4)};
  const auto out = intersect_spans(l, r, t);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], make_span(t, 2, 2));
  EXPECT_EQ(out[1], make_span(t, 5, 1));
}

TEST(Text, ScriptShareCounting) {
  const auto cyr = text::count_script_letters("Дякую за перегляд", text::Script::latin);
  EXPECT_DOUBLE_EQ(cyr.share(), 1.0);
  EXPECT_DOUBLE_EQ(text::count_script_letters("plain english 123!", text::Script::latin).share(), 0.0);
  // 18 Latin letters plus 2 Han characters.
  const auto mixed = text::count_script_letters("abcdefghi jklmnopqr 你好", text::Script::latin);
  EXPECT_EQ(mixed.letters, 20u);
  EXPECT_EQ(mixed.outside, 2u);
}

TEST(Text, Utf16Offsets) {
  const std::string s = "a€😀b";  // 1 + 3 + 4 + 1 bytes; 1 + 1 + 2 + 1 units
  EXPECT_EQ(text::utf16_offset(s, 0), 0u);
  EXPECT_EQ(text::utf16_offset(s, 1), 1u);
  EXPECT_EQ(text::utf16_offset(s, 4), 2u);
  EXPECT_EQ(text::utf16_offset(s, 8), 4u);
  EXPECT_EQ(text::utf16_offset(s, s.size()), 5u);
  EXPECT_TRUE(text::is_valid_utf8(s));
  EXPECT_FALSE(text::is_valid_utf8("\xC3"));
}
