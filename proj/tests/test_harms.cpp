#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "hallaudit/error.hpp"
#include "hallaudit/harms.hpp"
#include "support.hpp"

using namespace hallaudit;
using namespace hallaudit::harms;
using detection::CandidateStatus;
using testing_support::bare_candidate;
using testing_support::TempDir;

namespace {

struct Stores {
  TempDir dir;
  std::unique_ptr<detection::CandidateStore> candidates;
  std::unique_ptr<LabelStore> labels;

  explicit Stores(std::size_t n) {
    std::vector<detection::HallucinationCandidate> cs;
    for (std::size_t i = 0; i < n; ++i) cs.push_back(bare_candidate("s" + std::to_string(i), CandidateStatus::pending));
    detection::CandidateStore::write_fresh(dir / "candidates.jsonl", cs);
    candidates = std::make_unique<detection::CandidateStore>(dir / "candidates.jsonl");
    labels = std::make_unique<LabelStore>(dir / "labels.jsonl", *candidates, std::set<std::string>{"r1", "r2"});
  }
  std::string id(std::size_t i) const { return detection::candidate_id("s" + std::to_string(i), "mock", "A", "B"); }
};

HarmLabel label(const std::string& reviewer, bool confirmed, std::set<HarmCategory> cats, const std::string& at) {
  HarmLabel l;
  l.reviewer_id = reviewer;
  l.confirmed = confirmed;
  l.categories = std::move(cats);
  l.labeled_at = at;
  return l;
}

}  // namespace

TEST(Taxonomy, BroadGroupMappingIsTotal) {
  int harmful = 0;
  for (auto c : kAllCategories) {
    EXPECT_EQ(parse_category(to_string(c)), c);
    harmful += broad_group(c) != BroadGroup::none;
  }
  EXPECT_EQ(harmful, 9);
  EXPECT_EQ(broad_group(HarmCategory::repetition_loop), BroadGroup::none);
  EXPECT_THROW(parse_category("spam"), Error);
}

TEST(Labels, ThanksConfirms) {
  Stores s(2);
  s.labels->record_label(s.id(0), label("r1", true, {HarmCategory::thanks}, "2023-06-01T00:00:00Z"));
  EXPECT_EQ(s.candidates->find(s.id(0))->status, CandidateStatus::confirmed);
  const auto events = s.labels->events();
  const auto all = s.candidates->list();
  const auto d = aggregate(events, all);
  EXPECT_EQ(d.total_confirmed, 1u);
  EXPECT_EQ(d.per_broad_group.at(BroadGroup::false_authority_phishing), 1u);
}

TEST(Labels, RejectionExcluded) {
  Stores s(2);
  s.labels->record_label(s.id(1), label("r1", false, {}, "2023-06-01T00:00:00Z"));
  EXPECT_EQ(s.candidates->find(s.id(1))->status, CandidateStatus::rejected);
  const auto events = s.labels->events();
  const auto all = s.candidates->list();
  EXPECT_EQ(aggregate(events, all).total_confirmed, 0u);
  EXPECT_THROW(s.labels->record_label(s.id(1), label("r1", false, {HarmCategory::names}, "t")), Error);
}

TEST(Labels, LatestWinsLogRetained) {
  Stores s(1);
  s.labels->record_label(s.id(0), label("r1", true, {HarmCategory::violence}, "2023-06-01T00:00:00Z"));
  s.labels->record_label(s.id(0), label("r1", false, {}, "2023-06-02T00:00:00Z"));
  EXPECT_EQ(s.candidates->find(s.id(0))->status, CandidateStatus::rejected);
  const auto log = read_labels(s.dir / "labels.jsonl");
  ASSERT_EQ(log.size(), 2u);
  EXPECT_TRUE(log[0].confirmed);
  // A late-arriving label with an older timestamp does not override.
  s.labels->record_label(s.id(0), label("r1", true, {}, "2023-05-30T00:00:00Z"));
  EXPECT_EQ(s.candidates->find(s.id(0))->status, CandidateStatus::rejected);
  // Reload from disk gives the same state.
  detection::CandidateStore again(s.dir / "candidates.jsonl");
  EXPECT_EQ(again.find(s.id(0))->status, CandidateStatus::rejected);
  const auto replayed = replay_statuses(read_labels(s.dir / "labels.jsonl"), again.list());
  EXPECT_EQ(replayed.at(s.id(0)), CandidateStatus::rejected);
}

TEST(Labels, UnknownCandidateOrReviewer) {
  Stores s(1);
  try {
    s.labels->record_label("nope", label("r1", true, {}, "t"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_found);
  }
  try {
    s.labels->record_label(s.id(0), label("mallory", true, {}, "t"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
  EXPECT_TRUE(s.labels->events().empty());
}

TEST(Labels, MissingTimestampFilled) {
  Stores s(1);
  const auto stored = s.labels->record_label(s.id(0), label("r2", true, {}, ""));
  EXPECT_TRUE(stored.labeled_at.ends_with("Z"));
  EXPECT_GE(stored.labeled_at.size(), 20u);
  EXPECT_EQ(stored.candidate_id, s.id(0));
  EXPECT_EQ(label_from_json(to_json(stored)), stored);
}

TEST(Suggest, Examples) {
  const auto fema = suggest_categories("For more information, visit www.FEMA.gov");
  ASSERT_FALSE(fema.empty());
  EXPECT_EQ(fema.front().category, HarmCategory::website);
  const auto thanks = suggest_categories("Thanks for watching and Electric Unicorn,");
  ASSERT_FALSE(thanks.empty());
  EXPECT_EQ(thanks.front().category, HarmCategory::thanks);
  EXPECT_TRUE(suggest_categories("").empty());
  EXPECT_TRUE(suggest_categories("the cat sat").empty());
  for (std::size_t i = 1; i < fema.size(); ++i) EXPECT_GE(fema[i - 1].score, fema[i].score);
}

TEST(Aggregate, TargetShares) {
  const auto f = testing_support::harm_fixture_312();
  const auto d = aggregate(f.labels, f.candidates);
  EXPECT_EQ(d.total_confirmed, 312u);
  EXPECT_EQ(d.per_broad_group.at(BroadGroup::perpetuating_violence), 59u);
  EXPECT_EQ(d.per_broad_group.at(BroadGroup::incorrect_association), 41u);
  EXPECT_EQ(d.per_broad_group.at(BroadGroup::false_authority_phishing), 25u);
  EXPECT_EQ(d.any_harm, 119u);
  const auto j = to_json(d);
  EXPECT_EQ(j["broad_groups"]["perpetuating_violence"]["percent"], 19);
  EXPECT_EQ(j["broad_groups"]["incorrect_association"]["percent"], 13);
  EXPECT_EQ(j["broad_groups"]["false_authority_phishing"]["percent"], 8);
  EXPECT_EQ(j["any_harm"]["percent"], 38);
  double sum = 0.0;
  for (auto g : kHarmfulGroups) sum += d.broad_group_share.at(g);
  EXPECT_LE(d.any_harm_share, sum);
}

TEST(Aggregate, EmptyAndOverlap) {
  const auto empty = aggregate({}, {});
  EXPECT_EQ(empty.total_confirmed, 0u);
  EXPECT_EQ(empty.any_harm_share, 0.0);
  for (auto g : kHarmfulGroups) EXPECT_EQ(empty.broad_group_share.at(g), 0.0);

  std::vector<detection::HallucinationCandidate> cs;
  std::vector<HarmLabel> ls;
  for (int i = 0; i < 10; ++i) {
    cs.push_back(bare_candidate("o" + std::to_string(i), CandidateStatus::confirmed));
    auto l = label("r1", true, {HarmCategory::violence, HarmCategory::website}, "t");
    l.candidate_id = cs.back().candidate_id;
    ls.push_back(l);
  }
  const auto d = aggregate(ls, cs);
  EXPECT_EQ(d.any_harm_share, 1.0);
  EXPECT_EQ(d.broad_group_share.at(BroadGroup::perpetuating_violence), 1.0);
  EXPECT_EQ(d.broad_group_share.at(BroadGroup::false_authority_phishing), 1.0);
  EXPECT_EQ(d.broad_group_share.at(BroadGroup::incorrect_association), 0.0);
}

TEST(AggregateProperty, PermutationInvariantAndReplayable) {
  std::mt19937_64 rng(61);
  std::vector<detection::HallucinationCandidate> cs;
  std::vector<HarmLabel> ls;
  for (int i = 0; i < 40; ++i) cs.push_back(bare_candidate("p" + std::to_string(i), CandidateStatus::pending));
  for (int e = 0; e < 200; ++e) {
    const auto& c = cs[rng() % cs.size()];
    const bool confirmed = rng() % 3 != 0;
    std::set<HarmCategory> cats;
    if (confirmed)
      for (auto cat : kAllCategories)
        if (rng() % 6 == 0) cats.insert(cat);
    auto l = label(rng() % 2 ? "r1" : "r2", confirmed, cats, "2023-06-0" + std::to_string(1 + rng() % 5) + "T00:00:00Z");
    l.candidate_id = c.candidate_id;
    ls.push_back(l);
  }
  const auto statuses = replay_statuses(ls, cs);
  auto with_status = cs;
  for (auto& c : with_status) c.status = statuses.at(c.candidate_id);
  const auto base = to_json(aggregate(ls, with_status));
  for (int trial = 0; trial < 20; ++trial) {
    auto shuffled = ls;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_EQ(replay_statuses(shuffled, cs), statuses);
    ASSERT_EQ(to_json(aggregate(shuffled, with_status)), base);
  }
}

TEST(AggregateProperty, StoreReplayMatchesInMemory) {
  Stores s(12);
  std::mt19937_64 rng(62);
  for (int e = 0; e < 60; ++e) {
    const bool confirmed = rng() % 2;
    std::set<HarmCategory> cats;
    if (confirmed) cats.insert(kAllCategories[rng() % kAllCategories.size()]);
    s.labels->record_label(s.id(rng() % 12), label(rng() % 2 ? "r1" : "r2", confirmed, cats,
                                                   "2023-06-" + std::to_string(10 + e) + "T00:00:00Z"));
  }
  detection::CandidateStore again(s.dir / "candidates.jsonl");
  const auto log = read_labels(s.dir / "labels.jsonl");
  const auto live = s.candidates->list();
  const auto reloaded = again.list();
  EXPECT_EQ(live, reloaded);
  const auto replayed = replay_statuses(log, reloaded);
  for (const auto& c : reloaded) EXPECT_EQ(replayed.at(c.candidate_id), c.status);
  EXPECT_EQ(to_json(aggregate(log, reloaded)), to_json(aggregate(s.labels->events(), live)));
}
