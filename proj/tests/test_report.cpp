#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "hallaudit/report.hpp"
#include "support.hpp"

using namespace hallaudit;
using namespace hallaudit::report;
using testing_support::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

corpus::Corpus group_split(std::set<std::string>& positives) {
  std::vector<testing_support::SegmentSpec> specs;
  for (int i = 0; i < 5335; ++i) {
    specs.push_back({"a" + std::to_string(i), "A", 15.5, "one two"});
    if (i < 91) positives.insert(specs.back().id);
  }
  for (int i = 0; i < 7805; ++i) {
    specs.push_back({"c" + std::to_string(i), "C", 7.8, "one two three"});
    if (i < 94) positives.insert(specs.back().id);
  }
  return testing_support::make_corpus(
      {testing_support::speaker("A", corpus::Group::aphasia), testing_support::speaker("C", corpus::Group::control)},
      specs);
}

}  // namespace

TEST(Report, PercentFormatting) {
  EXPECT_EQ(percent(91.0 / 5335, 1), "1.7%");
  EXPECT_EQ(percent(94.0 / 7805, 1), "1.2%");
  EXPECT_EQ(percent(0.0, 1), "0.0%");
  EXPECT_EQ(percent(59.0 / 312, 0), "19%");
}

TEST(Report, AllSectionsAbsent) {
  const ReportData empty;
  const auto j = report_json(empty);
  for (const auto* key : {"corpus", "candidates", "rates", "harms", "vad_group_means", "regressions", "matching",
                          "stability"})
    EXPECT_EQ(j[key], (nlohmann::json{{"absent", true}})) << key;
  const auto md = report_markdown(empty);
  std::size_t count = 0;
  for (auto pos = md.find("Section absent"); pos != std::string::npos; pos = md.find("Section absent", pos + 1)) ++count;
  EXPECT_EQ(count, 8u);
}

TEST(Report, GroupRatesReadSeventeenVersusTwelve) {
  std::set<std::string> pos;
  const auto c = group_split(pos);
  ReportData d;
  d.corpus = corpus::corpus_summary(c);
  d.rates = stats::group_rate_comparison(c, pos);
  const auto md = report_markdown(d);
  EXPECT_NE(md.find("1.7% vs 1.2%"), std::string::npos) << md;
  const auto j = report_json(d);
  EXPECT_EQ(j["rates"]["aphasia"]["percent"], "1.7%");
  EXPECT_EQ(j["rates"]["control"]["percent"], "1.2%");
  EXPECT_EQ(j["harms"]["absent"], true);
}

TEST(Report, HarmSharesEchoed) {
  const auto f = testing_support::harm_fixture_312();
  ReportData d;
  d.harms = harms::aggregate(f.labels, f.candidates);
  d.candidates = count_candidates(f.candidates);
  const auto md = report_markdown(d);
  for (const auto* row : {"| perpetuating_violence | 59 | 19% |", "| incorrect_association | 41 | 13% |",
                          "| false_authority_phishing | 25 | 8% |", "| any harm | 119 | 38% |"})
    EXPECT_NE(md.find(row), std::string::npos) << row << "\n" << md;
  EXPECT_EQ(d.candidates->confirmed, 312u);
  EXPECT_EQ(d.candidates->rejected, 20u);
}

TEST(Report, EmptyStoreGivesZeroedSections) {
  ReportData d;
  d.candidates = count_candidates({});
  d.harms = harms::aggregate({}, {});
  const auto j = report_json(d);
  EXPECT_EQ(j["candidates"]["confirmed"], 0);
  EXPECT_EQ(j["harms"]["total_confirmed"], 0);
  EXPECT_EQ(j["harms"]["any_harm"]["share"], 0.0);
}

TEST(Report, VadMeansAndOrdering) {
  const auto c = testing_support::make_corpus(
      {testing_support::speaker("A", corpus::Group::aphasia), testing_support::speaker("C", corpus::Group::control)},
      {{"a1", "A", 1, "x"}, {"a2", "A", 1, "x"}, {"a3", "A", 1, "x"}, {"c1", "C", 1, "x"}, {"c2", "C", 1, "x"}});
  const std::map<std::string, double> share{{"a1", 0.424}, {"a2", 0.40}, {"a3", 0.412}, {"c1", 0.162}, {"c2", 0.154}};
  const auto v = vad_group_means(c, share, {"a1", "c1"}, "strict");
  EXPECT_DOUBLE_EQ(*v.aphasia_hallucinated.mean_share, 0.424);
  EXPECT_DOUBLE_EQ(*v.aphasia_clean.mean_share, 0.406);
  EXPECT_EQ(v.aphasia_clean.segments, 2u);
  EXPECT_TRUE(v.expected_ordering());
  const auto flipped = vad_group_means(c, share, {"a2", "c1"}, "strict");
  EXPECT_FALSE(flipped.expected_ordering());
  const auto missing = vad_group_means(c, share, {}, "strict");
  EXPECT_FALSE(missing.aphasia_hallucinated.mean_share.has_value());
  EXPECT_FALSE(missing.expected_ordering());
}

TEST(Report, ExportIsDeterministic) {
  std::set<std::string> pos;
  const auto c = group_split(pos);
  const auto f = testing_support::harm_fixture_312();
  ReportData d;
  d.corpus = corpus::corpus_summary(c);
  d.rates = stats::group_rate_comparison(c, pos);
  d.harms = harms::aggregate(f.labels, f.candidates);
  d.notes = {"regression skipped: no features"};
  TempDir a, b;
  export_report(d, a.path());
  export_report(d, b.path());
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "report.md"), slurp(b / "report.md"));
  EXPECT_FALSE(slurp(a / "report.md").empty());
  TempDir only;
  export_report(d, only.path(), {Format::json});
  EXPECT_TRUE(std::filesystem::exists(only / "report.json"));
  EXPECT_FALSE(std::filesystem::exists(only / "report.md"));
}
