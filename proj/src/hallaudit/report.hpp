#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallaudit/corpus.hpp"
#include "hallaudit/detection.hpp"
#include "hallaudit/harms.hpp"
#include "hallaudit/stats.hpp"

namespace hallaudit::report {

struct VadGroupMean {
  std::size_t segments = 0;
  std::optional<double> mean_share;
};

// Mean non-vocal share for the four (group, hallucinated) cells under one VAD profile.
struct VadGroupMeans {
  std::string profile;
  VadGroupMean aphasia_hallucinated;
  VadGroupMean aphasia_clean;
  VadGroupMean control_hallucinated;
  VadGroupMean control_clean;

  // aphasia+hallucinated > aphasia+clean > control+hallucinated > control+clean
  bool expected_ordering() const;
};

VadGroupMeans vad_group_means(const corpus::Corpus& corpus, const std::map<std::string, double>& share_by_segment,
                              const std::set<std::string>& positives, std::string profile);

struct CandidateCounts {
  std::size_t pending = 0;
  std::size_t confirmed = 0;
  std::size_t rejected = 0;
  std::size_t hallucinated_segments = 0;
};

CandidateCounts count_candidates(std::span<const detection::HallucinationCandidate> candidates);

struct MatchSection {
  stats::MatchSpec spec;
  stats::MatchResult result;
  std::optional<stats::RateComparison> rates;
};

// Every optional or empty member renders as an explicitly absent section.
struct ReportData {
  std::optional<corpus::CorpusSummary> corpus;
  std::optional<CandidateCounts> candidates;
  std::optional<stats::RateComparison> rates;
  std::optional<harms::HarmDistribution> harms;
  std::vector<VadGroupMeans> vad;
  std::vector<stats::RegressionResult> regressions;
  std::vector<MatchSection> matching;
  std::optional<detection::StabilityReport> stability;
  std::vector<std::string> notes;  // sections skipped and why
};

nlohmann::json report_json(const ReportData& data);
std::string report_markdown(const ReportData& data);

enum class Format { json, markdown };

// Writes report.json and/or report.md into `directory`.
void export_report(const ReportData& data, const std::filesystem::path& directory,
                   std::initializer_list<Format> formats = {Format::json, Format::markdown});

// Percent with a fixed number of decimals, e.g. percent(0.01706, 1) == "1.7%".
std::string percent(double ratio, int decimals);

}  // namespace hallaudit::report
