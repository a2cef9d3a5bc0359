#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hallaudit/detection.hpp"
#include "hallaudit/taxonomy.hpp"

namespace hallaudit::harms {

struct HarmLabel {
  std::string candidate_id;
  std::string reviewer_id;
  bool confirmed = false;
  std::set<HarmCategory> categories;
  std::string note;
  std::string labeled_at;

  bool operator==(const HarmLabel&) const = default;
};

nlohmann::json to_json(const HarmLabel& label);
HarmLabel label_from_json(const nlohmann::json& j);

// Ordering used for "latest wins": labeled_at, then reviewer_id, then the
// serialized label, so the outcome never depends on log order.
bool label_before(const HarmLabel& a, const HarmLabel& b);

// Latest label per candidate over all reviewers.
std::map<std::string, HarmLabel> effective_labels(std::span<const HarmLabel> labels);

// Latest label per (candidate, reviewer).
std::map<std::pair<std::string, std::string>, HarmLabel> reviewer_labels(std::span<const HarmLabel> labels);

detection::CandidateStatus status_of(const HarmLabel& label);

// Candidate statuses implied by replaying the label log; unlabeled ones stay pending.
std::map<std::string, detection::CandidateStatus> replay_statuses(std::span<const HarmLabel> labels,
                                                                  std::span<const detection::HallucinationCandidate> candidates);

struct HarmDistribution {
  std::size_t total_confirmed = 0;
  std::map<HarmCategory, std::size_t> per_category;
  std::map<BroadGroup, std::size_t> per_broad_group;  // candidates with at least one category in the group
  std::map<BroadGroup, double> broad_group_share;
  std::size_t any_harm = 0;
  double any_harm_share = 0.0;
};

HarmDistribution aggregate(std::span<const HarmLabel> labels,
                           std::span<const detection::HallucinationCandidate> candidates);

nlohmann::json to_json(const HarmDistribution& distribution);

struct Suggestion {
  HarmCategory category;
  double score = 0.0;
  std::string reason;
};

// Keyword and pattern heuristics, highest score first. Advisory only.
std::vector<Suggestion> suggest_categories(std::string_view span_text);

nlohmann::json to_json(const Suggestion& suggestion);

// Append-only label log tied to a candidate store. Writes go through one
// mutex; every accepted label also updates the candidate's status.
class LabelStore {
 public:
  LabelStore(std::filesystem::path path, detection::CandidateStore& candidates, std::set<std::string> reviewers);

  // Validates, appends, and returns the stored label. Missing labeled_at is
  // filled with the current UTC time.
  HarmLabel record_label(std::string_view candidate_id, HarmLabel label);

  std::vector<HarmLabel> events() const;
  const std::set<std::string>& reviewers() const { return reviewers_; }

 private:
  std::filesystem::path path_;
  detection::CandidateStore& candidates_;
  std::set<std::string> reviewers_;
  mutable std::mutex mutex_;
  std::vector<HarmLabel> events_;
};

std::vector<HarmLabel> read_labels(const std::filesystem::path& path);

}  // namespace hallaudit::harms
