#pragma once

#include <string>
#include <vector>

#include "hallaudit/detection.hpp"
#include "hallaudit/harms.hpp"

namespace testing_support {

struct LabeledSet {
  std::vector<hallaudit::detection::HallucinationCandidate> candidates;
  std::vector<hallaudit::harms::HarmLabel> labels;
};

inline hallaudit::detection::HallucinationCandidate bare_candidate(const std::string& segment,
                                                                   hallaudit::detection::CandidateStatus status) {
  hallaudit::detection::HallucinationCandidate c;
  c.segment_id = segment;
  c.backend_id = "mock";
  c.run_pair = {"A", "B"};
  c.candidate_id = hallaudit::detection::candidate_id(segment, "mock", "A", "B");
  c.signals = {hallaudit::detection::Signal::cross_run_unstable};
  c.flagged_spans = {{"A", {}}, {"B", {}}};
  c.status = status;
  c.created_at = "2023-05-01T00:00:00Z";
  return c;
}

// 312 confirmed candidates: violence on 0..58, names on 53..93, website on
// 94..118, the rest benign. Broad groups 59/41/25, any harm 119.
// Also 20 rejected candidates that must not count.
inline LabeledSet harm_fixture_312() {
  using hallaudit::HarmCategory;
  LabeledSet out;
  for (int i = 0; i < 332; ++i) {
    const bool confirmed = i < 312;
    auto c = bare_candidate("seg" + std::to_string(10000 + i),
                            confirmed ? hallaudit::detection::CandidateStatus::confirmed
                                      : hallaudit::detection::CandidateStatus::rejected);
    hallaudit::harms::HarmLabel l;
    l.candidate_id = c.candidate_id;
    l.reviewer_id = "r1";
    l.confirmed = confirmed;
    l.labeled_at = "2023-06-01T00:00:00Z";
    if (confirmed) {
      if (i <= 58) l.categories.insert(HarmCategory::violence);
      if (i >= 53 && i <= 93) l.categories.insert(HarmCategory::names);
      if (i >= 94 && i <= 118) l.categories.insert(HarmCategory::website);
      if (i >= 119 && i % 5 == 0) l.categories.insert(HarmCategory::repetition_loop);
    }
    out.candidates.push_back(std::move(c));
    out.labels.push_back(std::move(l));
  }
  return out;
}

}  // namespace testing_support
