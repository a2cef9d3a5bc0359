#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hallaudit/alignment.hpp"
#include "hallaudit/asr.hpp"
#include "hallaudit/corpus.hpp"
#include "hallaudit/jsonl.hpp"
#include "hallaudit/text.hpp"

namespace hallaudit::detection {

struct DetectionConfig {
  std::size_t min_unstable_span = 2;
  bool require_longer_than_truth = true;
  std::size_t min_excess_tokens = 1;
  std::size_t repetition_ngram_max = 8;
  std::size_t repetition_min_repeats = 3;
  double script_mismatch_threshold = 0.3;
  text::Script expected_script = text::Script::latin;

  void validate() const;
};

enum class Signal { cross_run_unstable, longer_than_truth, repetition_loop, nontarget_script };
enum class CandidateStatus { pending, confirmed, rejected };

const char* to_string(Signal signal);
const char* to_string(CandidateStatus status);
Signal parse_signal(std::string_view name);
CandidateStatus parse_status(std::string_view name);

struct RunSpans {
  std::string run_tag;
  std::vector<alignment::TokenSpan> spans;

  bool operator==(const RunSpans&) const = default;
};

struct HallucinationCandidate {
  std::string candidate_id;
  std::string segment_id;
  std::string backend_id;
  std::pair<std::string, std::string> run_pair;
  std::vector<RunSpans> flagged_spans;  // one entry per run, in run_pair order
  std::set<Signal> signals;
  CandidateStatus status = CandidateStatus::pending;
  std::string created_at;

  bool operator==(const HallucinationCandidate&) const = default;
};

std::string candidate_id(std::string_view segment_id, std::string_view backend_id, std::string_view first_tag,
                         std::string_view second_tag);

// Flags the pair when the runs disagree over a multi-token region and (by
// default) at least one run is longer than the ground truth. Throws when the
// runs belong to different segments or backends.
std::optional<HallucinationCandidate> detect_candidate(const corpus::GroundTruth& truth, const asr::TranscriptRun& a,
                                                       const asr::TranscriptRun& b, const DetectionConfig& config,
                                                       std::string created_at = {});

// Longest stretch where an n-gram (n <= repetition_ngram_max) repeats back to
// back at least repetition_min_repeats times, unless the truth repeats it as
// often. A copy cut short by the end of the transcript counts when at least
// half of it is present.
std::optional<alignment::TokenSpan> detect_repetition(std::span<const std::string> tokens,
                                                      std::span<const std::string> truth_tokens,
                                                      const DetectionConfig& config);

struct ScriptFlag {
  bool flagged = false;
  double share = 0.0;
};

ScriptFlag flag_nontarget_script(std::string_view text, text::Script expected, double threshold);

// Which segments one run pair evaluated and which of them it flagged.
struct PairEvaluation {
  std::pair<std::string, std::string> run_pair;
  std::vector<std::string> evaluated;
  std::set<std::string> flagged;
};

struct SegmentStability {
  std::string segment_id;
  std::size_t flagged = 0;
  std::size_t evaluated = 0;
};

struct GroupStability {
  std::size_t persistent = 0;
  std::size_t ever_flagged = 0;
};

struct StabilityReport {
  std::size_t pairs = 0;
  std::vector<SegmentStability> segments;  // flagged at least once, sorted by id
  std::size_t persistent = 0;              // flagged in every pair
  std::size_t ever_flagged = 0;
  std::map<corpus::Group, GroupStability> by_group;

  std::string summary() const;  // e.g. "12/187 persistent"
};

using GroupLookup = std::function<std::optional<corpus::Group>(const std::string&)>;

// Throws when the pairs did not evaluate the same segment set.
StabilityReport stability_report(std::span<const PairEvaluation> pairs, const GroupLookup& group_of = {});

nlohmann::json to_json(const HallucinationCandidate& candidate);
HallucinationCandidate candidate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StabilityReport& report);
nlohmann::json to_json(const DetectionConfig& config);
DetectionConfig detection_config_from_json(const nlohmann::json& j);

// Append-only JSON-lines store: "created" events carry a full candidate,
// "status" events carry (candidate_id, status, at). Replay applies them in
// file order, so the latest event wins.
class CandidateStore {
 public:
  explicit CandidateStore(std::filesystem::path path);

  // Rewrites the store from scratch with the given candidates.
  static void write_fresh(const std::filesystem::path& path, std::span<const HallucinationCandidate> candidates);

  std::vector<HallucinationCandidate> list(std::optional<CandidateStatus> status = std::nullopt) const;
  std::optional<HallucinationCandidate> find(std::string_view candidate_id) const;
  std::size_t size() const;

  // Appends a status event. A candidate never returns to pending.
  void set_status(std::string_view candidate_id, CandidateStatus status, const std::string& at);

 private:
  void apply(const nlohmann::json& event, std::size_t line);

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, HallucinationCandidate, std::less<>> candidates_;
};

}  // namespace hallaudit::detection
