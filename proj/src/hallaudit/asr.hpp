#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hallaudit/alignment.hpp"
#include "hallaudit/corpus.hpp"
#include "hallaudit/taxonomy.hpp"

namespace hallaudit::asr {

enum class BackendKind { http, mock };

struct BackendDescriptor {
  std::string backend_id;
  BackendKind kind = BackendKind::mock;
  std::string endpoint;  // http only: scheme://host[:port]/path
  std::string language_hint = "en";
  int parallelism_limit = 1;
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_ms = 200;
  std::filesystem::path mock_config;  // mock only

  void validate() const;
};

struct TranscriptRun {
  std::string segment_id;
  std::string backend_id;
  std::string run_tag;
  std::string text;
  alignment::TokenList tokens;
  std::string created_at;

  bool operator==(const TranscriptRun&) const = default;
};

// Hallucination injector settings. The per-segment injection probability is
// sigmoid(intercept + slope * nonvocal_share).
struct MockConfig {
  double substitution_rate = 0.02;
  double hallucination_logit_intercept = -2.944439;  // sigmoid = 0.05
  double hallucination_logit_slope = 0.0;
  std::size_t min_injected_span = 4;
  std::map<HarmCategory, std::vector<std::string>> phrase_pools;
  std::map<HarmCategory, double> category_weights;  // missing -> 1.0
  double repetition_loop_rate = 0.0;
  double nontarget_script_rate = 0.0;
  std::uint64_t base_seed = 0;
  std::string simulated_time = "2023-05-03T00:00:00Z";

  static MockConfig with_default_pools();
  void validate() const;
};

// What the mock actually did; the detector is graded against these.
struct InjectionRecord {
  std::string segment_id;
  std::string run_tag;
  bool injected = false;
  double probability = 0.0;
  std::optional<alignment::TokenSpan> injected_span;
  std::optional<HarmCategory> category;

  bool operator==(const InjectionRecord&) const = default;
};

double injection_probability(const MockConfig& config, double nonvocal_share);

struct MockOutput {
  TranscriptRun run;
  InjectionRecord injection;
};

// Pure function of (base_seed, segment_id, run_tag). Whether a segment
// hallucinates ignores run_tag; what gets appended does not.
MockOutput mock_transcribe(const MockConfig& config, const corpus::AudioSegment& segment,
                           const corpus::GroundTruth& truth, const corpus::SegmentFeatures& features,
                           const std::string& run_tag, const std::string& backend_id = "mock");

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendDescriptor& descriptor() const = 0;
  // Throws Error(network) once retries are exhausted.
  virtual TranscriptRun transcribe(const corpus::AudioSegment& segment, const std::string& run_tag) = 0;
};

class MockBackend final : public Backend {
 public:
  MockBackend(BackendDescriptor descriptor, MockConfig config, const corpus::Corpus& corpus,
              std::vector<corpus::SegmentFeatures> features);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  TranscriptRun transcribe(const corpus::AudioSegment& segment, const std::string& run_tag) override;

  // Sorted by (segment_id, run_tag).
  std::vector<InjectionRecord> injections() const;
  const MockConfig& config() const { return config_; }

 private:
  BackendDescriptor descriptor_;
  MockConfig config_;
  const corpus::Corpus& corpus_;
  std::unordered_map<std::string, corpus::SegmentFeatures> features_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, InjectionRecord> injections_;
};

// POSTs WAV bytes with an X-Language-Hint header and reads {"text": ...}.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor descriptor);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  TranscriptRun transcribe(const corpus::AudioSegment& segment, const std::string& run_tag) override;

 private:
  BackendDescriptor descriptor_;
  std::string origin_;
  std::string path_;
};

TranscriptRun transcribe(Backend& backend, const corpus::AudioSegment& segment, const std::string& run_tag);

struct WorkItem {
  const corpus::AudioSegment* segment = nullptr;
  std::string run_tag;
};

std::vector<WorkItem> cross_product(std::span<const corpus::AudioSegment> segments,
                                    std::span<const std::string> run_tags);

struct BatchFailure {
  std::string segment_id;
  std::string run_tag;
  std::string message;
};

struct BatchResult {
  std::vector<TranscriptRun> runs;        // sorted by (segment_id, run_tag)
  std::vector<BatchFailure> failures;     // sorted the same way
  std::size_t attempted = 0;
  std::size_t planned = 0;
  bool aborted = false;                   // more than half of the planned calls failed
};

// Fans work out over `parallelism` threads. Individual failures are recorded,
// not thrown; once failures exceed half the plan no new calls are started.
BatchResult batch_transcribe(Backend& backend, std::span<const WorkItem> work, int parallelism);

std::string now_utc();

nlohmann::json to_json(const TranscriptRun& run);
TranscriptRun run_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InjectionRecord& record);
InjectionRecord injection_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MockConfig& config);
MockConfig mock_config_from_json(const nlohmann::json& j);
MockConfig load_mock_config(const std::filesystem::path& path);
nlohmann::json to_json(const BackendDescriptor& descriptor);
BackendDescriptor descriptor_from_json(const nlohmann::json& j);

// Run store: JSON lines, one TranscriptRun each; duplicate keys are rejected.
std::vector<TranscriptRun> read_runs(const std::filesystem::path& path);
void write_runs(const std::filesystem::path& path, std::span<const TranscriptRun> runs);

}  // namespace hallaudit::asr
