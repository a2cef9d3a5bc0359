#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallaudit/asr.hpp"
#include "hallaudit/corpus.hpp"
#include "hallaudit/detection.hpp"
#include "hallaudit/harms.hpp"
#include "hallaudit/report.hpp"
#include "hallaudit/simulation.hpp"
#include "hallaudit/stats.hpp"
#include "hallaudit/vad.hpp"

namespace hallaudit::pipeline {

struct RunTagSpec {
  std::string tag;
  std::optional<std::size_t> sample_size;  // seeded subset of segments
};

enum class Adjudication { manual, oracle };

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8765;
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path output = "hallaudit-out";
  std::uint64_t seed = 0;
  std::vector<asr::BackendDescriptor> backends;
  std::vector<RunTagSpec> run_tags;
  detection::DetectionConfig detection;
  vad::VadConfig vad;
  std::vector<std::string> robustness_profiles{"strict", "lenient"};
  std::vector<stats::RegressionSpec> regressions;
  std::vector<stats::MatchSpec> matching;
  std::set<std::string> reviewers;
  Adjudication adjudication = Adjudication::manual;
  int parallelism = 1;
  ServiceConfig service;
  std::optional<simulation::SimulationConfig> simulation;
  std::filesystem::path mock_config;  // default for simulate

  // Needs at least two run tags; ids and tags must be filename-safe and unique.
  void validate() const;
  const asr::BackendDescriptor& backend(std::string_view backend_id) const;
};

inline constexpr const char* kOracleReviewer = "mock-oracle";

// Relative paths in the file resolve against its directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const PipelineConfig& config);

enum class Stage { ingest, vad, transcribe, detect, adjudicate, analyze, report };
inline constexpr Stage kStageOrder[] = {Stage::ingest, Stage::vad,     Stage::transcribe, Stage::detect,
                                        Stage::adjudicate, Stage::analyze, Stage::report};

const char* to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct StageOutcome {
  std::string key;  // e.g. "transcribe.mock.2023-05"
  bool skipped = false;
};

// Everything the analysis reads, loaded from the output directory.
struct AnalysisInputs {
  corpus::Corpus corpus;
  std::vector<corpus::SegmentFeatures> features;
  std::map<std::string, std::map<std::string, double>> shares_by_profile;
  std::vector<detection::HallucinationCandidate> candidates;
  std::vector<harms::HarmLabel> labels;
  std::vector<detection::PairEvaluation> pairs;
};

report::ReportData build_report(const PipelineConfig& config, const AnalysisInputs& inputs);

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }

  // All stages in order; stages whose inputs are unchanged are skipped.
  std::vector<StageOutcome> run();
  std::vector<StageOutcome> run_stage(Stage stage);
  StageOutcome transcribe(const std::string& backend_id, const std::string& run_tag);

  corpus::Corpus load_corpus() const;
  AnalysisInputs load_analysis_inputs() const;
  // Per-frame VAD decisions for one segment under the configured profile.
  std::string vad_frames_csv(const std::string& segment_id) const;

  std::filesystem::path candidates_path() const;
  std::filesystem::path labels_path() const;
  std::filesystem::path report_dir() const;

 private:
  StageOutcome transcribe_run(const std::string& backend_id, const std::string& run_tag);
  StageOutcome stage_ingest();
  StageOutcome stage_vad();
  std::vector<StageOutcome> stage_transcribe_all();
  StageOutcome stage_detect();
  StageOutcome stage_adjudicate();
  StageOutcome stage_analyze();
  StageOutcome stage_report();

  std::vector<StageOutcome> dispatch(Stage stage);
  std::vector<std::string> profile_names() const;
  std::vector<std::string> sampled_segments(const corpus::Corpus& corpus, const RunTagSpec& spec) const;
  std::filesystem::path runs_path(const std::string& backend_id, const std::string& tag) const;
  std::filesystem::path injections_path(const std::string& backend_id, const std::string& tag) const;

  bool up_to_date(const std::string& key, const std::string& digest, const std::vector<std::filesystem::path>& outputs) const;
  void record(const std::string& key, const std::string& digest) const;
  std::string recorded_digest(const std::string& key) const;

  PipelineConfig config_;
};

// The config a simulation runs with: the synthetic manifest under
// <output>/simulation, one mock backend, oracle adjudication. An empty
// `mock_config` falls back to config.mock_config.
PipelineConfig simulated_config(PipelineConfig config, const std::filesystem::path& mock_config = {});

// Synthesizes the corpus (unless already current) and runs every stage.
std::vector<StageOutcome> simulate(PipelineConfig config, const std::filesystem::path& mock_config = {});

}  // namespace hallaudit::pipeline
