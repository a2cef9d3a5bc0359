#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "hallaudit/corpus.hpp"
#include "hallaudit/vad.hpp"

namespace hallaudit::simulation {

struct GroupShape {
  std::size_t segments = 0;
  std::size_t speakers = 10;
  double mean_duration = 10.0;  // seconds; matched exactly on a 10 ms grid
  double mean_words = 14.0;
  double nonvocal_mean = 0.3;   // beta-distributed pause share
  double nonvocal_sd = 0.1;
};

struct SimulationConfig {
  GroupShape aphasia{100, 10, 15.5, 12.0, 0.41, 0.18};
  GroupShape control{100, 10, 7.8, 16.0, 0.15, 0.12};
  int sample_rate = 8000;
  double demographics_fraction = 1.0;  // share of speakers with full demographics
  double speech_level_db = -20.0;
  double pause_level_db = -60.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Corpus plus the pause layout each segment's audio is rendered from.
struct SyntheticCorpus {
  corpus::Corpus corpus;
  std::vector<double> target_share;                  // per segment, corpus order
  std::vector<std::vector<vad::FixturePart>> parts;  // per segment, corpus order
  int sample_rate = 8000;
};

// Audio paths are "audio/<segment_id>.wav" relative to the manifest.
SyntheticCorpus synthesize_corpus(const SimulationConfig& config);

std::vector<float> render_segment(const SyntheticCorpus& synthetic, std::size_t index, std::uint64_t seed);

// Writes manifest.jsonl and audio/*.wav under `directory`; returns the manifest path.
std::filesystem::path write_corpus(const SyntheticCorpus& synthetic, const std::filesystem::path& directory,
                                   std::uint64_t seed);

nlohmann::json to_json(const SimulationConfig& config);
SimulationConfig simulation_config_from_json(const nlohmann::json& j);

}  // namespace hallaudit::simulation
