#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hallaudit/alignment.hpp"

namespace hallaudit::corpus {

enum class Group { aphasia, control };
enum class Gender { female, male, other };
enum class Race { white, african_american, other };

const char* to_string(Group group);
const char* to_string(Gender gender);
const char* to_string(Race race);
Group parse_group(std::string_view name);

// Only speaker_id and group are mandatory; missing demographics drop a row
// from analyses that need them.
struct Speaker {
  std::string speaker_id;
  Group group = Group::control;
  std::optional<Gender> gender;
  std::optional<int> age;
  std::optional<Race> race;
  std::optional<int> years_education;
  std::optional<bool> english_first_language;
  std::optional<bool> vision_normal;
  std::optional<bool> hearing_normal;
  std::optional<std::string> employment_status;  // accepted, never analyzed

  bool operator==(const Speaker&) const = default;
};

struct AudioSegment {
  std::string segment_id;
  std::string speaker_id;
  std::string audio_path;              // as written in the manifest
  std::filesystem::path resolved_path;  // audio_path resolved against the manifest directory
  double duration = 0.0;
  int sample_rate = 0;

  bool operator==(const AudioSegment&) const = default;
};

struct GroundTruth {
  std::string segment_id;
  std::string text;
  alignment::TokenList tokens;

  std::size_t word_count() const { return tokens.size(); }
  bool operator==(const GroundTruth&) const = default;
};

struct SegmentFeatures {
  std::string segment_id;
  std::size_t word_count = 0;
  double duration = 0.0;
  double average_word_speed = 0.0;
  std::optional<double> nonvocal_duration;
  std::optional<double> nonvocal_share;

  // Fills the VAD fields; share is clamped into [0, 1].
  void set_nonvocal(double seconds);
  bool operator==(const SegmentFeatures&) const = default;
};

inline constexpr int kAcceptedSampleRates[] = {8000, 16000, 44100};

// Immutable after construction; safe for concurrent readers.
class Corpus {
 public:
  Corpus() = default;

  // Validates cross references and id uniqueness.
  static Corpus build(std::vector<Speaker> speakers, std::vector<AudioSegment> segments,
                      std::vector<GroundTruth> truths);

  const std::vector<Speaker>& speakers() const { return speakers_; }
  const std::vector<AudioSegment>& segments() const { return segments_; }
  const std::vector<GroundTruth>& truths() const { return truths_; }

  const Speaker* find_speaker(std::string_view id) const;
  const AudioSegment* find_segment(std::string_view id) const;
  const GroundTruth* find_truth(std::string_view segment_id) const;
  const Speaker& speaker_of(std::string_view segment_id) const;

  bool operator==(const Corpus& other) const {
    return speakers_ == other.speakers_ && segments_ == other.segments_ && truths_ == other.truths_;
  }

 private:
  std::vector<Speaker> speakers_;
  std::vector<AudioSegment> segments_;
  std::vector<GroundTruth> truths_;
  std::unordered_map<std::string, std::size_t> speaker_index_;
  std::unordered_map<std::string, std::size_t> segment_index_;
};

struct LoadOptions {
  // Compare each segment's declared duration and rate against its WAV header.
  bool verify_audio = true;
};

Corpus load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});
void save_manifest(const Corpus& corpus, const std::filesystem::path& path);

struct GroupSummary {
  std::size_t segments = 0;
  std::optional<double> mean_word_count;
  std::optional<double> mean_duration;
  std::optional<double> mean_word_speed;
};

struct CorpusSummary {
  std::size_t total_segments = 0;
  std::size_t total_speakers = 0;
  std::map<Group, GroupSummary> groups;  // always holds both groups
};

CorpusSummary corpus_summary(const Corpus& corpus);

std::vector<SegmentFeatures> compute_features(const Corpus& corpus);

nlohmann::json to_json(const Speaker& speaker);
nlohmann::json to_json(const AudioSegment& segment, const GroundTruth& truth);
nlohmann::json to_json(const CorpusSummary& summary);
nlohmann::json to_json(const SegmentFeatures& features);
SegmentFeatures features_from_json(const nlohmann::json& j);

}  // namespace hallaudit::corpus
