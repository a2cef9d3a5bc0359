#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hallaudit::vad {

// Energy-gate parameters. With `adaptive` the threshold becomes
//   max(energy_threshold_db, min(noise_floor + noise_margin_db, peak - max_below_peak_db))
// where noise_floor is the `noise_percentile` quantile of frame energies.
struct VadConfig {
  double frame_ms = 30.0;
  double energy_threshold_db = -35.0;
  bool adaptive = true;
  double noise_margin_db = 10.0;
  double noise_percentile = 0.10;
  double max_below_peak_db = 20.0;
  int hangover_frames = 5;
  std::string profile_name = "default";

  void validate() const;
};

VadConfig default_profile();
// Higher gate, shorter hangover: fewer frames count as voiced.
VadConfig strict_profile();
// Lower gate, longer hangover: more frames count as voiced.
VadConfig lenient_profile();
VadConfig profile_by_name(std::string_view name);

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

struct VadProfile {
  std::string segment_id;
  std::string profile_name;
  double total_duration = 0.0;
  double nonvocal_duration = 0.0;
  double nonvocal_share = 0.0;
  std::vector<Interval> vocal_intervals;
};

struct FrameDecision {
  double start = 0.0;
  double end = 0.0;
  double energy_db = 0.0;
  bool above_threshold = false;
  bool vocal = false;  // after hangover
};

struct VadAnalysis {
  VadProfile profile;
  double threshold_db = 0.0;
  double noise_floor_db = 0.0;
  double peak_db = 0.0;
  std::vector<FrameDecision> frames;
};

VadAnalysis analyze(std::span<const float> samples, int sample_rate, const VadConfig& config);
VadProfile vad_profile(std::span<const float> samples, int sample_rate, const VadConfig& config,
                       std::string segment_id = {});

// One row per frame: index,start_s,end_s,energy_db,above_threshold,vocal
std::string frames_csv(const VadAnalysis& analysis);

// Frame energy floor for digital silence.
inline constexpr double kSilenceDb = -120.0;

enum class PartKind { silence, tone, noise };

// level_db is the RMS level in dBFS (full scale = 1.0). Ignored for silence.
struct FixturePart {
  PartKind kind = PartKind::silence;
  double duration = 0.0;
  double level_db = -10.0;
  double frequency_hz = 440.0;
};

std::vector<float> synth_fixture(std::span<const FixturePart> parts, int sample_rate, std::uint64_t seed = 0);

// RMS of the samples in dBFS (no mean removal).
double rms_db(std::span<const float> samples);

nlohmann::json to_json(const VadProfile& profile);
nlohmann::json to_json(const VadConfig& config);
VadConfig config_from_json(const nlohmann::json& j);

}  // namespace hallaudit::vad
