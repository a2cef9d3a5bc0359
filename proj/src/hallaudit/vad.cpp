#include "hallaudit/vad.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "hallaudit/error.hpp"

namespace hallaudit::vad {

using nlohmann::json;

namespace {

double to_db(double rms) { return rms > 1e-6 ? 20.0 * std::log10(rms) : kSilenceDb; }

// Mean-removed RMS, so a constant DC offset reads as silence.
double frame_energy_db(std::span<const float> frame) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (float s : frame) {
    sum += s;
    sum_sq += static_cast<double>(s) * s;
  }
  const double n = static_cast<double>(frame.size());
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  return to_db(std::sqrt(var));
}

double quantile(std::vector<double> values, double q) {
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

// Standard normal pairs from a 64-bit engine; used instead of
// std::normal_distribution so fixtures are identical across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : engine_(seed) {}
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace

void VadConfig::validate() const {
  if (frame_ms < 10.0 || frame_ms > 50.0) throw Error(ErrorKind::invalid_argument, "frame_ms must be in [10, 50]");
  if (hangover_frames < 0) throw Error(ErrorKind::invalid_argument, "hangover_frames must be >= 0");
  if (noise_percentile < 0.0 || noise_percentile > 1.0)
    throw Error(ErrorKind::invalid_argument, "noise_percentile must be in [0, 1]");
}

VadConfig default_profile() { return VadConfig{}; }

VadConfig strict_profile() {
  VadConfig c;
  c.frame_ms = 20.0;
  c.energy_threshold_db = -30.0;
  c.noise_margin_db = 12.0;
  c.hangover_frames = 3;
  c.profile_name = "strict";
  return c;
}

VadConfig lenient_profile() {
  VadConfig c;
  c.frame_ms = 30.0;
  c.energy_threshold_db = -40.0;
  c.noise_margin_db = 6.0;
  c.hangover_frames = 6;
  c.profile_name = "lenient";
  return c;
}

VadConfig profile_by_name(std::string_view name) {
  if (name == "default") return default_profile();
  if (name == "strict") return strict_profile();
  if (name == "lenient") return lenient_profile();
  throw Error(ErrorKind::invalid_argument, "unknown VAD profile '" + std::string(name) + "'");
}

VadAnalysis analyze(std::span<const float> samples, int sample_rate, const VadConfig& config) {
  config.validate();
  if (samples.empty()) throw Error(ErrorKind::invalid_argument, "empty audio");
  if (sample_rate <= 0) throw Error(ErrorKind::invalid_argument, "invalid sample rate");
  const auto frame_len =
      static_cast<std::size_t>(std::lround(static_cast<double>(sample_rate) * config.frame_ms / 1000.0));
  if (samples.size() < frame_len) throw Error(ErrorKind::invalid_argument, "audio shorter than one frame");

  const double rate = static_cast<double>(sample_rate);
  const std::size_t n_frames = (samples.size() + frame_len - 1) / frame_len;

  VadAnalysis result;
  result.frames.resize(n_frames);
  std::vector<double> energies(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t begin = f * frame_len;
    const std::size_t end = std::min(samples.size(), begin + frame_len);
    energies[f] = frame_energy_db(samples.subspan(begin, end - begin));
    result.frames[f].start = static_cast<double>(begin) / rate;
    result.frames[f].end = static_cast<double>(end) / rate;
    result.frames[f].energy_db = energies[f];
  }

  result.peak_db = *std::max_element(energies.begin(), energies.end());
  result.noise_floor_db = quantile(energies, config.noise_percentile);
  result.threshold_db = config.energy_threshold_db;
  if (config.adaptive) {
    const double adaptive =
        std::min(result.noise_floor_db + config.noise_margin_db, result.peak_db - config.max_below_peak_db);
    result.threshold_db = std::max(config.energy_threshold_db, adaptive);
  }

  int hangover = 0;
  for (auto& frame : result.frames) {
    frame.above_threshold = frame.energy_db > result.threshold_db;
    if (frame.above_threshold) {
      frame.vocal = true;
      hangover = config.hangover_frames;
    } else if (hangover > 0) {
      frame.vocal = true;
      --hangover;
    }
  }

  auto& profile = result.profile;
  profile.profile_name = config.profile_name;
  profile.total_duration = static_cast<double>(samples.size()) / rate;
  double vocal = 0.0;
  for (const auto& frame : result.frames) {
    if (!frame.vocal) continue;
    if (!profile.vocal_intervals.empty() && profile.vocal_intervals.back().end == frame.start) {
      profile.vocal_intervals.back().end = frame.end;
    } else {
      profile.vocal_intervals.push_back({frame.start, frame.end});
    }
    vocal += frame.end - frame.start;
  }
  profile.nonvocal_duration = std::clamp(profile.total_duration - vocal, 0.0, profile.total_duration);
  profile.nonvocal_share = profile.nonvocal_duration / profile.total_duration;
  return result;
}

VadProfile vad_profile(std::span<const float> samples, int sample_rate, const VadConfig& config,
                       std::string segment_id) {
  auto profile = analyze(samples, sample_rate, config).profile;
  profile.segment_id = std::move(segment_id);
  return profile;
}

std::string frames_csv(const VadAnalysis& analysis) {
  std::string out = "index,start_s,end_s,energy_db,above_threshold,vocal\n";
  for (std::size_t i = 0; i < analysis.frames.size(); ++i) {
    const auto& f = analysis.frames[i];
    out += fmt::format("{},{:.3f},{:.3f},{:.2f},{},{}\n", i, f.start, f.end, f.energy_db, f.above_threshold ? 1 : 0,
                       f.vocal ? 1 : 0);
  }
  return out;
}

std::vector<float> synth_fixture(std::span<const FixturePart> parts, int sample_rate, std::uint64_t seed) {
  if (sample_rate <= 0) throw Error(ErrorKind::invalid_argument, "invalid sample rate");
  double total = 0.0;
  for (const auto& p : parts) {
    if (!(p.duration > 0.0)) throw Error(ErrorKind::invalid_argument, "fixture parts need a positive duration");
    total += p.duration;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::invalid_argument, "fixture needs a positive total duration");

  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(std::ceil(total * sample_rate)));
  const double rate = static_cast<double>(sample_rate);
  for (std::size_t index = 0; index < parts.size(); ++index) {
    const auto& part = parts[index];
    const auto n = static_cast<std::size_t>(std::llround(part.duration * rate));
    const double rms = std::pow(10.0, part.level_db / 20.0);
    switch (part.kind) {
      case PartKind::silence:
        out.insert(out.end(), n, 0.0f);
        break;
      case PartKind::tone: {
        // Rotating phasor; renormalized periodically to stop amplitude drift.
        const double amplitude = rms * std::numbers::sqrt2;
        const double step = 2.0 * std::numbers::pi * part.frequency_hz / rate;
        const double c = std::cos(step);
        const double s = std::sin(step);
        double re = 1.0;
        double im = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          out.push_back(static_cast<float>(std::clamp(amplitude * im, -1.0, 1.0)));
          const double nre = re * c - im * s;
          im = re * s + im * c;
          re = nre;
          if ((k & 1023) == 1023) {
            const double norm = std::hypot(re, im);
            re /= norm;
            im /= norm;
          }
        }
        break;
      }
      case PartKind::noise: {
        Gaussian gauss(seed * 0x9E3779B97F4A7C15ULL + index + 1);
        for (std::size_t k = 0; k < n; ++k)
          out.push_back(static_cast<float>(std::clamp(rms * gauss.next(), -1.0, 1.0)));
        break;
      }
    }
  }
  return out;
}

double rms_db(std::span<const float> samples) {
  if (samples.empty()) return kSilenceDb;
  double sum_sq = 0.0;
  for (float s : samples) sum_sq += static_cast<double>(s) * s;
  return to_db(std::sqrt(sum_sq / static_cast<double>(samples.size())));
}

json to_json(const VadProfile& p) {
  auto intervals = json::array();
  for (const auto& iv : p.vocal_intervals) intervals.push_back(json::array({iv.start, iv.end}));
  return json{{"segment_id", p.segment_id},
              {"profile", p.profile_name},
              {"total_duration", p.total_duration},
              {"nonvocal_duration", p.nonvocal_duration},
              {"nonvocal_share", p.nonvocal_share},
              {"vocal_intervals", std::move(intervals)}};
}

json to_json(const VadConfig& c) {
  return json{{"frame_ms", c.frame_ms},
              {"energy_threshold_db", c.energy_threshold_db},
              {"adaptive", c.adaptive},
              {"noise_margin_db", c.noise_margin_db},
              {"noise_percentile", c.noise_percentile},
              {"max_below_peak_db", c.max_below_peak_db},
              {"hangover_frames", c.hangover_frames},
              {"profile_name", c.profile_name}};
}

VadConfig config_from_json(const json& j) {
  VadConfig c = profile_by_name(j.value("profile_name", j.value("profile", std::string("default"))));
  c.frame_ms = j.value("frame_ms", c.frame_ms);
  c.energy_threshold_db = j.value("energy_threshold_db", c.energy_threshold_db);
  c.adaptive = j.value("adaptive", c.adaptive);
  c.noise_margin_db = j.value("noise_margin_db", c.noise_margin_db);
  c.noise_percentile = j.value("noise_percentile", c.noise_percentile);
  c.max_below_peak_db = j.value("max_below_peak_db", c.max_below_peak_db);
  c.hangover_frames = j.value("hangover_frames", c.hangover_frames);
  c.validate();
  return c;
}

}  // namespace hallaudit::vad
