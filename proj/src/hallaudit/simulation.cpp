#include "hallaudit/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "hallaudit/error.hpp"
#include "hallaudit/hash.hpp"
#include "hallaudit/jsonl.hpp"
#include "hallaudit/wav.hpp"

namespace hallaudit::simulation {

using nlohmann::json;

namespace {

constexpr const char* kVocabulary[] = {
    "the",    "a",      "and",    "she",    "he",      "they",    "went",    "to",     "store",   "bread",
    "butter", "pick",   "take",   "put",    "on",      "table",   "then",    "cat",    "dog",     "boy",
    "girl",   "ball",   "dress",  "pretty", "house",   "water",   "kitchen", "window", "mother",  "cookie",
    "jar",    "stool",  "fall",   "sink",   "plate",   "dishes",  "outside", "garden", "tree",    "climb",
    "ladder", "fire",   "truck",  "rescue", "little",  "big",     "old",     "new",    "happy",   "sad",
    "walk",   "run",    "sit",    "stand",  "look",    "see",     "say",     "tell",   "story",   "about",
    "day",    "night",  "morning", "car",   "drive",   "road",    "umbrella", "rain",  "wet",     "dry",
    "home",   "door",   "open",   "close",  "sandwich", "peanut", "jelly",   "knife",  "spread",  "slice",
    "glove",  "shoe",   "prince", "castle", "stepmother", "sisters", "clock", "midnight", "slipper", "coach",
    "very",   "really", "just",   "so",     "but",     "because", "when",    "after",  "before",  "again",
    "I",      "you",    "we",     "it",     "was",     "is",      "were",    "had",    "have",    "get",
    "good",   "nice",   "well",   "okay",   "yes",     "no",      "maybe",   "think",  "know",    "remember",
};

double draw_beta(std::mt19937_64& rng, double mean, double sd) {
  const double common = mean * (1.0 - mean) / (sd * sd) - 1.0;
  if (common <= 0.0) throw Error(ErrorKind::invalid_argument, "nonvocal_sd too large for a beta distribution");
  std::gamma_distribution<double> ga(mean * common, 1.0);
  std::gamma_distribution<double> gb((1.0 - mean) * common, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

// Integer draws scaled so they sum exactly to `total`, each at least `floor`.
std::vector<long> exact_sum(std::vector<double> raw, long total, long floor) {
  const auto n = static_cast<long>(raw.size());
  std::vector<long> out(raw.size());
  if (n == 0) return out;
  double raw_sum = 0.0;
  for (double r : raw) raw_sum += r;
  long sum = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::max(floor, std::lround(raw[i] / raw_sum * static_cast<double>(total)));
    sum += out[i];
  }
  for (std::size_t i = 0; sum != total; i = (i + 1) % raw.size()) {
    if (sum < total) {
      ++out[i];
      ++sum;
    } else if (out[i] > floor) {
      --out[i];
      --sum;
    }
  }
  return out;
}

}  // namespace

void SimulationConfig::validate() const {
  for (const auto* g : {&aphasia, &control}) {
    if (g->segments > 0 && g->speakers == 0) throw Error(ErrorKind::invalid_argument, "a group with segments needs speakers");
    if (!(g->mean_duration >= 1.5)) throw Error(ErrorKind::invalid_argument, "mean_duration must be >= 1.5 s");
    if (!(g->mean_words >= 1.0)) throw Error(ErrorKind::invalid_argument, "mean_words must be >= 1");
    if (!(g->nonvocal_mean > 0.0 && g->nonvocal_mean < 1.0) || !(g->nonvocal_sd > 0.0))
      throw Error(ErrorKind::invalid_argument, "nonvocal_mean must be in (0, 1) with a positive sd");
  }
  if (std::find(std::begin(corpus::kAcceptedSampleRates), std::end(corpus::kAcceptedSampleRates), sample_rate) ==
      std::end(corpus::kAcceptedSampleRates))
    throw Error(ErrorKind::invalid_argument, fmt::format("unsupported sample_rate {}", sample_rate));
  if (!(demographics_fraction >= 0.0 && demographics_fraction <= 1.0))
    throw Error(ErrorKind::invalid_argument, "demographics_fraction must be in [0, 1]");
}

SyntheticCorpus synthesize_corpus(const SimulationConfig& config) {
  config.validate();
  SyntheticCorpus out;
  out.sample_rate = config.sample_rate;
  std::vector<corpus::Speaker> speakers;
  std::vector<corpus::AudioSegment> segments;
  std::vector<corpus::GroundTruth> truths;
  constexpr std::size_t vocab = std::size(kVocabulary);

  for (const auto group : {corpus::Group::aphasia, corpus::Group::control}) {
    const auto& shape = group == corpus::Group::aphasia ? config.aphasia : config.control;
    const std::string prefix = group == corpus::Group::aphasia ? "aph" : "ctl";
    std::mt19937_64 rng(hash::derive_seed(config.seed, {"corpus", prefix}));

    const auto with_demographics =
        static_cast<std::size_t>(std::lround(config.demographics_fraction * static_cast<double>(shape.speakers)));
    for (std::size_t s = 0; s < shape.speakers; ++s) {
      corpus::Speaker sp;
      sp.speaker_id = fmt::format("{}-s{:03}", prefix, s + 1);
      sp.group = group;
      std::normal_distribution<double> age(group == corpus::Group::aphasia ? 62.0 : 58.0, 12.0);
      std::normal_distribution<double> education(15.0, 2.5);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const int a = std::clamp(static_cast<int>(std::lround(age(rng))), 20, 95);
      const int e = std::clamp(static_cast<int>(std::lround(education(rng))), 8, 22);
      const double gender = u(rng), race = u(rng), english = u(rng), vision = u(rng), hearing = u(rng);
      if (s < with_demographics) {
        sp.gender = gender < 0.45 ? corpus::Gender::female : corpus::Gender::male;
        sp.age = a;
        sp.race = race < 0.8 ? corpus::Race::white : (race < 0.92 ? corpus::Race::african_american : corpus::Race::other);
        sp.years_education = e;
        sp.english_first_language = english < 0.9;
        sp.vision_normal = vision < 0.8;
        sp.hearing_normal = hearing < 0.85;
      }
      speakers.push_back(std::move(sp));
    }

    const std::size_t n = shape.segments;
    std::lognormal_distribution<double> dur_dist(0.0, 0.35);
    std::normal_distribution<double> word_dist(1.0, 0.35);
    std::vector<double> raw_dur(n), raw_words(n);
    for (std::size_t i = 0; i < n; ++i) {
      raw_dur[i] = dur_dist(rng);
      raw_words[i] = std::max(0.1, word_dist(rng));
    }
    // Durations on a 10 ms grid with an exact group mean.
    const auto centis = exact_sum(raw_dur, std::lround(shape.mean_duration * 100.0 * static_cast<double>(n)), 150);
    const auto words = exact_sum(raw_words, std::lround(shape.mean_words * static_cast<double>(n)), 1);

    std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
    std::uniform_real_distribution<double> freq(150.0, 400.0);
    for (std::size_t i = 0; i < n; ++i) {
      corpus::AudioSegment seg;
      seg.segment_id = fmt::format("{}-{:05}", prefix, i + 1);
      seg.speaker_id = speakers[speakers.size() - shape.speakers + i % shape.speakers].speaker_id;
      seg.audio_path = "audio/" + seg.segment_id + ".wav";
      seg.sample_rate = config.sample_rate;
      const long total_samples = centis[i] * config.sample_rate / 100;
      seg.duration = static_cast<double>(total_samples) / config.sample_rate;

      std::string text;
      for (long w = 0; w < words[i]; ++w) {
        if (w > 0) text += ' ';
        text += kVocabulary[pick(rng)];
      }
      if (!text.empty()) text += '.';
      corpus::GroundTruth truth{seg.segment_id, text, alignment::normalize(text)};

      const double share = std::clamp(draw_beta(rng, shape.nonvocal_mean, shape.nonvocal_sd), 0.02, 0.9);
      const long pause = std::lround(share * static_cast<double>(total_samples));
      const long lead = std::lround(0.6 * static_cast<double>(pause));
      const long mid = pause - lead;
      const long speech = total_samples - pause;
      const long first = speech / 2;
      const long second = speech - first;
      const double f = freq(rng);
      const auto secs = [&](long samples) { return static_cast<double>(samples) / config.sample_rate; };
      std::vector<vad::FixturePart> parts;
      const auto add = [&](vad::PartKind kind, long samples, double level) {
        if (samples > 0) parts.push_back({kind, secs(samples), level, f});
      };
      add(vad::PartKind::noise, lead, config.pause_level_db);
      add(vad::PartKind::tone, first, config.speech_level_db);
      add(vad::PartKind::noise, mid, config.pause_level_db);
      add(vad::PartKind::tone, second, config.speech_level_db);

      out.target_share.push_back(static_cast<double>(pause) / static_cast<double>(total_samples));
      out.parts.push_back(std::move(parts));
      segments.push_back(std::move(seg));
      truths.push_back(std::move(truth));
    }
  }
  out.corpus = corpus::Corpus::build(std::move(speakers), std::move(segments), std::move(truths));
  return out;
}

std::vector<float> render_segment(const SyntheticCorpus& synthetic, std::size_t index, std::uint64_t seed) {
  const auto& seg = synthetic.corpus.segments().at(index);
  return vad::synth_fixture(synthetic.parts.at(index), synthetic.sample_rate,
                            hash::derive_seed(seed, {"audio", seg.segment_id}));
}

std::filesystem::path write_corpus(const SyntheticCorpus& synthetic, const std::filesystem::path& directory,
                                   std::uint64_t seed) {
  std::filesystem::create_directories(directory / "audio");
  for (std::size_t i = 0; i < synthetic.corpus.segments().size(); ++i) {
    const auto& seg = synthetic.corpus.segments()[i];
    audio::Audio a{synthetic.sample_rate, render_segment(synthetic, i, seed)};
    audio::write_wav(directory / seg.audio_path, a);
  }
  const auto manifest = directory / "manifest.jsonl";
  corpus::save_manifest(synthetic.corpus, manifest);
  return manifest;
}

namespace {

json shape_json(const GroupShape& g) {
  return json{{"segments", g.segments},       {"speakers", g.speakers},       {"mean_duration", g.mean_duration},
              {"mean_words", g.mean_words},   {"nonvocal_mean", g.nonvocal_mean}, {"nonvocal_sd", g.nonvocal_sd}};
}

GroupShape shape_from_json(const json& j, GroupShape g) {
  g.segments = j.value("segments", g.segments);
  g.speakers = j.value("speakers", g.speakers);
  g.mean_duration = j.value("mean_duration", g.mean_duration);
  g.mean_words = j.value("mean_words", g.mean_words);
  g.nonvocal_mean = j.value("nonvocal_mean", g.nonvocal_mean);
  g.nonvocal_sd = j.value("nonvocal_sd", g.nonvocal_sd);
  return g;
}

}  // namespace

json to_json(const SimulationConfig& c) {
  return json{{"aphasia", shape_json(c.aphasia)},
              {"control", shape_json(c.control)},
              {"sample_rate", c.sample_rate},
              {"demographics_fraction", c.demographics_fraction},
              {"speech_level_db", c.speech_level_db},
              {"pause_level_db", c.pause_level_db},
              {"seed", c.seed}};
}

SimulationConfig simulation_config_from_json(const json& j) {
  SimulationConfig c;
  if (j.contains("aphasia")) c.aphasia = shape_from_json(j["aphasia"], c.aphasia);
  if (j.contains("control")) c.control = shape_from_json(j["control"], c.control);
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.demographics_fraction = j.value("demographics_fraction", c.demographics_fraction);
  c.speech_level_db = j.value("speech_level_db", c.speech_level_db);
  c.pause_level_db = j.value("pause_level_db", c.pause_level_db);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

}  // namespace hallaudit::simulation
