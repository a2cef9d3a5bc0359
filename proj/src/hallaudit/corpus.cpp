#include "hallaudit/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hallaudit/error.hpp"
#include "hallaudit/jsonl.hpp"
#include "hallaudit/wav.hpp"

namespace hallaudit::corpus {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kSpeakerFields{
    "kind", "speaker_id", "group", "gender", "age", "race", "years_education",
    "english_first_language", "vision_normal", "hearing_normal", "employment_status"};

const std::set<std::string, std::less<>> kSegmentFields{"kind",     "segment_id",  "speaker_id", "audio_path",
                                                        "duration", "sample_rate", "text"};

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

void warn_unknown(const json& record, const std::set<std::string, std::less<>>& known,
                  const std::filesystem::path& path, std::size_t line) {
  for (const auto& [key, _] : record.items()) {
    if (!known.contains(key)) spdlog::warn("{}ignoring unknown field '{}'", where(path, line), key);
  }
}

template <typename T>
std::optional<T> optional_field(const json& record, const char* name) {
  const auto it = record.find(name);
  if (it == record.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

Gender parse_gender(std::string_view s) {
  if (s == "female") return Gender::female;
  if (s == "male") return Gender::male;
  if (s == "other" || s == "unknown" || s == "other/unknown") return Gender::other;
  throw Error(ErrorKind::validation, "unknown gender '" + std::string(s) + "'");
}

Race parse_race(std::string_view s) {
  if (s == "white") return Race::white;
  if (s == "african_american") return Race::african_american;
  if (s == "other") return Race::other;
  throw Error(ErrorKind::validation, "unknown race '" + std::string(s) + "'");
}

Speaker parse_speaker(const json& r) {
  Speaker s;
  s.speaker_id = r.at("speaker_id").get<std::string>();
  if (s.speaker_id.empty()) throw Error(ErrorKind::validation, "empty speaker_id");
  s.group = parse_group(r.at("group").get<std::string>());
  if (auto g = optional_field<std::string>(r, "gender")) s.gender = parse_gender(*g);
  s.age = optional_field<int>(r, "age");
  if (auto race = optional_field<std::string>(r, "race")) s.race = parse_race(*race);
  s.years_education = optional_field<int>(r, "years_education");
  s.english_first_language = optional_field<bool>(r, "english_first_language");
  s.vision_normal = optional_field<bool>(r, "vision_normal");
  s.hearing_normal = optional_field<bool>(r, "hearing_normal");
  s.employment_status = optional_field<std::string>(r, "employment_status");
  if (s.age && (*s.age < 0 || *s.age >= 130))
    throw Error(ErrorKind::validation, "age out of range for speaker " + s.speaker_id);
  if (s.years_education && (*s.years_education < 0 || *s.years_education > 30))
    throw Error(ErrorKind::validation, "years_education out of range for speaker " + s.speaker_id);
  return s;
}

bool accepted_rate(int rate) {
  return std::find(std::begin(kAcceptedSampleRates), std::end(kAcceptedSampleRates), rate) !=
         std::end(kAcceptedSampleRates);
}

}  // namespace

const char* to_string(Group group) { return group == Group::aphasia ? "aphasia" : "control"; }

const char* to_string(Gender gender) {
  switch (gender) {
    case Gender::female: return "female";
    case Gender::male: return "male";
    case Gender::other: return "other";
  }
  return "other";
}

const char* to_string(Race race) {
  switch (race) {
    case Race::white: return "white";
    case Race::african_american: return "african_american";
    case Race::other: return "other";
  }
  return "other";
}

Group parse_group(std::string_view name) {
  if (name == "aphasia") return Group::aphasia;
  if (name == "control") return Group::control;
  throw Error(ErrorKind::validation, "unknown group '" + std::string(name) + "'");
}

void SegmentFeatures::set_nonvocal(double seconds) {
  nonvocal_duration = std::clamp(seconds, 0.0, duration);
  nonvocal_share = duration > 0.0 ? std::clamp(*nonvocal_duration / duration, 0.0, 1.0) : 0.0;
}

Corpus Corpus::build(std::vector<Speaker> speakers, std::vector<AudioSegment> segments,
                     std::vector<GroundTruth> truths) {
  Corpus c;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    if (!c.speaker_index_.emplace(speakers[i].speaker_id, i).second)
      throw Error(ErrorKind::validation, "duplicate speaker_id '" + speakers[i].speaker_id + "'");
  }
  if (truths.size() != segments.size())
    throw Error(ErrorKind::validation, "every segment needs exactly one ground truth");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (!c.segment_index_.emplace(seg.segment_id, i).second)
      throw Error(ErrorKind::validation, "duplicate segment_id '" + seg.segment_id + "'");
    if (!c.speaker_index_.contains(seg.speaker_id))
      throw Error(ErrorKind::validation,
                  "segment '" + seg.segment_id + "' references undeclared speaker '" + seg.speaker_id + "'");
    if (!(seg.duration > 0.0)) throw Error(ErrorKind::validation, "segment '" + seg.segment_id + "' has no duration");
    if (truths[i].segment_id != seg.segment_id)
      throw Error(ErrorKind::validation, "ground truth order does not match segments at '" + seg.segment_id + "'");
  }
  c.speakers_ = std::move(speakers);
  c.segments_ = std::move(segments);
  c.truths_ = std::move(truths);
  return c;
}

const Speaker* Corpus::find_speaker(std::string_view id) const {
  const auto it = speaker_index_.find(std::string(id));
  return it == speaker_index_.end() ? nullptr : &speakers_[it->second];
}

const AudioSegment* Corpus::find_segment(std::string_view id) const {
  const auto it = segment_index_.find(std::string(id));
  return it == segment_index_.end() ? nullptr : &segments_[it->second];
}

const GroundTruth* Corpus::find_truth(std::string_view segment_id) const {
  const auto it = segment_index_.find(std::string(segment_id));
  return it == segment_index_.end() ? nullptr : &truths_[it->second];
}

const Speaker& Corpus::speaker_of(std::string_view segment_id) const {
  const auto* seg = find_segment(segment_id);
  if (!seg) throw Error(ErrorKind::not_found, "unknown segment '" + std::string(segment_id) + "'");
  return *find_speaker(seg->speaker_id);
}

Corpus load_manifest(const std::filesystem::path& path, const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "manifest not found: " + path.string());
  const auto base = path.parent_path();

  std::vector<Speaker> speakers;
  std::vector<AudioSegment> segments;
  std::vector<GroundTruth> truths;

  jsonl::for_each(path, [&](const json& record, std::size_t line) {
    try {
      if (!record.is_object()) throw Error(ErrorKind::parse, "record is not an object");
      const auto kind = record.at("kind").get<std::string>();
      if (kind == "speaker") {
        warn_unknown(record, kSpeakerFields, path, line);
        speakers.push_back(parse_speaker(record));
      } else if (kind == "segment") {
        warn_unknown(record, kSegmentFields, path, line);
        AudioSegment seg;
        seg.segment_id = record.at("segment_id").get<std::string>();
        seg.speaker_id = record.at("speaker_id").get<std::string>();
        seg.audio_path = record.at("audio_path").get<std::string>();
        seg.resolved_path = std::filesystem::path(seg.audio_path).is_absolute() ? std::filesystem::path(seg.audio_path)
                                                                               : base / seg.audio_path;
        seg.duration = record.at("duration").get<double>();
        seg.sample_rate = record.at("sample_rate").get<int>();
        if (seg.segment_id.empty()) throw Error(ErrorKind::validation, "empty segment_id");
        if (!(seg.duration > 0.0)) throw Error(ErrorKind::validation, "duration must be positive");
        if (!accepted_rate(seg.sample_rate))
          throw Error(ErrorKind::validation, "unsupported sample_rate " + std::to_string(seg.sample_rate));
        GroundTruth truth;
        truth.segment_id = seg.segment_id;
        truth.text = record.at("text").get<std::string>();
        truth.tokens = alignment::normalize(truth.text);
        segments.push_back(std::move(seg));
        truths.push_back(std::move(truth));
      } else {
        throw Error(ErrorKind::parse, "unknown record kind '" + kind + "'");
      }
    } catch (const Error& e) {
      throw Error(e.kind(), where(path, line) + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, where(path, line) + "malformed record: " + e.what());
    }
  });

  auto corpus = Corpus::build(std::move(speakers), std::move(segments), std::move(truths));

  if (options.verify_audio) {
    for (const auto& seg : corpus.segments()) {
      const auto info = audio::read_wav_info(seg.resolved_path);
      if (info.sample_rate != seg.sample_rate)
        throw Error(ErrorKind::validation, "segment '" + seg.segment_id + "': manifest sample_rate " +
                                               std::to_string(seg.sample_rate) + " but WAV header says " +
                                               std::to_string(info.sample_rate));
      if (std::abs(info.duration() - seg.duration) > 1e-3)
        throw Error(ErrorKind::validation, "segment '" + seg.segment_id + "': manifest duration " +
                                               std::to_string(seg.duration) + " s but WAV holds " +
                                               std::to_string(info.duration()) + " s");
    }
  }
  return corpus;
}

json to_json(const Speaker& s) {
  json j{{"kind", "speaker"}, {"speaker_id", s.speaker_id}, {"group", to_string(s.group)}};
  if (s.gender) j["gender"] = to_string(*s.gender);
  if (s.age) j["age"] = *s.age;
  if (s.race) j["race"] = to_string(*s.race);
  if (s.years_education) j["years_education"] = *s.years_education;
  if (s.english_first_language) j["english_first_language"] = *s.english_first_language;
  if (s.vision_normal) j["vision_normal"] = *s.vision_normal;
  if (s.hearing_normal) j["hearing_normal"] = *s.hearing_normal;
  if (s.employment_status) j["employment_status"] = *s.employment_status;
  return j;
}

json to_json(const AudioSegment& seg, const GroundTruth& truth) {
  return json{{"kind", "segment"},         {"segment_id", seg.segment_id}, {"speaker_id", seg.speaker_id},
              {"audio_path", seg.audio_path}, {"duration", seg.duration},     {"sample_rate", seg.sample_rate},
              {"text", truth.text}};
}

void save_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  std::vector<json> records;
  records.reserve(corpus.speakers().size() + corpus.segments().size());
  for (const auto& s : corpus.speakers()) records.push_back(to_json(s));
  for (std::size_t i = 0; i < corpus.segments().size(); ++i)
    records.push_back(to_json(corpus.segments()[i], corpus.truths()[i]));
  jsonl::write_all(path, records);
}

CorpusSummary corpus_summary(const Corpus& corpus) {
  struct Acc {
    std::size_t n = 0;
    double words = 0, duration = 0, speed = 0;
  };
  std::map<Group, Acc> acc{{Group::aphasia, {}}, {Group::control, {}}};
  const auto features = compute_features(corpus);
  for (const auto& f : features) {
    auto& a = acc[corpus.speaker_of(f.segment_id).group];
    ++a.n;
    a.words += static_cast<double>(f.word_count);
    a.duration += f.duration;
    a.speed += f.average_word_speed;
  }
  CorpusSummary summary;
  summary.total_segments = corpus.segments().size();
  summary.total_speakers = corpus.speakers().size();
  for (const auto& [group, a] : acc) {
    GroupSummary g;
    g.segments = a.n;
    if (a.n > 0) {
      const auto n = static_cast<double>(a.n);
      g.mean_word_count = a.words / n;
      g.mean_duration = a.duration / n;
      g.mean_word_speed = a.speed / n;
    }
    summary.groups[group] = g;
  }
  return summary;
}

std::vector<SegmentFeatures> compute_features(const Corpus& corpus) {
  std::vector<SegmentFeatures> out;
  out.reserve(corpus.segments().size());
  for (std::size_t i = 0; i < corpus.segments().size(); ++i) {
    const auto& seg = corpus.segments()[i];
    SegmentFeatures f;
    f.segment_id = seg.segment_id;
    f.word_count = corpus.truths()[i].word_count();
    f.duration = seg.duration;
    f.average_word_speed = static_cast<double>(f.word_count) / seg.duration;
    out.push_back(std::move(f));
  }
  return out;
}

namespace {
json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
}  // namespace

json to_json(const CorpusSummary& summary) {
  json groups = json::object();
  for (const auto& [group, g] : summary.groups) {
    groups[to_string(group)] = json{{"segments", g.segments},
                                    {"mean_word_count", optional_number(g.mean_word_count)},
                                    {"mean_duration", optional_number(g.mean_duration)},
                                    {"mean_word_speed", optional_number(g.mean_word_speed)}};
  }
  return json{{"total_segments", summary.total_segments},
              {"total_speakers", summary.total_speakers},
              {"groups", std::move(groups)}};
}

json to_json(const SegmentFeatures& f) {
  return json{{"segment_id", f.segment_id},
              {"word_count", f.word_count},
              {"duration", f.duration},
              {"average_word_speed", f.average_word_speed},
              {"nonvocal_duration", optional_number(f.nonvocal_duration)},
              {"nonvocal_share", optional_number(f.nonvocal_share)}};
}

SegmentFeatures features_from_json(const json& j) {
  SegmentFeatures f;
  f.segment_id = j.at("segment_id").get<std::string>();
  f.word_count = j.at("word_count").get<std::size_t>();
  f.duration = j.at("duration").get<double>();
  f.average_word_speed = j.at("average_word_speed").get<double>();
  f.nonvocal_duration = optional_field<double>(j, "nonvocal_duration");
  f.nonvocal_share = optional_field<double>(j, "nonvocal_share");
  return f;
}

}  // namespace hallaudit::corpus
