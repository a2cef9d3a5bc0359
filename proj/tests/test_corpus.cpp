#include <gtest/gtest.h>

#include <fstream>

#include <json.hpp>

#include "hallaudit/corpus.hpp"
#include "hallaudit/error.hpp"
#include "hallaudit/jsonl.hpp"
#include "hallaudit/simulation.hpp"
#include "hallaudit/wav.hpp"
#include "support.hpp"

using namespace hallaudit;
using namespace hallaudit::corpus;
using nlohmann::json;
using testing_support::TempDir;

namespace {

void write_lines(const std::filesystem::path& p, const std::vector<json>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l.dump() << "\n";
}

json speaker_rec(const std::string& id, const std::string& group) {
  return json{{"kind", "speaker"}, {"speaker_id", id}, {"group", group}, {"gender", "female"}, {"age", 60},
              {"race", "white"}, {"years_education", 14}, {"english_first_language", true},
              {"vision_normal", true}, {"hearing_normal", false}};
}

json segment_rec(const std::string& id, const std::string& speaker, double duration, const std::string& text) {
  return json{{"kind", "segment"}, {"segment_id", id}, {"speaker_id", speaker}, {"audio_path", "audio/" + id + ".wav"},
              {"duration", duration}, {"sample_rate", 8000}, {"text", text}};
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

}  // namespace

TEST(Manifest, EmptyFile) {
  TempDir dir;
  write_lines(dir / "m.jsonl", {});
  const auto c = load_manifest(dir / "m.jsonl");
  EXPECT_TRUE(c.segments().empty());
  EXPECT_TRUE(c.speakers().empty());
}

TEST(Manifest, TwoSpeakersFourSegments) {
  TempDir dir;
  std::vector<json> lines{speaker_rec("s1", "aphasia"), speaker_rec("s2", "control")};
  for (int i = 0; i < 4; ++i) {
    const auto id = "seg" + std::to_string(i);
    testing_support::write_tone(dir / ("audio/" + id + ".wav"), 1.0);
    lines.push_back(segment_rec(id, i < 2 ? "s1" : "s2", 1.0, "hello there"));
  }
  write_lines(dir / "m.jsonl", lines);
  const auto c = load_manifest(dir / "m.jsonl");
  const auto s = corpus_summary(c);
  EXPECT_EQ(s.groups.at(Group::aphasia).segments, 2u);
  EXPECT_EQ(s.groups.at(Group::control).segments, 2u);
  EXPECT_EQ(s.total_segments, 4u);
  EXPECT_EQ(c.speakers()[0].hearing_normal, false);
}

TEST(Manifest, DanglingSpeakerNamed) {
  TempDir dir;
  write_lines(dir / "m.jsonl", {speaker_rec("s1", "aphasia"), segment_rec("x", "s99", 1.0, "a")});
  try {
    load_manifest(dir / "m.jsonl", {.verify_audio = false});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("s99"), std::string::npos);
  }
}

TEST(Manifest, Errors) {
  TempDir dir;
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "missing.jsonl"); }), ErrorKind::io);

  write_lines(dir / "dup.jsonl", {speaker_rec("s1", "aphasia"), segment_rec("x", "s1", 1.0, "a"),
                                  segment_rec("x", "s1", 1.0, "b")});
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "dup.jsonl", {.verify_audio = false}); }), ErrorKind::validation);

  {
    std::ofstream out(dir / "bad.jsonl");
    out << speaker_rec("s1", "aphasia").dump() << "\n{not json\n";
  }
  try {
    load_manifest(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }

  auto old = speaker_rec("s1", "aphasia");
  old["age"] = 130;
  write_lines(dir / "age.jsonl", {old});
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "age.jsonl"); }), ErrorKind::validation);
}

TEST(Manifest, AudioHeaderMismatch) {
  TempDir dir;
  testing_support::write_tone(dir / "audio/a.wav", 2.0);
  write_lines(dir / "m.jsonl", {speaker_rec("s1", "aphasia"), segment_rec("a", "s1", 1.0, "x")});
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "m.jsonl"); }), ErrorKind::validation);
  write_lines(dir / "ok.jsonl", {speaker_rec("s1", "aphasia"), segment_rec("a", "s1", 2.0005, "x")});
  EXPECT_NO_THROW(load_manifest(dir / "ok.jsonl"));
}

TEST(Manifest, RoundTrip) {
  TempDir dir;
  auto sp = speaker_rec("s1", "aphasia");
  sp["employment_status"] = "retired";
  sp["unknown_field"] = 3;
  write_lines(dir / "m.jsonl", {sp, speaker_rec("s2", "control"), segment_rec("a", "s1", 2.5, "Well, um... yes"),
                                segment_rec("b", "s2", 1.25, "")});
  const auto c = load_manifest(dir / "m.jsonl", {.verify_audio = false});
  save_manifest(c, dir / "again.jsonl");
  const auto d = load_manifest(dir / "again.jsonl", {.verify_audio = false});
  EXPECT_EQ(c, d);
}

TEST(Features, Arithmetic) {
  using testing_support::make_corpus;
  using testing_support::speaker;
  const auto c = make_corpus({speaker("s", Group::control)},
                             {{"a", "s", 8.0, "one two three four five six seven eight nine ten eleven twelve thirteen "
                                              "fourteen fifteen sixteen"},
                              {"b", "s", 5.0, ""},
                              {"c", "s", 15.5, "a b c d e f g h i j k l"},
                              {"d", "s", 10.0, "a b c d e f g h i j"}});
  const auto f = compute_features(c);
  EXPECT_DOUBLE_EQ(f[0].average_word_speed, 2.0);
  EXPECT_DOUBLE_EQ(f[1].average_word_speed, 0.0);
  EXPECT_NEAR(f[2].average_word_speed, 0.774, 5e-4);
  EXPECT_DOUBLE_EQ(f[3].average_word_speed, 1.0);
  EXPECT_FALSE(f[0].nonvocal_share.has_value());
}

TEST(Features, SetNonvocalClamps) {
  SegmentFeatures f;
  f.duration = 4.0;
  f.set_nonvocal(5.0);
  EXPECT_DOUBLE_EQ(*f.nonvocal_share, 1.0);
  f.set_nonvocal(1.0);
  EXPECT_DOUBLE_EQ(*f.nonvocal_share, 0.25);
}

TEST(Summary, SingleSegmentAndEmptyGroup) {
  using testing_support::make_corpus;
  using testing_support::speaker;
  const auto c = make_corpus({speaker("s", Group::control)}, {{"a", "s", 10.0, "a b c d e f g h i j"}});
  const auto s = corpus_summary(c);
  EXPECT_DOUBLE_EQ(*s.groups.at(Group::control).mean_word_speed, 1.0);
  EXPECT_EQ(s.groups.at(Group::aphasia).segments, 0u);
  EXPECT_FALSE(s.groups.at(Group::aphasia).mean_duration.has_value());
}

TEST(Summary, StudyShapedCounts) {
  simulation::SimulationConfig cfg;
  cfg.aphasia.segments = 5335;
  cfg.control.segments = 7805;
  cfg.aphasia.speakers = 50;
  cfg.control.speakers = 60;
  const auto synth = simulation::synthesize_corpus(cfg);
  const auto s = corpus_summary(synth.corpus);
  EXPECT_EQ(s.groups.at(Group::aphasia).segments, 5335u);
  EXPECT_EQ(s.groups.at(Group::control).segments, 7805u);
  EXPECT_EQ(s.total_segments, 13140u);
  EXPECT_NEAR(*s.groups.at(Group::aphasia).mean_duration, 15.5, 1e-9);
  EXPECT_NEAR(*s.groups.at(Group::control).mean_duration, 7.8, 1e-9);
  EXPECT_NEAR(*s.groups.at(Group::aphasia).mean_word_count, 12.0, 1e-9);
  EXPECT_NEAR(*s.groups.at(Group::control).mean_word_count, 16.0, 1e-9);
}

TEST(Wav, EncodeDecodeAndStereoDownmix) {
  audio::Audio a;
  a.sample_rate = 16000;
  a.samples = {0.0f, 0.5f, -0.5f, 0.25f};
  const auto back = audio::decode_wav(audio::encode_wav(a));
  ASSERT_EQ(back.samples.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(back.samples[i], a.samples[i], 1.0 / 32768);

  // Hand-built stereo file: L=16384, R=0 -> mono 8192.
  std::vector<char> bytes;
  auto put = [&](const void* p, std::size_t n) { bytes.insert(bytes.end(), (const char*)p, (const char*)p + n); };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  put("RIFF", 4);
  u32(36 + 4);
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(1);
  u16(2);
  u32(8000);
  u32(8000 * 4);
  u16(4);
  u16(16);
  put("data", 4);
  u32(4);
  std::int16_t l = 16384, r = 0;
  put(&l, 2);
  put(&r, 2);
  const auto mono = audio::decode_wav(bytes);
  ASSERT_EQ(mono.samples.size(), 1u);
  EXPECT_NEAR(mono.samples[0], 0.25f, 1e-6);
}

TEST(Wav, RejectsNonPcm) {
  std::vector<char> junk(44, 0);
  EXPECT_THROW(audio::decode_wav(junk), Error);
}
