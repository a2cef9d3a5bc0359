#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hallaudit/alignment.hpp"
#include "hallaudit/corpus.hpp"
#include "hallaudit/wav.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("hallaudit-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<std::string> toks(std::string_view text) {
  return hallaudit::alignment::surfaces(hallaudit::alignment::normalize(text));
}

struct SegmentSpec {
  std::string id;
  std::string speaker;
  double duration = 1.0;
  std::string text;
};

inline hallaudit::corpus::Speaker speaker(std::string id, hallaudit::corpus::Group group) {
  hallaudit::corpus::Speaker s;
  s.speaker_id = std::move(id);
  s.group = group;
  return s;
}

// In-memory corpus; audio paths point nowhere.
inline hallaudit::corpus::Corpus make_corpus(std::vector<hallaudit::corpus::Speaker> speakers,
                                             const std::vector<SegmentSpec>& specs) {
  std::vector<hallaudit::corpus::AudioSegment> segments;
  std::vector<hallaudit::corpus::GroundTruth> truths;
  for (const auto& s : specs) {
    hallaudit::corpus::AudioSegment seg;
    seg.segment_id = s.id;
    seg.speaker_id = s.speaker;
    seg.audio_path = "audio/" + s.id + ".wav";
    seg.duration = s.duration;
    seg.sample_rate = 16000;
    segments.push_back(seg);
    truths.push_back({s.id, s.text, hallaudit::alignment::normalize(s.text)});
  }
  return hallaudit::corpus::Corpus::build(std::move(speakers), std::move(segments), std::move(truths));
}

inline void write_tone(const fs::path& path, double seconds, int rate = 8000) {
  hallaudit::audio::Audio a;
  a.sample_rate = rate;
  a.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    a.samples[i] = static_cast<float>(0.3 * std::sin(2.0 * 3.14159265358979 * 440.0 * static_cast<double>(i) / rate));
  fs::create_directories(path.parent_path());
  hallaudit::audio::write_wav(path, a);
}

}  // namespace testing_support
