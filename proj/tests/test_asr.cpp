#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>

#include "hallaudit/asr.hpp"
#include "hallaudit/error.hpp"
#include "hallaudit/hash.hpp"
#include "support.hpp"

using namespace hallaudit;
using namespace hallaudit::asr;
using testing_support::TempDir;

namespace {

struct MockWorld {
  corpus::Corpus corpus;
  std::vector<corpus::SegmentFeatures> features;
};

MockWorld mock_world(std::size_t n, double share = 0.3) {
  std::vector<testing_support::SegmentSpec> specs;
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "seg%05zu", i);
    specs.push_back({id, "s", 6.0, "the cat sat on the mat and looked outside"});
  }
  MockWorld w{testing_support::make_corpus({testing_support::speaker("s", corpus::Group::aphasia)}, specs), {}};
  w.features = corpus::compute_features(w.corpus);
  for (auto& f : w.features) f.set_nonvocal(share * f.duration);
  return w;
}

MockConfig quiet_config() {
  auto c = MockConfig::with_default_pools();
  c.substitution_rate = 0.0;
  c.base_seed = 99;
  return c;
}

double logit(double p) { return std::log(p / (1 - p)); }

// Scripted HTTP transcription server. Each request pops the next action;
// when the script runs out it answers with `fallback`.
class FakeAsrServer {
 public:
  struct Action {
    int status = 200;
    std::string body = R"({"text":"hello world"})";
    int delay_ms = 0;
  };

  FakeAsrServer() {
    server_.Post("/v1/transcribe", [this](const httplib::Request& req, httplib::Response& res) {
      Action a;
      {
        std::lock_guard lock(mutex_);
        ++requests_;
        last_hint_ = req.get_header_value("X-Language-Hint");
        last_body_ = req.body;
        if (seeded_fault_rate_ > 0.0) {
          // Same body and attempt number -> same fate.
          const auto n = ++attempts_by_body_[req.body];
          std::mt19937_64 rng(hash::derive_seed(fault_seed_, {hash::sha256_hex(req.body), std::to_string(n)}));
          if (std::uniform_real_distribution<double>(0, 1)(rng) < seeded_fault_rate_) a = {503, "overloaded", 0};
          else a = {200, R"({"text":"ok"})", 0};
        } else if (!script_.empty()) {
          a = script_.front();
          script_.erase(script_.begin());
        } else {
          a = fallback_;
        }
      }
      if (a.delay_ms) std::this_thread::sleep_for(std::chrono::milliseconds(a.delay_ms));
      res.status = a.status;
      res.set_content(a.body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeAsrServer() {
    server_.stop();
    thread_.join();
  }

  void script(std::vector<Action> actions) {
    std::lock_guard lock(mutex_);
    script_ = std::move(actions);
  }
  void fallback(Action a) {
    std::lock_guard lock(mutex_);
    fallback_ = std::move(a);
  }
  void seeded_faults(double rate, std::uint64_t seed) {
    std::lock_guard lock(mutex_);
    seeded_fault_rate_ = rate;
    fault_seed_ = seed;
    attempts_by_body_.clear();
  }
  int requests() {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  std::string last_hint() {
    std::lock_guard lock(mutex_);
    return last_hint_;
  }
  std::string last_body() {
    std::lock_guard lock(mutex_);
    return last_body_;
  }

  BackendDescriptor descriptor(int timeout_ms = 2000) const {
    BackendDescriptor d;
    d.backend_id = "fake";
    d.kind = BackendKind::http;
    d.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/transcribe";
    d.language_hint = "en-US";
    d.timeout_ms = timeout_ms;
    d.backoff_ms = 1;
    d.parallelism_limit = 4;
    return d;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::vector<Action> script_;
  Action fallback_;
  int requests_ = 0;
  std::string last_hint_, last_body_;
  double seeded_fault_rate_ = 0.0;
  std::uint64_t fault_seed_ = 0;
  std::map<std::string, int> attempts_by_body_;
};

corpus::AudioSegment wav_segment(const TempDir& dir, const std::string& id, double seconds = 0.2) {
  corpus::AudioSegment s;
  s.segment_id = id;
  s.speaker_id = "s";
  s.resolved_path = dir / (id + ".wav");
  s.audio_path = id + ".wav";
  s.duration = seconds;
  s.sample_rate = 8000;
  testing_support::write_tone(s.resolved_path, seconds);
  return s;
}

class AlwaysTimesOut final : public Backend {
 public:
  AlwaysTimesOut() {
    d_.backend_id = "dead";
    d_.parallelism_limit = 2;
  }
  const BackendDescriptor& descriptor() const override { return d_; }
  TranscriptRun transcribe(const corpus::AudioSegment&, const std::string&) override {
    ++calls;
    throw Error(ErrorKind::network, "timed out");
  }
  std::atomic<int> calls{0};

 private:
  BackendDescriptor d_;
};

}  // namespace

TEST(Mock, DeterministicForSameTag) {
  const auto w = mock_world(30);
  auto cfg = MockConfig::with_default_pools();
  cfg.hallucination_logit_intercept = 0.0;
  for (std::size_t i = 0; i < w.corpus.segments().size(); ++i) {
    const auto a = mock_transcribe(cfg, w.corpus.segments()[i], w.corpus.truths()[i], w.features[i], "A");
    const auto b = mock_transcribe(cfg, w.corpus.segments()[i], w.corpus.truths()[i], w.features[i], "A");
    ASSERT_EQ(a.run, b.run);
    ASSERT_EQ(a.injection, b.injection);
  }
}

TEST(Mock, IdentityConfiguration) {
  const auto w = mock_world(20);
  auto cfg = quiet_config();
  cfg.hallucination_logit_intercept = -1000.0;
  for (std::size_t i = 0; i < w.corpus.segments().size(); ++i) {
    const auto out = mock_transcribe(cfg, w.corpus.segments()[i], w.corpus.truths()[i], w.features[i], "A");
    ASSERT_EQ(out.run.text, w.corpus.truths()[i].text);
    ASSERT_FALSE(out.injection.injected);
  }
}

TEST(Mock, DecisionStableTailsDiffer) {
  const auto w = mock_world(200);
  auto cfg = quiet_config();
  cfg.hallucination_logit_intercept = logit(0.3);
  int injected = 0, differing = 0;
  for (std::size_t i = 0; i < w.corpus.segments().size(); ++i) {
    const auto& truth = w.corpus.truths()[i];
    const auto a = mock_transcribe(cfg, w.corpus.segments()[i], truth, w.features[i], "2023-04");
    const auto b = mock_transcribe(cfg, w.corpus.segments()[i], truth, w.features[i], "2023-05");
    ASSERT_EQ(a.injection.injected, b.injection.injected);
    const auto truth_tokens = alignment::surfaces(truth.tokens);
    for (const auto* out : {&a, &b}) {
      const auto t = alignment::surfaces(out->run.tokens);
      ASSERT_GE(t.size(), truth_tokens.size());
      ASSERT_TRUE(std::equal(truth_tokens.begin(), truth_tokens.end(), t.begin())) << out->run.text;
      if (out->injection.injected) {
        ASSERT_TRUE(out->injection.injected_span.has_value());
        ASSERT_GE(out->injection.injected_span->length, cfg.min_injected_span);
        ASSERT_EQ(out->injection.injected_span->start, truth_tokens.size());
      }
    }
    if (a.injection.injected) {
      ++injected;
      differing += a.run.text != b.run.text;
    }
  }
  EXPECT_GT(injected, 30);
  // Tails come from finite pools, so an identical draw is possible but rare.
  EXPECT_GE(differing, injected * 9 / 10);
}

TEST(Mock, InjectionCountBinomial) {
  const auto w = mock_world(2000);
  auto cfg = quiet_config();
  cfg.hallucination_logit_intercept = logit(0.05);
  cfg.hallucination_logit_slope = 0.0;
  EXPECT_NEAR(injection_probability(cfg, 0.7), 0.05, 1e-9);
  int injected = 0;
  for (std::size_t i = 0; i < w.corpus.segments().size(); ++i)
    injected += mock_transcribe(cfg, w.corpus.segments()[i], w.corpus.truths()[i], w.features[i], "A").injection.injected;
  const double sigma = std::sqrt(2000 * 0.05 * 0.95);
  EXPECT_LE(std::abs(injected - 100), 3 * sigma) << injected;
}

TEST(Mock, ProbabilityMonotone) {
  MockConfig cfg;
  cfg.hallucination_logit_intercept = -4.6;
  cfg.hallucination_logit_slope = 1.3;
  EXPECT_GT(injection_probability(cfg, 0.41), injection_probability(cfg, 0.15));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1), slope(-5, 5);
  for (int i = 0; i < 1000; ++i) {
    MockConfig lo = cfg, hi = cfg;
    lo.hallucination_logit_slope = slope(rng);
    hi.hallucination_logit_slope = lo.hallucination_logit_slope + std::abs(slope(rng));
    const double s = u(rng);
    ASSERT_LE(injection_probability(lo, s), injection_probability(hi, s));
  }
}

TEST(Mock, RepetitionAndScriptCorruption) {
  const auto w = mock_world(300);
  auto cfg = quiet_config();
  cfg.hallucination_logit_intercept = 50.0;
  cfg.repetition_loop_rate = 0.3;
  cfg.nontarget_script_rate = 0.3;
  std::map<HarmCategory, int> seen;
  for (std::size_t i = 0; i < w.corpus.segments().size(); ++i) {
    const auto out = mock_transcribe(cfg, w.corpus.segments()[i], w.corpus.truths()[i], w.features[i], "A");
    ASSERT_TRUE(out.injection.injected);
    ASSERT_TRUE(out.injection.category.has_value());
    ++seen[*out.injection.category];
  }
  EXPECT_GT(seen[HarmCategory::repetition_loop], 50);
  EXPECT_GT(seen[HarmCategory::nontarget_language], 50);
}

TEST(Mock, ConfigValidation) {
  auto cfg = MockConfig::with_default_pools();
  cfg.substitution_rate = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = MockConfig{};
  cfg.category_weights[HarmCategory::violence] = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(mock_config_from_json(nlohmann::json{{"phrase_pools", {{"violence", nlohmann::json::array()}}},
                                                    {"category_weights", {{"violence", 1.0}}}}),
               Error);
}

TEST(Http, PassthroughSendsAudioAndHint) {
  TempDir dir;
  FakeAsrServer server;
  const auto seg = wav_segment(dir, "a");
  HttpBackend backend(server.descriptor());
  const auto run = backend.transcribe(seg, "2023-04");
  EXPECT_EQ(run.text, "hello world");
  EXPECT_EQ(run.run_tag, "2023-04");
  EXPECT_EQ(run.tokens.size(), 2u);
  EXPECT_EQ(server.last_hint(), "en-US");
  const auto bytes = audio::read_file_bytes(seg.resolved_path);
  EXPECT_EQ(server.last_body(), std::string(bytes.begin(), bytes.end()));
}

TEST(Http, RetriesTransientThenSucceeds) {
  TempDir dir;
  FakeAsrServer server;
  server.script({{503, "busy"}, {429, "slow down"}, {500, "oops"}});
  HttpBackend backend(server.descriptor());
  EXPECT_EQ(backend.transcribe(wav_segment(dir, "a"), "t").text, "hello world");
  EXPECT_EQ(server.requests(), 4);
}

TEST(Http, GivesUpAfterThreeRetries) {
  TempDir dir;
  FakeAsrServer server;
  server.fallback({503, "still busy"});
  HttpBackend backend(server.descriptor());
  try {
    backend.transcribe(wav_segment(dir, "a"), "t");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::network);
    EXPECT_NE(std::string(e.what()).find("still busy"), std::string::npos);
  }
  EXPECT_EQ(server.requests(), 4);
}

TEST(Http, ClientErrorSurfacedVerbatimWithoutRetry) {
  TempDir dir;
  FakeAsrServer server;
  server.fallback({400, R"({"error":"unsupported codec"})"});
  HttpBackend backend(server.descriptor());
  try {
    backend.transcribe(wav_segment(dir, "a"), "t");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(R"({"error":"unsupported codec"})"), std::string::npos);
  }
  EXPECT_EQ(server.requests(), 1);
}

TEST(Http, EmptyTextIsValid) {
  TempDir dir;
  FakeAsrServer server;
  server.fallback({200, R"({"text":""})"});
  HttpBackend backend(server.descriptor());
  const auto run = backend.transcribe(wav_segment(dir, "a"), "t");
  EXPECT_EQ(run.text, "");
  EXPECT_TRUE(run.tokens.empty());
}

TEST(Http, MalformedResponse) {
  TempDir dir;
  FakeAsrServer server;
  server.fallback({200, "<html>"});
  HttpBackend backend(server.descriptor());
  EXPECT_THROW(backend.transcribe(wav_segment(dir, "a"), "t"), Error);
  server.fallback({200, R"({"transcript":"x"})"});
  EXPECT_THROW(backend.transcribe(wav_segment(dir, "a"), "t"), Error);
}

TEST(Http, TimeoutCountsAsTransient) {
  TempDir dir;
  FakeAsrServer server;
  server.script({{200, R"({"text":"late"})", 600}});
  HttpBackend backend(server.descriptor(200));
  // First attempt times out, the retry gets the fallback answer.
  EXPECT_EQ(backend.transcribe(wav_segment(dir, "a"), "t").text, "hello world");
}

TEST(Http, SeededFaultsAreReproducible) {
  TempDir dir;
  std::vector<corpus::AudioSegment> segs;
  for (int i = 0; i < 24; ++i) segs.push_back(wav_segment(dir, "s" + std::to_string(i), 0.05 + 0.01 * i));
  const std::vector<std::string> tags{"t"};
  const auto work = cross_product(segs, tags);

  auto outcome = [&](std::uint64_t seed) {
    FakeAsrServer server;
    server.seeded_faults(0.6, seed);
    HttpBackend backend(server.descriptor());
    const auto r = batch_transcribe(backend, work, 3);
    std::vector<std::string> failed;
    for (const auto& f : r.failures) failed.push_back(f.segment_id);
    return std::make_pair(failed, server.requests());
  };
  const auto first = outcome(5);
  const auto second = outcome(5);
  EXPECT_EQ(first, second);
  // 0.6^4 per segment: a handful fail, most recover through retries.
  EXPECT_LT(first.first.size(), 12u);
}

TEST(Batch, CardinalityAndOrder) {
  const auto w = mock_world(4);
  BackendDescriptor d;
  d.backend_id = "mock";
  MockBackend backend(d, quiet_config(), w.corpus, w.features);
  const std::vector<std::string> tags{"B", "A"};
  const auto work = cross_product(w.corpus.segments(), tags);
  const auto r = batch_transcribe(backend, work, 1);
  ASSERT_EQ(r.runs.size(), 8u);
  EXPECT_TRUE(std::is_sorted(r.runs.begin(), r.runs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.segment_id, a.run_tag) < std::tie(b.segment_id, b.run_tag);
  }));
  EXPECT_EQ(backend.injections().size(), 8u);
}

TEST(Batch, ParallelismDoesNotChangeOutput) {
  const auto w = mock_world(60);
  auto cfg = MockConfig::with_default_pools();
  cfg.hallucination_logit_intercept = logit(0.2);
  const std::vector<std::string> tags{"A", "B"};
  const auto work = cross_product(w.corpus.segments(), tags);
  BackendDescriptor d;
  d.backend_id = "mock";
  d.parallelism_limit = 8;
  MockBackend one(d, cfg, w.corpus, w.features), eight(d, cfg, w.corpus, w.features);
  const auto a = batch_transcribe(one, work, 1);
  const auto b = batch_transcribe(eight, work, 8);
  EXPECT_EQ(a.runs, b.runs);
  EXPECT_EQ(one.injections(), eight.injections());
}

TEST(Batch, AlwaysTimesOutAborts) {
  const auto w = mock_world(10);
  AlwaysTimesOut backend;
  const std::vector<std::string> tags{"A", "B"};
  const auto work = cross_product(w.corpus.segments(), tags);
  const auto r = batch_transcribe(backend, work, 2);
  EXPECT_TRUE(r.runs.empty());
  EXPECT_TRUE(r.aborted);
  EXPECT_EQ(r.planned, 20u);
  EXPECT_LT(r.attempted, 20u);
  EXPECT_EQ(r.failures.size(), r.attempted);
}

TEST(RunStore, RoundTripAndDuplicates) {
  TempDir dir;
  TranscriptRun r;
  r.segment_id = "a";
  r.backend_id = "mock";
  r.run_tag = "t";
  r.text = "Hello there";
  r.tokens = alignment::normalize(r.text);
  r.created_at = "2023-05-03T00:00:00Z";
  const std::vector<TranscriptRun> runs{r};
  write_runs(dir / "runs.jsonl", runs);
  EXPECT_EQ(read_runs(dir / "runs.jsonl"), runs);
  const std::vector<TranscriptRun> dup{r, r};
  write_runs(dir / "dup.jsonl", dup);
  EXPECT_THROW(read_runs(dir / "dup.jsonl"), Error);
}
