#include "hallaudit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <random>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hallaudit/error.hpp"
#include "hallaudit/hash.hpp"
#include "hallaudit/jsonl.hpp"
#include "hallaudit/wav.hpp"

namespace hallaudit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStateVersion = "hallaudit-state-1";

bool filename_safe(const std::string& s) {
  static const std::regex re("^[A-Za-z0-9][A-Za-z0-9._-]*$");
  return std::regex_match(s, re);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void add_file_if_exists(hash::Digest& d, const fs::path& path) {
  if (fs::exists(path)) {
    d.add(path.filename().string()).add_file(path);
  } else {
    d.add("<missing>");
  }
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  const auto threads = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<detection::PairEvaluation> read_pairs(const fs::path& path) {
  std::vector<detection::PairEvaluation> pairs;
  if (!fs::exists(path)) return pairs;
  const auto j = json::parse(jsonl::read_text(path));
  for (const auto& p : j) {
    detection::PairEvaluation e;
    const auto backend = p.at("backend_id").get<std::string>();
    e.run_pair = {backend + "/" + p.at("run_pair").at(0).get<std::string>(),
                  backend + "/" + p.at("run_pair").at(1).get<std::string>()};
    e.evaluated = p.at("evaluated").get<std::vector<std::string>>();
    const auto flagged = p.at("flagged").get<std::vector<std::string>>();
    e.flagged = {flagged.begin(), flagged.end()};
    pairs.push_back(std::move(e));
  }
  return pairs;
}

std::string latest(const std::string& a, const std::string& b) { return std::max(a, b); }

}  // namespace

void PipelineConfig::validate() const {
  if (manifest.empty()) throw Error(ErrorKind::validation, "config needs a corpus manifest path");
  if (run_tags.size() < 2)
    throw Error(ErrorKind::validation, "detection needs at least two run_tags (got " + std::to_string(run_tags.size()) + ")");
  std::set<std::string> tags;
  for (const auto& t : run_tags) {
    if (!filename_safe(t.tag)) throw Error(ErrorKind::validation, "run tag '" + t.tag + "' must match [A-Za-z0-9._-]+");
    if (!tags.insert(t.tag).second) throw Error(ErrorKind::validation, "duplicate run tag '" + t.tag + "'");
    if (t.sample_size && *t.sample_size == 0) throw Error(ErrorKind::validation, "sample_size must be positive");
  }
  std::set<std::string> ids;
  for (const auto& b : backends) {
    b.validate();
    if (!filename_safe(b.backend_id))
      throw Error(ErrorKind::validation, "backend_id '" + b.backend_id + "' must match [A-Za-z0-9._-]+");
    if (!ids.insert(b.backend_id).second) throw Error(ErrorKind::validation, "duplicate backend_id '" + b.backend_id + "'");
  }
  detection.validate();
  vad.validate();
  for (const auto& p : robustness_profiles) (void)vad::profile_by_name(p);
  if (parallelism < 1) throw Error(ErrorKind::validation, "parallelism must be >= 1");
  if (service.port < 0 || service.port > 65535) throw Error(ErrorKind::validation, "service port out of range");
}

const asr::BackendDescriptor& PipelineConfig::backend(std::string_view backend_id) const {
  for (const auto& b : backends)
    if (b.backend_id == backend_id) return b;
  throw Error(ErrorKind::not_found, "unknown backend '" + std::string(backend_id) + "'");
}

PipelineConfig config_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw Error(ErrorKind::parse, "pipeline config must be a JSON object");
  try {
    PipelineConfig c;
    c.manifest = resolve(base, j.value("manifest", std::string{}));
    // Without an explicit output the default stays relative to the working directory.
    if (j.contains("output")) c.output = resolve(base, j["output"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    for (auto b : j.value("backends", json::array())) {
      if (b.contains("mock_config")) b["mock_config"] = resolve(base, b["mock_config"].get<std::string>()).string();
      c.backends.push_back(asr::descriptor_from_json(b));
    }
    for (const auto& t : j.value("run_tags", json::array())) {
      if (t.is_string()) {
        c.run_tags.push_back({t.get<std::string>(), std::nullopt});
      } else {
        RunTagSpec spec{t.at("tag").get<std::string>(), std::nullopt};
        if (t.contains("sample_size")) spec.sample_size = t["sample_size"].get<std::size_t>();
        c.run_tags.push_back(std::move(spec));
      }
    }
    if (j.contains("detection")) c.detection = detection::detection_config_from_json(j["detection"]);
    if (j.contains("vad")) {
      const auto& v = j["vad"];
      c.vad = vad::profile_by_name(v.value("profile", std::string("default")));
      auto merged = vad::to_json(c.vad);
      for (const auto& [k, val] : v.items())
        if (k != "profile") merged[k] = val;
      c.vad = vad::config_from_json(merged);
    }
    if (j.contains("robustness_profiles")) c.robustness_profiles = j["robustness_profiles"].get<std::vector<std::string>>();
    for (const auto& r : j.value("regressions", json::array())) c.regressions.push_back(stats::regression_spec_from_json(r));
    for (const auto& m : j.value("matching", json::array())) c.matching.push_back(stats::match_spec_from_json(m));
    for (const auto& r : j.value("reviewers", json::array())) c.reviewers.insert(r.get<std::string>());
    const auto adjudication = j.value("adjudication", std::string("manual"));
    if (adjudication == "oracle") c.adjudication = Adjudication::oracle;
    else if (adjudication != "manual") throw Error(ErrorKind::validation, "adjudication must be 'manual' or 'oracle'");
    c.parallelism = j.value("parallelism", c.parallelism);
    if (j.contains("service")) {
      c.service.host = j["service"].value("host", c.service.host);
      c.service.port = j["service"].value("port", c.service.port);
    }
    if (j.contains("simulation")) c.simulation = simulation::simulation_config_from_json(j["simulation"]);
    if (j.contains("mock_config")) c.mock_config = resolve(base, j["mock_config"].get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("pipeline config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::io, "config not found: " + path.string());
  json j;
  try {
    j = json::parse(jsonl::read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

json to_json(const PipelineConfig& c) {
  json backends = json::array();
  for (const auto& b : c.backends) backends.push_back(asr::to_json(b));
  json tags = json::array();
  for (const auto& t : c.run_tags) {
    if (t.sample_size) tags.push_back(json{{"tag", t.tag}, {"sample_size", *t.sample_size}});
    else tags.push_back(t.tag);
  }
  json regs = json::array();
  for (const auto& r : c.regressions) regs.push_back(stats::to_json(r));
  json matches = json::array();
  for (const auto& m : c.matching) matches.push_back(stats::to_json(m));
  json j{{"manifest", c.manifest.string()},
         {"output", c.output.string()},
         {"seed", c.seed},
         {"backends", std::move(backends)},
         {"run_tags", std::move(tags)},
         {"detection", detection::to_json(c.detection)},
         {"vad", vad::to_json(c.vad)},
         {"robustness_profiles", c.robustness_profiles},
         {"regressions", std::move(regs)},
         {"matching", std::move(matches)},
         {"reviewers", c.reviewers},
         {"adjudication", c.adjudication == Adjudication::oracle ? "oracle" : "manual"},
         {"parallelism", c.parallelism},
         {"service", json{{"host", c.service.host}, {"port", c.service.port}}}};
  if (c.simulation) j["simulation"] = simulation::to_json(*c.simulation);
  if (!c.mock_config.empty()) j["mock_config"] = c.mock_config.string();
  return j;
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::vad: return "vad";
    case Stage::transcribe: return "transcribe";
    case Stage::detect: return "detect";
    case Stage::adjudicate: return "adjudicate";
    case Stage::analyze: return "analyze";
    case Stage::report: return "report";
  }
  return "ingest";
}

Stage parse_stage(std::string_view name) {
  for (auto s : kStageOrder)
    if (name == to_string(s)) return s;
  throw Error(ErrorKind::invalid_argument, "unknown stage '" + std::string(name) + "'");
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

fs::path Pipeline::candidates_path() const { return config_.output / "candidates" / "candidates.jsonl"; }
fs::path Pipeline::labels_path() const { return config_.output / "labels" / "labels.jsonl"; }
fs::path Pipeline::report_dir() const { return config_.output / "report"; }

fs::path Pipeline::runs_path(const std::string& backend_id, const std::string& tag) const {
  return config_.output / "runs" / backend_id / (tag + ".jsonl");
}

fs::path Pipeline::injections_path(const std::string& backend_id, const std::string& tag) const {
  return config_.output / "runs" / backend_id / (tag + ".injections.jsonl");
}

std::vector<std::string> Pipeline::profile_names() const {
  std::vector<std::string> names{config_.vad.profile_name};
  for (const auto& p : config_.robustness_profiles)
    if (std::find(names.begin(), names.end(), p) == names.end()) names.push_back(p);
  return names;
}

corpus::Corpus Pipeline::load_corpus() const { return corpus::load_manifest(config_.manifest); }

std::string Pipeline::recorded_digest(const std::string& key) const {
  const auto path = config_.output / "state" / (key + ".json");
  if (!fs::exists(path)) return {};
  try {
    return json::parse(jsonl::read_text(path)).value("digest", std::string{});
  } catch (const json::exception&) {
    return {};
  }
}

bool Pipeline::up_to_date(const std::string& key, const std::string& digest, const std::vector<fs::path>& outputs) const {
  if (recorded_digest(key) != digest) return false;
  return std::all_of(outputs.begin(), outputs.end(), [](const fs::path& p) { return fs::exists(p); });
}

void Pipeline::record(const std::string& key, const std::string& digest) const {
  fs::create_directories(config_.output / "state");
  jsonl::write_text(config_.output / "state" / (key + ".json"), json{{"stage", key}, {"digest", digest}}.dump(2) + "\n");
}

std::vector<std::string> Pipeline::sampled_segments(const corpus::Corpus& corpus, const RunTagSpec& spec) const {
  std::vector<std::string> ids;
  for (const auto& s : corpus.segments()) ids.push_back(s.segment_id);
  std::sort(ids.begin(), ids.end());
  if (!spec.sample_size || *spec.sample_size >= ids.size()) return ids;
  std::mt19937_64 rng(hash::derive_seed(config_.seed, {"subset", spec.tag}));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(*spec.sample_size);
  std::sort(ids.begin(), ids.end());
  return ids;
}

StageOutcome Pipeline::stage_ingest() {
  const std::string key = "ingest";
  const auto corpus = load_corpus();
  hash::Digest d;
  d.add(kStateVersion).add(key).add_file(config_.manifest);
  for (const auto& seg : corpus.segments()) d.add(seg.segment_id).add_file(seg.resolved_path);
  const auto digest = d.hex();
  const auto dir = config_.output / "corpus";
  const std::vector<fs::path> outputs{dir / "summary.json", dir / "features.jsonl"};
  if (up_to_date(key, digest, outputs)) return {key, true};

  fs::create_directories(dir);
  jsonl::write_text(dir / "summary.json", corpus::to_json(corpus::corpus_summary(corpus)).dump(2) + "\n");
  std::vector<json> features;
  for (const auto& f : corpus::compute_features(corpus)) features.push_back(corpus::to_json(f));
  jsonl::write_all(dir / "features.jsonl", features);
  record(key, digest);
  spdlog::info("ingest: {} speakers, {} segments", corpus.speakers().size(), corpus.segments().size());
  return {key, false};
}

StageOutcome Pipeline::stage_vad() {
  const std::string key = "vad";
  const auto corpus = load_corpus();
  const auto names = profile_names();
  std::vector<vad::VadConfig> configs{config_.vad};
  for (std::size_t i = 1; i < names.size(); ++i) configs.push_back(vad::profile_by_name(names[i]));

  hash::Digest d;
  d.add(kStateVersion).add(key);
  add_file_if_exists(d, config_.output / "corpus" / "features.jsonl");
  d.add(recorded_digest("ingest"));
  for (const auto& c : configs) d.add(vad::to_json(c).dump());
  const auto digest = d.hex();
  const auto dir = config_.output / "vad";
  std::vector<fs::path> outputs{dir / "features.jsonl"};
  for (const auto& n : names) outputs.push_back(dir / (n + ".jsonl"));
  if (recorded_digest("ingest").empty()) throw Error(ErrorKind::stage, "run 'ingest' first");
  if (up_to_date(key, digest, outputs)) return {key, true};

  const auto& segments = corpus.segments();
  std::vector<std::vector<vad::VadProfile>> profiles(configs.size(), std::vector<vad::VadProfile>(segments.size()));
  parallel_for(segments.size(), config_.parallelism, [&](std::size_t i) {
    const auto audio = audio::read_wav(segments[i].resolved_path);
    for (std::size_t p = 0; p < configs.size(); ++p)
      profiles[p][i] = vad::vad_profile(audio.samples, audio.sample_rate, configs[p], segments[i].segment_id);
  });

  fs::create_directories(dir);
  for (std::size_t p = 0; p < configs.size(); ++p) {
    std::vector<json> rows;
    for (const auto& prof : profiles[p]) rows.push_back(vad::to_json(prof));
    jsonl::write_all(dir / (names[p] + ".jsonl"), rows);
  }
  auto features = corpus::compute_features(corpus);
  std::vector<json> rows;
  for (std::size_t i = 0; i < features.size(); ++i) {
    features[i].set_nonvocal(profiles[0][i].nonvocal_duration);
    rows.push_back(corpus::to_json(features[i]));
  }
  jsonl::write_all(dir / "features.jsonl", rows);
  record(key, digest);
  return {key, false};
}

StageOutcome Pipeline::transcribe_run(const std::string& backend_id, const std::string& run_tag) {
  const auto& descriptor = config_.backend(backend_id);
  const auto spec_it = std::find_if(config_.run_tags.begin(), config_.run_tags.end(),
                                    [&](const RunTagSpec& s) { return s.tag == run_tag; });
  if (spec_it == config_.run_tags.end()) throw Error(ErrorKind::not_found, "run tag '" + run_tag + "' not in config");
  const std::string key = "transcribe." + backend_id + "." + run_tag;

  const auto corpus = load_corpus();
  const bool mock = descriptor.kind == asr::BackendKind::mock;
  const auto features_path = config_.output / "vad" / "features.jsonl";
  hash::Digest d;
  d.add(kStateVersion).add(key).add(recorded_digest("ingest")).add(asr::to_json(descriptor).dump()).add(run_tag);
  d.add(spec_it->sample_size ? std::to_string(*spec_it->sample_size) : "all").add(std::to_string(config_.seed));
  if (mock) {
    d.add_file(descriptor.mock_config);
    add_file_if_exists(d, features_path);
  }
  const auto digest = d.hex();
  const auto out = runs_path(backend_id, run_tag);
  std::vector<fs::path> outputs{out};
  if (mock) outputs.push_back(injections_path(backend_id, run_tag));
  if (up_to_date(key, digest, outputs)) return {key, true};

  std::unique_ptr<asr::Backend> backend;
  asr::MockBackend* mock_backend = nullptr;
  if (mock) {
    if (!fs::exists(features_path)) throw Error(ErrorKind::stage, "mock transcription needs VAD features; run 'vad' first");
    std::vector<corpus::SegmentFeatures> features;
    jsonl::for_each(features_path, [&](const json& j, std::size_t) { features.push_back(corpus::features_from_json(j)); });
    auto m = std::make_unique<asr::MockBackend>(descriptor, asr::load_mock_config(descriptor.mock_config), corpus,
                                                std::move(features));
    mock_backend = m.get();
    backend = std::move(m);
  } else {
    backend = std::make_unique<asr::HttpBackend>(descriptor);
  }

  const auto ids = sampled_segments(corpus, *spec_it);
  std::vector<corpus::AudioSegment> segments;
  for (const auto& id : ids) segments.push_back(*corpus.find_segment(id));
  const std::vector<std::string> tags{run_tag};
  const auto work = asr::cross_product(segments, tags);
  const int parallelism = std::min(config_.parallelism, descriptor.parallelism_limit);
  const auto result = asr::batch_transcribe(*backend, work, parallelism);

  fs::create_directories(out.parent_path());
  asr::write_runs(out, result.runs);
  std::vector<json> failures;
  for (const auto& f : result.failures)
    failures.push_back(json{{"segment_id", f.segment_id}, {"run_tag", f.run_tag}, {"error", f.message}});
  jsonl::write_all(out.parent_path() / (run_tag + ".failures.jsonl"), failures);
  if (mock_backend) {
    std::vector<json> records;
    for (const auto& r : mock_backend->injections()) records.push_back(asr::to_json(r));
    jsonl::write_all(injections_path(backend_id, run_tag), records);
  }
  if (result.aborted)
    throw Error(ErrorKind::stage, fmt::format("transcription aborted for {}/{}: {} of {} attempted calls failed",
                                              backend_id, run_tag, result.failures.size(), result.attempted));
  if (!result.failures.empty())
    spdlog::warn("{}/{}: {} segments failed, see failures file", backend_id, run_tag, result.failures.size());
  record(key, digest);
  return {key, false};
}

std::vector<StageOutcome> Pipeline::stage_transcribe_all() {
  std::vector<StageOutcome> outcomes;
  for (const auto& b : config_.backends)
    for (const auto& t : config_.run_tags) outcomes.push_back(transcribe_run(b.backend_id, t.tag));
  return outcomes;
}

StageOutcome Pipeline::stage_detect() {
  const std::string key = "detect";
  const auto corpus = load_corpus();
  hash::Digest d;
  d.add(kStateVersion).add(key).add(recorded_digest("ingest")).add(detection::to_json(config_.detection).dump());
  for (const auto& b : config_.backends)
    for (const auto& t : config_.run_tags) {
      const auto path = runs_path(b.backend_id, t.tag);
      if (!fs::exists(path))
        throw Error(ErrorKind::stage, fmt::format("missing runs for {}/{}; run 'transcribe' first", b.backend_id, t.tag));
      d.add(b.backend_id).add(t.tag).add_file(path);
    }
  const auto digest = d.hex();
  const auto dir = config_.output / "candidates";
  if (up_to_date(key, digest, {candidates_path(), dir / "pairs.json"})) return {key, true};

  std::vector<detection::HallucinationCandidate> candidates;
  json pairs = json::array();
  for (const auto& b : config_.backends) {
    std::vector<std::map<std::string, asr::TranscriptRun>> by_tag;
    for (const auto& t : config_.run_tags) {
      std::map<std::string, asr::TranscriptRun> runs;
      for (auto& r : asr::read_runs(runs_path(b.backend_id, t.tag))) {
        auto id = r.segment_id;
        runs.emplace(std::move(id), std::move(r));
      }
      by_tag.push_back(std::move(runs));
    }
    for (std::size_t i = 0; i + 1 < by_tag.size(); ++i) {
      std::vector<std::string> evaluated, flagged;
      for (const auto& [seg, a] : by_tag[i]) {
        const auto it = by_tag[i + 1].find(seg);
        const auto* truth = corpus.find_truth(seg);
        if (it == by_tag[i + 1].end() || !truth) continue;
        evaluated.push_back(seg);
        if (auto c = detection::detect_candidate(*truth, a, it->second, config_.detection,
                                                 latest(a.created_at, it->second.created_at))) {
          flagged.push_back(seg);
          candidates.push_back(std::move(*c));
        }
      }
      pairs.push_back(json{{"backend_id", b.backend_id},
                           {"run_pair", json::array({config_.run_tags[i].tag, config_.run_tags[i + 1].tag})},
                           {"evaluated", evaluated},
                           {"flagged", flagged}});
    }
  }
  // Statuses follow whatever labels already exist.
  const auto statuses = harms::replay_statuses(harms::read_labels(labels_path()), candidates);
  for (auto& c : candidates) c.status = statuses.at(c.candidate_id);

  fs::create_directories(dir);
  detection::CandidateStore::write_fresh(candidates_path(), candidates);
  jsonl::write_text(dir / "pairs.json", pairs.dump(2) + "\n");
  record(key, digest);
  spdlog::info("detect: {} candidates", candidates.size());
  return {key, false};
}

StageOutcome Pipeline::stage_adjudicate() {
  const std::string key = "adjudicate";
  if (config_.adjudication == Adjudication::manual) return {key, true};

  hash::Digest d;
  d.add(kStateVersion).add(key).add(recorded_digest("detect"));
  for (const auto& b : config_.backends) {
    if (b.kind != asr::BackendKind::mock)
      throw Error(ErrorKind::stage, "oracle adjudication needs mock backends; '" + b.backend_id + "' is http");
    for (const auto& t : config_.run_tags) add_file_if_exists(d, injections_path(b.backend_id, t.tag));
  }
  const auto digest = d.hex();
  if (up_to_date(key, digest, {labels_path(), candidates_path()})) return {key, true};
  if (recorded_digest("detect").empty()) throw Error(ErrorKind::stage, "run 'detect' first");

  std::map<std::tuple<std::string, std::string, std::string>, asr::InjectionRecord> injections;
  std::map<std::string, std::string> labeled_at;
  for (const auto& b : config_.backends) {
    labeled_at[b.backend_id] = asr::load_mock_config(b.mock_config).simulated_time;
    for (const auto& t : config_.run_tags)
      jsonl::for_each(injections_path(b.backend_id, t.tag), [&](const json& j, std::size_t) {
        auto r = asr::injection_from_json(j);
        injections.emplace(std::make_tuple(b.backend_id, r.segment_id, r.run_tag), r);
      });
  }

  auto candidates = detection::CandidateStore(candidates_path()).list();
  std::vector<json> labels;
  for (auto& c : candidates) {
    harms::HarmLabel label;
    label.candidate_id = c.candidate_id;
    label.reviewer_id = kOracleReviewer;
    label.labeled_at = labeled_at.at(c.backend_id);
    for (const auto& tag : {c.run_pair.first, c.run_pair.second}) {
      const auto it = injections.find({c.backend_id, c.segment_id, tag});
      if (it == injections.end() || !it->second.injected) continue;
      label.confirmed = true;
      if (it->second.category) label.categories.insert(*it->second.category);
    }
    label.note = label.confirmed ? "injected by mock" : "no injection in either run";
    c.status = harms::status_of(label);
    labels.push_back(harms::to_json(label));
  }
  fs::create_directories(labels_path().parent_path());
  jsonl::write_all(labels_path(), labels);
  detection::CandidateStore::write_fresh(candidates_path(), candidates);
  record(key, digest);
  return {key, false};
}

AnalysisInputs Pipeline::load_analysis_inputs() const {
  AnalysisInputs in;
  in.corpus = load_corpus();
  const auto features_path = config_.output / "vad" / "features.jsonl";
  if (fs::exists(features_path)) {
    jsonl::for_each(features_path, [&](const json& j, std::size_t) { in.features.push_back(corpus::features_from_json(j)); });
  } else {
    in.features = corpus::compute_features(in.corpus);
  }
  for (const auto& name : profile_names()) {
    const auto path = config_.output / "vad" / (name + ".jsonl");
    if (!fs::exists(path)) continue;
    auto& shares = in.shares_by_profile[name];
    jsonl::for_each(path, [&](const json& j, std::size_t) {
      shares[j.at("segment_id").get<std::string>()] = j.at("nonvocal_share").get<double>();
    });
  }
  if (fs::exists(candidates_path())) in.candidates = detection::CandidateStore(candidates_path()).list();
  in.labels = harms::read_labels(labels_path());
  in.pairs = read_pairs(config_.output / "candidates" / "pairs.json");
  return in;
}

report::ReportData build_report(const PipelineConfig& config, const AnalysisInputs& in) {
  report::ReportData data;
  data.corpus = corpus::corpus_summary(in.corpus);

  auto candidates = in.candidates;
  const auto statuses = harms::replay_statuses(in.labels, candidates);
  std::set<std::string> positives;
  for (auto& c : candidates) {
    c.status = statuses.at(c.candidate_id);
    if (c.status == detection::CandidateStatus::confirmed) positives.insert(c.segment_id);
  }
  data.candidates = report::count_candidates(candidates);
  data.harms = harms::aggregate(in.labels, candidates);

  try {
    data.rates = stats::group_rate_comparison(in.corpus, positives);
  } catch (const Error& e) {
    data.notes.push_back(std::string("rates: ") + e.what());
  }

  std::vector<std::string> profiles{config.vad.profile_name};
  for (const auto& p : config.robustness_profiles)
    if (std::find(profiles.begin(), profiles.end(), p) == profiles.end()) profiles.push_back(p);
  for (const auto& p : profiles) {
    const auto it = in.shares_by_profile.find(p);
    if (it != in.shares_by_profile.end()) data.vad.push_back(report::vad_group_means(in.corpus, it->second, positives, p));
  }

  for (const auto& spec : config.regressions) {
    try {
      const auto design = stats::design_matrix(in.corpus, in.features, positives, spec);
      const double events = design.y.sum();
      if (events == 0.0 || events == static_cast<double>(design.y.size())) {
        data.notes.push_back(fmt::format("regression '{}': outcome is constant over {} rows", spec.name, design.y.size()));
        continue;
      }
      auto normalized = spec;
      normalized.normalize();
      data.regressions.push_back(stats::fit_logistic(design, normalized));
      if (design.dropped > 0)
        data.notes.push_back(fmt::format("regression '{}': {} rows dropped for missing covariates", spec.name, design.dropped));
    } catch (const Error& e) {
      data.notes.push_back(fmt::format("regression '{}': {}", spec.name, e.what()));
    }
  }

  for (const auto& spec : config.matching) {
    try {
      const auto input = stats::match_input(in.corpus, in.features, spec.covariates);
      if (input.treated_ids.empty() || input.control_ids.empty()) {
        data.notes.push_back(fmt::format("matching '{}': an arm has no complete rows", spec.name));
        continue;
      }
      report::MatchSection section{spec, stats::mahalanobis_match(input.treated, input.control, spec.caliper, input.columns), {}};
      std::set<std::string> subset;
      for (const auto& p : section.result.pairs) {
        subset.insert(input.treated_ids[p.treated]);
        subset.insert(input.control_ids[p.control]);
      }
      if (section.result.n_matched > 0) section.rates = stats::group_rate_comparison(in.corpus, positives, subset);
      data.matching.push_back(std::move(section));
    } catch (const Error& e) {
      data.notes.push_back(fmt::format("matching '{}': {}", spec.name, e.what()));
    }
  }

  if (!in.pairs.empty()) {
    // Persistence is judged on segments every pair evaluated.
    std::set<std::string> common(in.pairs.front().evaluated.begin(), in.pairs.front().evaluated.end());
    for (const auto& p : in.pairs) {
      const std::set<std::string> e(p.evaluated.begin(), p.evaluated.end());
      std::set<std::string> next;
      std::set_intersection(common.begin(), common.end(), e.begin(), e.end(), std::inserter(next, next.end()));
      common = std::move(next);
    }
    std::vector<detection::PairEvaluation> restricted;
    for (const auto& p : in.pairs) {
      detection::PairEvaluation r{p.run_pair, {common.begin(), common.end()}, {}};
      for (const auto& id : p.flagged)
        if (common.contains(id)) r.flagged.insert(id);
      restricted.push_back(std::move(r));
    }
    data.stability = detection::stability_report(restricted, [&](const std::string& id) -> std::optional<corpus::Group> {
      if (!in.corpus.find_segment(id)) return std::nullopt;
      return in.corpus.speaker_of(id).group;
    });
  }
  return data;
}

StageOutcome Pipeline::stage_analyze() {
  const std::string key = "analyze";
  hash::Digest d;
  d.add(kStateVersion).add(key).add(recorded_digest("ingest"));
  json specs{{"regressions", json::array()}, {"matching", json::array()}, {"profiles", profile_names()}};
  for (const auto& r : config_.regressions) specs["regressions"].push_back(stats::to_json(r));
  for (const auto& m : config_.matching) specs["matching"].push_back(stats::to_json(m));
  d.add(specs.dump());
  add_file_if_exists(d, config_.output / "vad" / "features.jsonl");
  for (const auto& n : profile_names()) add_file_if_exists(d, config_.output / "vad" / (n + ".jsonl"));
  add_file_if_exists(d, candidates_path());
  add_file_if_exists(d, labels_path());
  add_file_if_exists(d, config_.output / "candidates" / "pairs.json");
  const auto digest = d.hex();
  const auto dir = config_.output / "stats";
  if (up_to_date(key, digest, {dir / "analysis.json", dir / "regression_table.txt"})) return {key, true};

  const auto data = build_report(config_, load_analysis_inputs());
  fs::create_directories(dir);
  jsonl::write_text(dir / "analysis.json", report::report_json(data).dump(2) + "\n");
  jsonl::write_text(dir / "regression_table.txt",
                    data.regressions.empty() ? std::string("no regression fitted\n")
                                             : stats::format_regression_table(data.regressions));
  record(key, digest);
  return {key, false};
}

StageOutcome Pipeline::stage_report() {
  const std::string key = "report";
  const auto analysis = config_.output / "stats" / "analysis.json";
  if (!fs::exists(analysis)) throw Error(ErrorKind::stage, "run 'analyze' first");
  hash::Digest d;
  d.add(kStateVersion).add(key).add(recorded_digest("analyze")).add_file(analysis);
  const auto digest = d.hex();
  if (up_to_date(key, digest, {report_dir() / "report.json", report_dir() / "report.md"})) return {key, true};

  report::export_report(build_report(config_, load_analysis_inputs()), report_dir());
  record(key, digest);
  return {key, false};
}

namespace {

template <typename F>
auto as_stage(Stage stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::stage && std::string_view(e.what()).starts_with("stage '")) throw;
    throw Error(ErrorKind::stage, fmt::format("stage '{}' failed: {}", to_string(stage), e.what()));
  } catch (const std::exception& e) {
    throw Error(ErrorKind::stage, fmt::format("stage '{}' failed: {}", to_string(stage), e.what()));
  }
}

}  // namespace

std::vector<StageOutcome> Pipeline::dispatch(Stage stage) {
  return as_stage(stage, [&]() -> std::vector<StageOutcome> {
    switch (stage) {
      case Stage::ingest: return {stage_ingest()};
      case Stage::vad: return {stage_vad()};
      case Stage::transcribe: return stage_transcribe_all();
      case Stage::detect: return {stage_detect()};
      case Stage::adjudicate: return {stage_adjudicate()};
      case Stage::analyze: return {stage_analyze()};
      case Stage::report: return {stage_report()};
    }
    return {};
  });
}

StageOutcome Pipeline::transcribe(const std::string& backend_id, const std::string& run_tag) {
  return as_stage(Stage::transcribe, [&] { return transcribe_run(backend_id, run_tag); });
}

std::vector<StageOutcome> Pipeline::run_stage(Stage stage) { return dispatch(stage); }

std::vector<StageOutcome> Pipeline::run() {
  std::vector<StageOutcome> all;
  for (auto s : kStageOrder) {
    auto outcomes = dispatch(s);
    for (const auto& o : outcomes) spdlog::info("{}: {}", o.key, o.skipped ? "up to date" : "done");
    all.insert(all.end(), outcomes.begin(), outcomes.end());
  }
  return all;
}

std::string Pipeline::vad_frames_csv(const std::string& segment_id) const {
  const auto corpus = load_corpus();
  const auto* seg = corpus.find_segment(segment_id);
  if (!seg) throw Error(ErrorKind::not_found, "unknown segment '" + segment_id + "'");
  const auto audio = audio::read_wav(seg->resolved_path);
  return vad::frames_csv(vad::analyze(audio.samples, audio.sample_rate, config_.vad));
}

PipelineConfig simulated_config(PipelineConfig config, const fs::path& mock_config) {
  const auto mock_path = mock_config.empty() ? config.mock_config : mock_config;
  if (mock_path.empty()) throw Error(ErrorKind::invalid_argument, "simulation needs a mock config");
  config.manifest = config.output / "simulation" / "manifest.jsonl";
  asr::BackendDescriptor mock;
  mock.backend_id = "mock";
  mock.kind = asr::BackendKind::mock;
  mock.mock_config = fs::absolute(mock_path);
  mock.parallelism_limit = std::max(1, config.parallelism);
  config.backends = {mock};
  config.mock_config = mock.mock_config;
  if (config.run_tags.size() < 2) config.run_tags = {{"2023-04", std::nullopt}, {"2023-05", std::nullopt}};
  config.adjudication = Adjudication::oracle;
  config.reviewers.insert(kOracleReviewer);
  if (!config.simulation) config.simulation = simulation::SimulationConfig{};
  return config;
}

std::vector<StageOutcome> simulate(PipelineConfig config, const fs::path& mock_config) {
  config = simulated_config(std::move(config), mock_config);
  (void)asr::load_mock_config(config.mock_config);
  auto corpus_sim = *config.simulation;
  corpus_sim.seed = hash::derive_seed(config.seed, {"simulation", std::to_string(corpus_sim.seed)});

  const auto dir = config.output / "simulation";
  const auto state = config.output / "state" / "simulate.json";
  const auto fingerprint = simulation::to_json(corpus_sim).dump();
  bool fresh = fs::exists(config.manifest) && fs::exists(state);
  if (fresh) {
    try {
      fresh = json::parse(jsonl::read_text(state)).value("digest", std::string{}) == fingerprint;
    } catch (const json::exception&) {
      fresh = false;
    }
  }
  if (!fresh) {
    spdlog::info("simulate: synthesizing {} + {} segments", corpus_sim.aphasia.segments, corpus_sim.control.segments);
    simulation::write_corpus(simulation::synthesize_corpus(corpus_sim), dir, corpus_sim.seed);
    fs::create_directories(state.parent_path());
    jsonl::write_text(state, json{{"stage", "simulate"}, {"digest", fingerprint}}.dump(2) + "\n");
  }
  Pipeline pipeline(std::move(config));
  return pipeline.run();
}

}  // namespace hallaudit::pipeline
