#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "hallaudit/asr.hpp"
#include "hallaudit/error.hpp"
#include "hallaudit/jsonl.hpp"

namespace hallaudit::asr {

using nlohmann::json;

void BackendDescriptor::validate() const {
  if (backend_id.empty()) throw Error(ErrorKind::invalid_argument, "backend_id must not be empty");
  if (parallelism_limit < 1) throw Error(ErrorKind::invalid_argument, "parallelism_limit must be >= 1");
  if (kind == BackendKind::http && endpoint.empty())
    throw Error(ErrorKind::invalid_argument, "http backend '" + backend_id + "' needs an endpoint");
  if (max_retries < 0 || backoff_ms < 0 || timeout_ms <= 0)
    throw Error(ErrorKind::invalid_argument, "invalid retry/timeout settings for backend '" + backend_id + "'");
}

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

TranscriptRun transcribe(Backend& backend, const corpus::AudioSegment& segment, const std::string& run_tag) {
  return backend.transcribe(segment, run_tag);
}

std::vector<WorkItem> cross_product(std::span<const corpus::AudioSegment> segments,
                                    std::span<const std::string> run_tags) {
  std::vector<WorkItem> work;
  work.reserve(segments.size() * run_tags.size());
  for (const auto& seg : segments)
    for (const auto& tag : run_tags) work.push_back({&seg, tag});
  return work;
}

BatchResult batch_transcribe(Backend& backend, std::span<const WorkItem> work, int parallelism) {
  if (parallelism < 1) throw Error(ErrorKind::invalid_argument, "parallelism must be >= 1");
  if (parallelism > backend.descriptor().parallelism_limit)
    throw Error(ErrorKind::invalid_argument,
                fmt::format("parallelism {} exceeds limit {} of backend '{}'", parallelism,
                            backend.descriptor().parallelism_limit, backend.descriptor().backend_id));

  BatchResult result;
  result.planned = work.size();
  std::vector<std::optional<TranscriptRun>> runs(work.size());
  std::vector<std::optional<std::string>> errors(work.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<std::size_t> attempted{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      attempted.fetch_add(1);
      try {
        runs[i] = backend.transcribe(*work[i].segment, work[i].run_tag);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (2 * (failed.fetch_add(1) + 1) > work.size()) abort.store(true);
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(parallelism), work.size()));
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < work.size(); ++i) {
    if (runs[i]) result.runs.push_back(std::move(*runs[i]));
    if (errors[i]) result.failures.push_back({work[i].segment->segment_id, work[i].run_tag, *errors[i]});
  }
  const auto by_key = [](const auto& a, const auto& b) {
    return std::tie(a.segment_id, a.run_tag) < std::tie(b.segment_id, b.run_tag);
  };
  std::sort(result.runs.begin(), result.runs.end(), by_key);
  std::sort(result.failures.begin(), result.failures.end(), by_key);
  result.attempted = attempted.load();
  result.aborted = abort.load();
  return result;
}

json to_json(const TranscriptRun& run) {
  auto tokens = json::array();
  for (const auto& t : run.tokens) tokens.push_back(t.surface);
  return json{{"segment_id", run.segment_id}, {"backend_id", run.backend_id}, {"run_tag", run.run_tag},
              {"text", run.text},             {"tokens", std::move(tokens)},  {"created_at", run.created_at}};
}

TranscriptRun run_from_json(const json& j) {
  TranscriptRun run;
  run.segment_id = j.at("segment_id").get<std::string>();
  run.backend_id = j.at("backend_id").get<std::string>();
  run.run_tag = j.at("run_tag").get<std::string>();
  run.text = j.at("text").get<std::string>();
  run.tokens = alignment::normalize(run.text);
  run.created_at = j.value("created_at", std::string{});
  return run;
}

json to_json(const BackendDescriptor& d) {
  json j{{"backend_id", d.backend_id},
         {"kind", d.kind == BackendKind::http ? "http" : "mock"},
         {"language_hint", d.language_hint},
         {"parallelism_limit", d.parallelism_limit}};
  if (d.kind == BackendKind::http) {
    j["endpoint"] = d.endpoint;
    j["timeout_ms"] = d.timeout_ms;
    j["max_retries"] = d.max_retries;
    j["backoff_ms"] = d.backoff_ms;
  } else {
    j["mock_config"] = d.mock_config.string();
  }
  return j;
}

BackendDescriptor descriptor_from_json(const json& j) {
  BackendDescriptor d;
  d.backend_id = j.at("backend_id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "http") {
    d.kind = BackendKind::http;
  } else if (kind == "mock") {
    d.kind = BackendKind::mock;
  } else {
    throw Error(ErrorKind::validation, "unknown backend kind '" + kind + "'");
  }
  d.endpoint = j.value("endpoint", std::string{});
  d.language_hint = j.value("language_hint", d.language_hint);
  d.parallelism_limit = j.value("parallelism_limit", d.parallelism_limit);
  d.timeout_ms = j.value("timeout_ms", d.timeout_ms);
  d.max_retries = j.value("max_retries", d.max_retries);
  d.backoff_ms = j.value("backoff_ms", d.backoff_ms);
  d.mock_config = j.value("mock_config", std::string{});
  d.validate();
  return d;
}

std::vector<TranscriptRun> read_runs(const std::filesystem::path& path) {
  std::vector<TranscriptRun> runs;
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  jsonl::for_each(path, [&](const json& j, std::size_t line) {
    auto run = run_from_json(j);
    if (!keys.emplace(run.segment_id, run.backend_id, run.run_tag).second)
      throw Error(ErrorKind::validation, fmt::format("{}:{}: duplicate run ({}, {}, {})", path.string(), line,
                                                     run.segment_id, run.backend_id, run.run_tag));
    runs.push_back(std::move(run));
  });
  return runs;
}

void write_runs(const std::filesystem::path& path, std::span<const TranscriptRun> runs) {
  std::vector<json> records;
  records.reserve(runs.size());
  for (const auto& r : runs) records.push_back(to_json(r));
  jsonl::write_all(path, records);
}

}  // namespace hallaudit::asr
