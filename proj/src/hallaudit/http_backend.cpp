#include <httplib.h>

#include <chrono>
#include <thread>

#include "hallaudit/asr.hpp"
#include "hallaudit/error.hpp"
#include "hallaudit/wav.hpp"

namespace hallaudit::asr {

using nlohmann::json;

namespace {

// Splits "http://host:port/path?q" into origin and path.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::invalid_argument, "endpoint needs a scheme: " + endpoint);
  const auto scheme = endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw Error(ErrorKind::invalid_argument, "unsupported endpoint scheme '" + scheme + "'");
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

bool transient(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) {
  descriptor_.validate();
  std::tie(origin_, path_) = split_endpoint(descriptor_.endpoint);
}

TranscriptRun HttpBackend::transcribe(const corpus::AudioSegment& segment, const std::string& run_tag) {
  const auto body = audio::read_file_bytes(segment.resolved_path);

  httplib::Client client(origin_);
  const auto timeout = std::chrono::milliseconds(descriptor_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const httplib::Headers headers{{"X-Language-Hint", descriptor_.language_hint}};

  std::string last_error;
  const int attempts = 1 + descriptor_.max_retries;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(descriptor_.backoff_ms << (attempt - 1)));

    auto res = client.Post(path_, headers, body.data(), body.size(), "audio/wav");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      json payload;
      try {
        payload = json::parse(res->body);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, "backend '" + descriptor_.backend_id + "' returned invalid JSON: " + e.what());
      }
      if (!payload.is_object() || !payload.contains("text") || !payload["text"].is_string())
        throw Error(ErrorKind::parse, "backend '" + descriptor_.backend_id + "' response lacks a string \"text\" field");
      TranscriptRun run;
      run.segment_id = segment.segment_id;
      run.backend_id = descriptor_.backend_id;
      run.run_tag = run_tag;
      run.text = payload["text"].get<std::string>();
      run.tokens = alignment::normalize(run.text);
      run.created_at = now_utc();
      return run;
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
    if (!transient(res->status)) throw Error(ErrorKind::network, last_error);
  }
  throw Error(ErrorKind::network, "after " + std::to_string(attempts) + " attempts, " + last_error);
}

}  // namespace hallaudit::asr
