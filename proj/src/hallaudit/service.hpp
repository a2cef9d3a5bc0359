#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "hallaudit/error.hpp"
#include "hallaudit/pipeline.hpp"

namespace httplib {
class Server;
}

namespace hallaudit::service {

// Review API over a pipeline output directory. Only label events are written.
class ReviewService {
 public:
  explicit ReviewService(pipeline::PipelineConfig config);
  ~ReviewService();

  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port;
  // the bound port is returned.
  int start(const std::string& host, int port);
  void stop();
  bool running() const;

  // Handlers, callable without a socket. Each returns (status, body).
  std::pair<int, nlohmann::json> list_candidates(const std::string& status) const;
  std::pair<int, nlohmann::json> candidate_detail(const std::string& candidate_id) const;
  std::pair<int, nlohmann::json> post_label(const std::string& candidate_id, const std::string& body);
  nlohmann::json categories() const;
  nlohmann::json live_report() const;
  // Absolute path of the segment's WAV, or empty when unknown.
  std::filesystem::path audio_path(const std::string& segment_id) const;

 private:
  pipeline::PipelineConfig config_;
  pipeline::AnalysisInputs inputs_;
  std::map<std::tuple<std::string, std::string, std::string>, asr::TranscriptRun> runs_;
  std::unique_ptr<detection::CandidateStore> candidates_;
  std::unique_ptr<harms::LabelStore> labels_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

// HTTP status for an error kind.
int status_for(ErrorKind kind);

}  // namespace hallaudit::service
