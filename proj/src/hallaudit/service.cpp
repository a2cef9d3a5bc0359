#include "hallaudit/service.hpp"

#include <fstream>
#include <iterator>

#include <httplib.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hallaudit/error.hpp"
#include "hallaudit/jsonl.hpp"
#include "hallaudit/text.hpp"

namespace hallaudit::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json error_body(const std::string& message) { return json{{"error", message}}; }

json span_json(const alignment::TokenSpan& span, const asr::TranscriptRun* run) {
  json j{{"start", span.start}, {"length", span.length}, {"text", span.text}};
  if (run && span.length > 0 && span.end() <= run->tokens.size()) {
    const auto begin = run->tokens[span.start].begin;
    const auto end = run->tokens[span.end() - 1].end;
    j["byte_begin"] = begin;
    j["byte_end"] = end;
    j["utf16_begin"] = text::utf16_offset(run->text, begin);
    j["utf16_end"] = text::utf16_offset(run->text, end);
  }
  return j;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

}  // namespace

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::parse: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::validation: return 422;
    default: return 500;
  }
}

ReviewService::ReviewService(pipeline::PipelineConfig config) : config_(std::move(config)) {
  pipeline::Pipeline pipe(config_);
  inputs_ = pipe.load_analysis_inputs();
  for (const auto& b : config_.backends)
    for (const auto& t : config_.run_tags) {
      const auto path = config_.output / "runs" / b.backend_id / (t.tag + ".jsonl");
      if (!fs::exists(path)) continue;
      for (auto& r : asr::read_runs(path)) {
        auto key = std::make_tuple(r.backend_id, r.run_tag, r.segment_id);
        runs_.insert_or_assign(std::move(key), std::move(r));
      }
    }
  fs::create_directories(pipe.labels_path().parent_path());
  candidates_ = std::make_unique<detection::CandidateStore>(pipe.candidates_path());
  labels_ = std::make_unique<harms::LabelStore>(pipe.labels_path(), *candidates_, config_.reviewers);
}

ReviewService::~ReviewService() { stop(); }

std::pair<int, json> ReviewService::list_candidates(const std::string& status) const {
  std::optional<detection::CandidateStatus> filter;
  if (!status.empty()) {
    try {
      filter = detection::parse_status(status);
    } catch (const Error& e) {
      return {400, error_body(e.what())};
    }
  }
  json out = json::array();
  for (const auto& c : candidates_->list(filter)) out.push_back(detection::to_json(c));
  return {200, out};
}

std::pair<int, json> ReviewService::candidate_detail(const std::string& candidate_id) const {
  const auto c = candidates_->find(candidate_id);
  if (!c) return {404, error_body("unknown candidate '" + candidate_id + "'")};
  json j = detection::to_json(*c);
  const auto* truth = inputs_.corpus.find_truth(c->segment_id);
  j["truth"] = truth ? json{{"text", truth->text}, {"tokens", alignment::surfaces(truth->tokens)}} : json(nullptr);
  if (inputs_.corpus.find_segment(c->segment_id))
    j["group"] = corpus::to_string(inputs_.corpus.speaker_of(c->segment_id).group);

  json runs = json::array();
  std::string flagged_text;
  for (const auto& fs : c->flagged_spans) {
    const auto it = runs_.find({c->backend_id, fs.run_tag, c->segment_id});
    const asr::TranscriptRun* run = it == runs_.end() ? nullptr : &it->second;
    json spans = json::array();
    for (const auto& s : fs.spans) {
      spans.push_back(span_json(s, run));
      flagged_text += (flagged_text.empty() ? "" : " ") + s.text;
    }
    runs.push_back(json{{"run_tag", fs.run_tag},
                        {"text", run ? json(run->text) : json(nullptr)},
                        {"tokens", run ? json(alignment::surfaces(run->tokens)) : json(nullptr)},
                        {"created_at", run ? json(run->created_at) : json(nullptr)},
                        {"spans", std::move(spans)}});
  }
  j["runs"] = std::move(runs);

  json suggestions = json::array();
  for (const auto& s : harms::suggest_categories(flagged_text)) suggestions.push_back(harms::to_json(s));
  j["suggestions"] = std::move(suggestions);
  j["audio_url"] = "/api/audio/" + c->segment_id;

  json labels = json::array();
  for (const auto& l : labels_->events())
    if (l.candidate_id == candidate_id) labels.push_back(harms::to_json(l));
  j["labels"] = std::move(labels);
  return {200, j};
}

std::pair<int, json> ReviewService::post_label(const std::string& candidate_id, const std::string& body) {
  try {
    const auto parsed = json::parse(body);
    const auto stored = labels_->record_label(candidate_id, harms::label_from_json(parsed));
    const auto c = candidates_->find(candidate_id);
    return {200, json{{"label", harms::to_json(stored)}, {"status", detection::to_string(c->status)}}};
  } catch (const json::exception& e) {
    return {400, error_body(std::string("malformed JSON: ") + e.what())};
  } catch (const Error& e) {
    return {status_for(e.kind()), error_body(e.what())};
  }
}

json ReviewService::categories() const {
  json out = json::array();
  for (auto c : kAllCategories)
    out.push_back(json{{"name", to_string(c)},
                       {"broad_group", to_string(broad_group(c))},
                       {"harmful", broad_group(c) != BroadGroup::none}});
  return out;
}

json ReviewService::live_report() const {
  auto inputs = inputs_;
  inputs.candidates = candidates_->list();
  inputs.labels = labels_->events();
  return report::report_json(pipeline::build_report(config_, inputs));
}

fs::path ReviewService::audio_path(const std::string& segment_id) const {
  const auto* seg = inputs_.corpus.find_segment(segment_id);
  return seg ? seg->resolved_path : fs::path{};
}

int ReviewService::start(const std::string& host, int port) {
  if (server_) throw Error(ErrorKind::invalid_argument, "service already started");
  server_ = std::make_unique<httplib::Server>();
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/api/candidates", [this](const httplib::Request& req, httplib::Response& res) {
    const auto [code, body] = list_candidates(req.get_param_value("status"));
    send(res, code, body);
  });
  srv.Get(R"(/api/candidates/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto [code, body] = candidate_detail(req.matches[1]);
    send(res, code, body);
  });
  srv.Post(R"(/api/candidates/([^/]+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto [code, body] = post_label(req.matches[1], req.body);
    send(res, code, body);
  });
  srv.Get(R"(/api/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto path = audio_path(req.matches[1]);
    if (path.empty()) return send(res, 404, error_body("unknown segment '" + std::string(req.matches[1]) + "'"));
    res.set_content(read_bytes(path), "audio/wav");
  });
  srv.Get("/api/categories", [this](const httplib::Request&, httplib::Response& res) { send(res, 200, categories()); });
  srv.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) { send(res, 200, live_report()); });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send(res, status_for(e.kind()), error_body(e.what()));
    } catch (const std::exception& e) {
      send(res, 500, error_body(e.what()));
    }
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send(res, res.status, error_body(fmt::format("HTTP {}", res.status)));
  });

  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    server_.reset();
    throw Error(ErrorKind::network, fmt::format("cannot bind {}:{}", host, port));
  }
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  spdlog::info("review service on http://{}:{}", host, bound);
  return bound;
}

bool ReviewService::running() const { return server_ && server_->is_running(); }

void ReviewService::stop() {
  if (!server_) return;
  server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace hallaudit::service
