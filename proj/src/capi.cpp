#include "hallaudit/hallaudit.h"

#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hallaudit/error.hpp"
#include "hallaudit/pipeline.hpp"
#include "hallaudit/service.hpp"

using hallaudit::Error;
using hallaudit::ErrorKind;
namespace pl = hallaudit::pipeline;

struct ha_pipeline {
  pl::PipelineConfig config;
  std::unique_ptr<pl::Pipeline> pipeline;
};

struct ha_service {
  std::unique_ptr<hallaudit::service::ReviewService> service;
};

namespace {

thread_local std::string last_error;

ha_status code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return HA_ERR_INVALID_ARGUMENT;
    case ErrorKind::io: return HA_ERR_IO;
    case ErrorKind::parse: return HA_ERR_PARSE;
    case ErrorKind::validation: return HA_ERR_VALIDATION;
    case ErrorKind::not_found: return HA_ERR_NOT_FOUND;
    case ErrorKind::network: return HA_ERR_NETWORK;
    case ErrorKind::numeric: return HA_ERR_NUMERIC;
    case ErrorKind::stage: return HA_ERR_STAGE;
    case ErrorKind::internal: return HA_ERR_INTERNAL;
  }
  return HA_ERR_INTERNAL;
}

template <typename Fn>
ha_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return HA_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return code_for(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return HA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return HA_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorKind::invalid_argument, std::string(what) + " must not be NULL");
}

pl::PipelineConfig make_config(const char* config_path, const ha_options* options) {
  pl::PipelineConfig c = config_path ? pl::load_config(config_path) : pl::PipelineConfig{};
  if (options) {
    if (options->output_dir) c.output = options->output_dir;
    if (options->has_seed) c.seed = options->seed;
    if (options->parallelism > 0) c.parallelism = options->parallelism;
  }
  return c;
}

void write_outcomes(const std::vector<pl::StageOutcome>& outcomes, char** out) {
  if (!out) return;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& o : outcomes) j.push_back({{"key", o.key}, {"skipped", o.skipped}});
  *out = dup(j.dump());
}

pl::Pipeline& pipeline_of(ha_pipeline* p) {
  require(p, "pipeline");
  if (!p->pipeline) p->pipeline = std::make_unique<pl::Pipeline>(p->config);
  return *p->pipeline;
}

}  // namespace

extern "C" {

const char* ha_version(void) { return "0.1.0"; }

const char* ha_status_name(ha_status status) {
  switch (status) {
    case HA_OK: return "ok";
    case HA_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case HA_ERR_IO: return "io";
    case HA_ERR_PARSE: return "parse";
    case HA_ERR_VALIDATION: return "validation";
    case HA_ERR_NOT_FOUND: return "not_found";
    case HA_ERR_NETWORK: return "network";
    case HA_ERR_NUMERIC: return "numeric";
    case HA_ERR_STAGE: return "stage";
    case HA_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ha_last_error(void) { return last_error.c_str(); }

void ha_string_free(char* s) { std::free(s); }

ha_status ha_set_log_level(const char* level) {
  return guarded([&] {
    require(level, "level");
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && std::string(level) != "off")
      throw Error(ErrorKind::invalid_argument, std::string("unknown log level '") + level + "'");
    static const auto logger = [] {
      auto l = spdlog::stderr_color_mt("hallaudit");
      spdlog::set_default_logger(l);
      return l;
    }();
    logger->set_level(parsed);
  });
}

ha_status ha_pipeline_open(const char* config_path, const ha_options* options, ha_pipeline** out) {
  return guarded([&] {
    require(out, "out");
    require(config_path, "config_path");
    auto p = std::make_unique<ha_pipeline>();
    p->config = make_config(config_path, options);
    // A simulation config without a manifest addresses the synthetic corpus.
    if (p->config.manifest.empty() && p->config.simulation && !p->config.mock_config.empty())
      p->config = pl::simulated_config(std::move(p->config));
    p->config.validate();
    *out = p.release();
  });
}

void ha_pipeline_free(ha_pipeline* pipeline) { delete pipeline; }

ha_status ha_pipeline_run(ha_pipeline* pipeline, char** outcomes_json) {
  return guarded([&] { write_outcomes(pipeline_of(pipeline).run(), outcomes_json); });
}

ha_status ha_pipeline_run_stage(ha_pipeline* pipeline, const char* stage, char** outcomes_json) {
  return guarded([&] {
    require(stage, "stage");
    write_outcomes(pipeline_of(pipeline).run_stage(pl::parse_stage(stage)), outcomes_json);
  });
}

ha_status ha_pipeline_transcribe(ha_pipeline* pipeline, const char* backend_id, const char* run_tag, int* skipped) {
  return guarded([&] {
    require(backend_id, "backend_id");
    require(run_tag, "run_tag");
    const auto outcome = pipeline_of(pipeline).transcribe(backend_id, run_tag);
    if (skipped) *skipped = outcome.skipped ? 1 : 0;
  });
}

ha_status ha_pipeline_vad_frames(ha_pipeline* pipeline, const char* segment_id, char** csv) {
  return guarded([&] {
    require(segment_id, "segment_id");
    require(csv, "csv");
    *csv = dup(pipeline_of(pipeline).vad_frames_csv(segment_id));
  });
}

ha_status ha_pipeline_output_dir(const ha_pipeline* pipeline, char** path) {
  return guarded([&] {
    require(pipeline, "pipeline");
    require(path, "path");
    *path = dup(pipeline->config.output.string());
  });
}

ha_status ha_simulate(const char* config_path, const ha_options* options, const char* mock_config_path,
                      char** outcomes_json) {
  return guarded([&] {
    write_outcomes(pl::simulate(make_config(config_path, options), mock_config_path ? mock_config_path : ""),
                   outcomes_json);
  });
}

ha_status ha_service_start(const ha_pipeline* pipeline, const char* host, int port, ha_service** out,
                           int* bound_port) {
  return guarded([&] {
    require(pipeline, "pipeline");
    require(out, "out");
    auto s = std::make_unique<ha_service>();
    s->service = std::make_unique<hallaudit::service::ReviewService>(pipeline->config);
    const int bound = s->service->start(host ? host : pipeline->config.service.host,
                                         port < 0 ? pipeline->config.service.port : port);
    if (bound_port) *bound_port = bound;
    *out = s.release();
  });
}

void ha_service_stop(ha_service* service) {
  if (service && service->service) service->service->stop();
}

void ha_service_free(ha_service* service) { delete service; }

}  // extern "C"
