#include <pthread.h>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hallaudit/hallaudit.h"

namespace {

struct Globals {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  int parallelism = 0;
  std::string log_level = "info";
};

int fail(ha_status st) {
  std::cerr << "error (" << ha_status_name(st) << "): " << ha_last_error() << "\n";
  return static_cast<int>(st);
}

ha_options options_of(const Globals& g) {
  ha_options o{};
  o.output_dir = g.output.empty() ? nullptr : g.output.c_str();
  o.has_seed = g.seed.has_value();
  o.seed = g.seed.value_or(0);
  o.parallelism = g.parallelism;
  return o;
}

void print_outcomes(char* json) {
  if (!json) return;
  std::cout << json << "\n";
  ha_string_free(json);
}

class Handle {
 public:
  ha_status open(const Globals& g) {
    const auto o = options_of(g);
    return ha_pipeline_open(g.config.empty() ? nullptr : g.config.c_str(), &o, &p_);
  }
  ~Handle() { ha_pipeline_free(p_); }
  ha_pipeline* get() const { return p_; }

 private:
  ha_pipeline* p_ = nullptr;
};

int run_stage(const Globals& g, const char* stage) {
  Handle h;
  if (auto st = h.open(g)) return fail(st);
  char* out = nullptr;
  if (auto st = ha_pipeline_run_stage(h.get(), stage, &out)) return fail(st);
  print_outcomes(out);
  return 0;
}

int serve(const Globals& g, const std::string& host, int port) {
  // Block the stop signals before any server thread exists so only sigwait sees them.
  sigset_t stop;
  sigemptyset(&stop);
  sigaddset(&stop, SIGINT);
  sigaddset(&stop, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop, nullptr);

  Handle h;
  if (auto st = h.open(g)) return fail(st);
  ha_service* service = nullptr;
  int bound = 0;
  if (auto st = ha_service_start(h.get(), host.empty() ? nullptr : host.c_str(), port, &service, &bound))
    return fail(st);
  std::cout << "listening on port " << bound << std::endl;
  int sig = 0;
  sigwait(&stop, &sig);
  std::cerr << "signal " << sig << ", shutting down\n";
  ha_service_stop(service);
  ha_service_free(service);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transcription hallucination audit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Pipeline config (JSON)");
  app.add_option("--output", g.output, "Output directory (overrides config)");
  app.add_option("--seed", g.seed, "Master seed (overrides config)");
  app.add_option("--parallelism", g.parallelism, "Worker count (overrides config)")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  auto* ingest = app.add_subcommand("ingest", "Validate the manifest and write corpus features");
  auto* vad = app.add_subcommand("vad", "Measure non-vocal duration under each VAD profile");
  std::string frames_segment, frames_out;
  vad->add_option("--frames", frames_segment, "Print per-frame decisions for one segment instead");
  vad->add_option("--frames-out", frames_out, "Write the frame CSV here instead of stdout");

  auto* transcribe = app.add_subcommand("transcribe", "Transcribe the corpus once with one backend");
  std::string backend, run_tag;
  transcribe->add_option("--backend", backend, "Backend id")->required();
  transcribe->add_option("--run-tag", run_tag, "Run tag")->required();

  auto* detect = app.add_subcommand("detect", "Compare consecutive runs and store candidates");
  auto* adjudicate = app.add_subcommand("adjudicate", "Oracle adjudication (simulation only)");
  auto* analyze = app.add_subcommand("analyze", "Rates, regressions, matching and stability");
  auto* report = app.add_subcommand("report", "Write report.json and report.md");
  auto* run = app.add_subcommand("run", "All stages; unchanged ones are skipped");

  auto* serve_cmd = app.add_subcommand("serve", "HTTP review service");
  std::string host;
  int port = -1;
  serve_cmd->add_option("--host", host, "Bind address (default from config)");
  serve_cmd->add_option("--port", port, "Port, 0 for any free one (default from config)");

  auto* simulate = app.add_subcommand("simulate", "Synthetic corpus plus mock backend, end to end");
  std::string mock_config;
  simulate->add_option("--mock-config", mock_config, "Mock backend config (JSON)");

  CLI11_PARSE(app, argc, argv);

  if (auto st = ha_set_log_level(g.log_level.c_str())) return fail(st);

  if (ingest->parsed()) return run_stage(g, "ingest");
  if (detect->parsed()) return run_stage(g, "detect");
  if (adjudicate->parsed()) return run_stage(g, "adjudicate");
  if (analyze->parsed()) return run_stage(g, "analyze");
  if (report->parsed()) return run_stage(g, "report");
  if (vad->parsed()) {
    if (frames_segment.empty()) return run_stage(g, "vad");
    Handle h;
    if (auto st = h.open(g)) return fail(st);
    char* csv = nullptr;
    if (auto st = ha_pipeline_vad_frames(h.get(), frames_segment.c_str(), &csv)) return fail(st);
    if (frames_out.empty()) {
      std::cout << csv;
    } else {
      std::ofstream(frames_out, std::ios::binary) << csv;
    }
    ha_string_free(csv);
    return 0;
  }
  if (transcribe->parsed()) {
    Handle h;
    if (auto st = h.open(g)) return fail(st);
    int skipped = 0;
    if (auto st = ha_pipeline_transcribe(h.get(), backend.c_str(), run_tag.c_str(), &skipped)) return fail(st);
    std::cout << "transcribe." << backend << "." << run_tag << ": " << (skipped ? "up to date" : "done") << "\n";
    return 0;
  }
  if (run->parsed()) {
    Handle h;
    if (auto st = h.open(g)) return fail(st);
    char* out = nullptr;
    if (auto st = ha_pipeline_run(h.get(), &out)) return fail(st);
    print_outcomes(out);
    return 0;
  }
  if (serve_cmd->parsed()) return serve(g, host, port);
  if (simulate->parsed()) {
    const auto o = options_of(g);
    char* out = nullptr;
    if (auto st = ha_simulate(g.config.empty() ? nullptr : g.config.c_str(), &o,
                              mock_config.empty() ? nullptr : mock_config.c_str(), &out))
      return fail(st);
    print_outcomes(out);
    return 0;
  }
  return 0;
}
