#include "hallaudit/detection.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hallaudit/error.hpp"

namespace hallaudit::detection {

using alignment::TokenSpan;
using nlohmann::json;

namespace {

// Longest run of back-to-back copies of `gram` (any rotation) in `tokens`.
std::size_t max_consecutive_repeats(std::span<const std::string> tokens, std::span<const std::string> gram) {
  const std::size_t n = gram.size();
  if (n == 0 || tokens.size() < n) return 0;
  std::size_t best = 0;
  for (std::size_t rot = 0; rot < n; ++rot) {
    std::vector<std::string> rotated(n);
    for (std::size_t k = 0; k < n; ++k) rotated[k] = gram[(k + rot) % n];
    for (std::size_t start = 0; start + n <= tokens.size(); ++start) {
      std::size_t count = 0;
      std::size_t pos = start;
      while (pos + n <= tokens.size() && std::equal(rotated.begin(), rotated.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) {
        ++count;
        pos += n;
      }
      best = std::max(best, count);
    }
  }
  return best;
}

std::vector<TokenSpan> side_spans(const std::vector<alignment::UnstableRegion>& regions, bool first) {
  std::vector<TokenSpan> out;
  for (const auto& r : regions) {
    const auto& side = first ? r.a : r.b;
    if (side) out.push_back(*side);
  }
  return out;
}

std::vector<TokenSpan> flag_run(const std::vector<TokenSpan>& unstable, std::span<const std::string> truth,
                                std::span<const std::string> run) {
  if (unstable.empty()) return {};
  const auto inserted = alignment::insertion_spans(alignment::align(truth, run), run, 1);
  auto overlap = alignment::intersect_spans(unstable, inserted, run);
  return overlap.empty() ? unstable : overlap;
}

}  // namespace

void DetectionConfig::validate() const {
  if (min_unstable_span == 0 || min_excess_tokens == 0 || repetition_ngram_max == 0 || repetition_min_repeats == 0)
    throw Error(ErrorKind::invalid_argument, "detection thresholds must be positive");
  if (!(script_mismatch_threshold > 0.0 && script_mismatch_threshold <= 1.0))
    throw Error(ErrorKind::invalid_argument, "script_mismatch_threshold must be in (0, 1]");
}

const char* to_string(Signal signal) {
  switch (signal) {
    case Signal::cross_run_unstable: return "cross_run_unstable";
    case Signal::longer_than_truth: return "longer_than_truth";
    case Signal::repetition_loop: return "repetition_loop";
    case Signal::nontarget_script: return "nontarget_script";
  }
  return "cross_run_unstable";
}

const char* to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::pending: return "pending";
    case CandidateStatus::confirmed: return "confirmed";
    case CandidateStatus::rejected: return "rejected";
  }
  return "pending";
}

Signal parse_signal(std::string_view name) {
  for (auto s : {Signal::cross_run_unstable, Signal::longer_than_truth, Signal::repetition_loop, Signal::nontarget_script})
    if (name == to_string(s)) return s;
  throw Error(ErrorKind::parse, "unknown signal '" + std::string(name) + "'");
}

CandidateStatus parse_status(std::string_view name) {
  for (auto s : {CandidateStatus::pending, CandidateStatus::confirmed, CandidateStatus::rejected})
    if (name == to_string(s)) return s;
  throw Error(ErrorKind::invalid_argument, "unknown status '" + std::string(name) + "'");
}

std::string candidate_id(std::string_view segment_id, std::string_view backend_id, std::string_view first_tag,
                         std::string_view second_tag) {
  return fmt::format("{}~{}~{}~{}", segment_id, backend_id, first_tag, second_tag);
}

std::optional<HallucinationCandidate> detect_candidate(const corpus::GroundTruth& truth, const asr::TranscriptRun& a,
                                                       const asr::TranscriptRun& b, const DetectionConfig& config,
                                                       std::string created_at) {
  if (a.segment_id != truth.segment_id || b.segment_id != truth.segment_id)
    throw Error(ErrorKind::invalid_argument, fmt::format("runs for segments '{}'/'{}' compared against truth of '{}'",
                                                         a.segment_id, b.segment_id, truth.segment_id));
  if (a.backend_id != b.backend_id)
    throw Error(ErrorKind::invalid_argument, "runs come from different backends");

  const auto ta = alignment::surfaces(a.tokens);
  const auto tb = alignment::surfaces(b.tokens);
  const auto tt = alignment::surfaces(truth.tokens);

  const auto regions = alignment::unstable_regions(ta, tb, config.min_unstable_span);
  if (regions.empty()) return std::nullopt;

  const std::size_t needed = tt.size() + config.min_excess_tokens;
  const bool longer = ta.size() >= needed || tb.size() >= needed;
  if (config.require_longer_than_truth && !longer) return std::nullopt;

  HallucinationCandidate c;
  c.candidate_id = candidate_id(a.segment_id, a.backend_id, a.run_tag, b.run_tag);
  c.segment_id = a.segment_id;
  c.backend_id = a.backend_id;
  c.run_pair = {a.run_tag, b.run_tag};
  c.created_at = std::move(created_at);
  c.signals.insert(Signal::cross_run_unstable);
  if (longer) c.signals.insert(Signal::longer_than_truth);
  c.flagged_spans.push_back({a.run_tag, flag_run(side_spans(regions, true), tt, ta)});
  c.flagged_spans.push_back({b.run_tag, flag_run(side_spans(regions, false), tt, tb)});
  if (detect_repetition(ta, tt, config) || detect_repetition(tb, tt, config)) c.signals.insert(Signal::repetition_loop);
  if (flag_nontarget_script(a.text, config.expected_script, config.script_mismatch_threshold).flagged ||
      flag_nontarget_script(b.text, config.expected_script, config.script_mismatch_threshold).flagged)
    c.signals.insert(Signal::nontarget_script);
  return c;
}

std::optional<TokenSpan> detect_repetition(std::span<const std::string> tokens, std::span<const std::string> truth_tokens,
                                           const DetectionConfig& config) {
  struct Best {
    std::size_t start = 0, length = 0;
  };
  std::optional<Best> best;
  const std::size_t total = tokens.size();
  for (std::size_t n = 1; n <= config.repetition_ngram_max && 2 * n <= total + n; ++n) {
    std::size_t s = 0;
    while (s + n < total) {
      if (tokens[s] != tokens[s + n]) {
        ++s;
        continue;
      }
      // Maximal block [s, s + matches + n) with period n.
      std::size_t matches = 0;
      while (s + matches + n < total && tokens[s + matches] == tokens[s + matches + n]) ++matches;
      const std::size_t length = matches + n;
      std::size_t copies = length / n;
      const std::size_t rest = length % n;
      if (s + length == total && rest > 0 && 2 * rest >= n) ++copies;
      if (copies >= config.repetition_min_repeats && (!best || length > best->length)) {
        const auto gram = tokens.subspan(s, n);
        if (max_consecutive_repeats(truth_tokens, gram) < copies) best = Best{s, length};
      }
      s += matches + 1;
    }
  }
  if (!best) return std::nullopt;
  return alignment::make_span(tokens, best->start, best->length);
}

ScriptFlag flag_nontarget_script(std::string_view text, text::Script expected, double threshold) {
  const auto counts = text::count_script_letters(text, expected);
  const double share = counts.share();
  return {share > threshold, share};
}

std::string StabilityReport::summary() const { return fmt::format("{}/{} persistent", persistent, ever_flagged); }

StabilityReport stability_report(std::span<const PairEvaluation> pairs, const GroupLookup& group_of) {
  StabilityReport report;
  report.pairs = pairs.size();
  if (pairs.empty()) return report;

  const std::set<std::string> reference(pairs.front().evaluated.begin(), pairs.front().evaluated.end());
  for (const auto& p : pairs) {
    const std::set<std::string> current(p.evaluated.begin(), p.evaluated.end());
    if (current == reference) continue;
    std::vector<std::string> diff;
    std::set_symmetric_difference(reference.begin(), reference.end(), current.begin(), current.end(),
                                  std::back_inserter(diff));
    throw Error(ErrorKind::validation, fmt::format("run pair ({}, {}) evaluated a different segment set; differing: {}",
                                                   p.run_pair.first, p.run_pair.second, fmt::join(diff, ", ")));
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& p : pairs)
    for (const auto& id : p.flagged) {
      if (!reference.contains(id))
        throw Error(ErrorKind::validation, "segment '" + id + "' flagged but not evaluated");
      ++counts[id];
    }

  report.by_group = {{corpus::Group::aphasia, {}}, {corpus::Group::control, {}}};
  for (const auto& [id, flagged] : counts) {
    report.segments.push_back({id, flagged, pairs.size()});
    ++report.ever_flagged;
    const bool persistent = flagged == pairs.size();
    if (persistent) ++report.persistent;
    if (group_of) {
      if (const auto g = group_of(id)) {
        auto& gs = report.by_group[*g];
        ++gs.ever_flagged;
        if (persistent) ++gs.persistent;
      }
    }
  }
  return report;
}

json to_json(const HallucinationCandidate& c) {
  json spans = json::array();
  for (const auto& rs : c.flagged_spans) spans.push_back(json{{"run_tag", rs.run_tag}, {"spans", rs.spans}});
  json signals = json::array();
  for (auto s : c.signals) signals.push_back(to_string(s));
  return json{{"candidate_id", c.candidate_id},
              {"segment_id", c.segment_id},
              {"backend_id", c.backend_id},
              {"run_pair", json::array({c.run_pair.first, c.run_pair.second})},
              {"flagged_spans", std::move(spans)},
              {"signals", std::move(signals)},
              {"status", to_string(c.status)},
              {"created_at", c.created_at}};
}

HallucinationCandidate candidate_from_json(const json& j) {
  HallucinationCandidate c;
  c.candidate_id = j.at("candidate_id").get<std::string>();
  c.segment_id = j.at("segment_id").get<std::string>();
  c.backend_id = j.at("backend_id").get<std::string>();
  const auto& pair = j.at("run_pair");
  c.run_pair = {pair.at(0).get<std::string>(), pair.at(1).get<std::string>()};
  for (const auto& rs : j.at("flagged_spans"))
    c.flagged_spans.push_back({rs.at("run_tag").get<std::string>(), rs.at("spans").get<std::vector<TokenSpan>>()});
  for (const auto& s : j.at("signals")) c.signals.insert(parse_signal(s.get<std::string>()));
  c.status = parse_status(j.value("status", std::string("pending")));
  c.created_at = j.value("created_at", std::string{});
  return c;
}

json to_json(const StabilityReport& r) {
  json groups = json::object();
  for (const auto& [g, s] : r.by_group)
    groups[corpus::to_string(g)] = json{{"persistent", s.persistent}, {"ever_flagged", s.ever_flagged}};
  json segments = json::array();
  for (const auto& s : r.segments)
    segments.push_back(json{{"segment_id", s.segment_id}, {"flagged", s.flagged}, {"evaluated", s.evaluated}});
  return json{{"pairs", r.pairs},
              {"persistent", r.persistent},
              {"ever_flagged", r.ever_flagged},
              {"summary", r.summary()},
              {"by_group", std::move(groups)},
              {"segments", std::move(segments)}};
}

json to_json(const DetectionConfig& c) {
  return json{{"min_unstable_span", c.min_unstable_span},
              {"require_longer_than_truth", c.require_longer_than_truth},
              {"min_excess_tokens", c.min_excess_tokens},
              {"repetition_ngram_max", c.repetition_ngram_max},
              {"repetition_min_repeats", c.repetition_min_repeats},
              {"script_mismatch_threshold", c.script_mismatch_threshold},
              {"expected_script", text::to_string(c.expected_script)}};
}

DetectionConfig detection_config_from_json(const json& j) {
  DetectionConfig c;
  c.min_unstable_span = j.value("min_unstable_span", c.min_unstable_span);
  c.require_longer_than_truth = j.value("require_longer_than_truth", c.require_longer_than_truth);
  c.min_excess_tokens = j.value("min_excess_tokens", c.min_excess_tokens);
  c.repetition_ngram_max = j.value("repetition_ngram_max", c.repetition_ngram_max);
  c.repetition_min_repeats = j.value("repetition_min_repeats", c.repetition_min_repeats);
  c.script_mismatch_threshold = j.value("script_mismatch_threshold", c.script_mismatch_threshold);
  if (j.contains("expected_script")) c.expected_script = text::parse_script(j["expected_script"].get<std::string>());
  c.validate();
  return c;
}

CandidateStore::CandidateStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  jsonl::for_each(path_, [&](const json& event, std::size_t line) { apply(event, line); });
}

void CandidateStore::apply(const json& event, std::size_t line) {
  const auto type = event.value("event", std::string{});
  if (type == "created") {
    auto c = candidate_from_json(event.at("candidate"));
    auto id = c.candidate_id;
    candidates_.insert_or_assign(std::move(id), std::move(c));
  } else if (type == "status") {
    const auto id = event.at("candidate_id").get<std::string>();
    const auto it = candidates_.find(id);
    if (it == candidates_.end())
      throw Error(ErrorKind::validation, fmt::format("{}:{}: status for unknown candidate '{}'", path_.string(), line, id));
    it->second.status = parse_status(event.at("status").get<std::string>());
  } else {
    throw Error(ErrorKind::parse, fmt::format("{}:{}: unknown event '{}'", path_.string(), line, type));
  }
}

void CandidateStore::write_fresh(const std::filesystem::path& path, std::span<const HallucinationCandidate> candidates) {
  std::vector<json> events;
  events.reserve(candidates.size());
  for (const auto& c : candidates) events.push_back(json{{"event", "created"}, {"candidate", to_json(c)}});
  jsonl::write_all(path, events);
}

std::vector<HallucinationCandidate> CandidateStore::list(std::optional<CandidateStatus> status) const {
  std::lock_guard lock(mutex_);
  std::vector<HallucinationCandidate> out;
  for (const auto& [id, c] : candidates_)
    if (!status || c.status == *status) out.push_back(c);
  return out;
}

std::optional<HallucinationCandidate> CandidateStore::find(std::string_view candidate_id) const {
  std::lock_guard lock(mutex_);
  const auto it = candidates_.find(candidate_id);
  if (it == candidates_.end()) return std::nullopt;
  return it->second;
}

std::size_t CandidateStore::size() const {
  std::lock_guard lock(mutex_);
  return candidates_.size();
}

void CandidateStore::set_status(std::string_view candidate_id, CandidateStatus status, const std::string& at) {
  std::lock_guard lock(mutex_);
  const auto it = candidates_.find(candidate_id);
  if (it == candidates_.end())
    throw Error(ErrorKind::not_found, "unknown candidate '" + std::string(candidate_id) + "'");
  if (status == CandidateStatus::pending && it->second.status != CandidateStatus::pending)
    throw Error(ErrorKind::validation, "a labeled candidate cannot return to pending");
  if (it->second.status == status) return;
  jsonl::Appender(path_).append(
      json{{"event", "status"}, {"candidate_id", it->first}, {"status", to_string(status)}, {"at", at}});
  it->second.status = status;
}

}  // namespace hallaudit::detection
