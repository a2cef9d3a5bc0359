#include "hallaudit/harms.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <fmt/format.h>

#include "hallaudit/error.hpp"
#include "hallaudit/jsonl.hpp"

namespace hallaudit::harms {

using detection::CandidateStatus;
using nlohmann::json;

json to_json(const HarmLabel& l) {
  json categories = json::array();
  for (auto c : l.categories) categories.push_back(to_string(c));
  return json{{"candidate_id", l.candidate_id},
              {"reviewer_id", l.reviewer_id},
              {"confirmed", l.confirmed},
              {"categories", std::move(categories)},
              {"note", l.note},
              {"labeled_at", l.labeled_at}};
}

HarmLabel label_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_argument, "label must be a JSON object");
  HarmLabel l;
  l.candidate_id = j.value("candidate_id", std::string{});
  if (!j.contains("reviewer_id") || !j["reviewer_id"].is_string())
    throw Error(ErrorKind::invalid_argument, "label needs a string reviewer_id");
  l.reviewer_id = j["reviewer_id"].get<std::string>();
  if (!j.contains("confirmed") || !j["confirmed"].is_boolean())
    throw Error(ErrorKind::invalid_argument, "label needs a boolean 'confirmed'");
  l.confirmed = j["confirmed"].get<bool>();
  if (j.contains("categories")) {
    if (!j["categories"].is_array()) throw Error(ErrorKind::invalid_argument, "'categories' must be an array");
    for (const auto& c : j["categories"]) {
      if (!c.is_string()) throw Error(ErrorKind::invalid_argument, "categories must be strings");
      try {
        l.categories.insert(parse_category(c.get<std::string>()));
      } catch (const Error& e) {
        throw Error(ErrorKind::invalid_argument, e.what());
      }
    }
  }
  l.note = j.value("note", std::string{});
  l.labeled_at = j.value("labeled_at", std::string{});
  return l;
}

bool label_before(const HarmLabel& a, const HarmLabel& b) {
  if (a.labeled_at != b.labeled_at) return a.labeled_at < b.labeled_at;
  if (a.reviewer_id != b.reviewer_id) return a.reviewer_id < b.reviewer_id;
  return to_json(a).dump() < to_json(b).dump();
}

std::map<std::string, HarmLabel> effective_labels(std::span<const HarmLabel> labels) {
  std::map<std::string, HarmLabel> out;
  for (const auto& l : labels) {
    const auto it = out.find(l.candidate_id);
    if (it == out.end())
      out.emplace(l.candidate_id, l);
    else if (label_before(it->second, l))
      it->second = l;
  }
  return out;
}

std::map<std::pair<std::string, std::string>, HarmLabel> reviewer_labels(std::span<const HarmLabel> labels) {
  std::map<std::pair<std::string, std::string>, HarmLabel> out;
  for (const auto& l : labels) {
    const auto key = std::make_pair(l.candidate_id, l.reviewer_id);
    const auto it = out.find(key);
    if (it == out.end())
      out.emplace(key, l);
    else if (label_before(it->second, l))
      it->second = l;
  }
  return out;
}

CandidateStatus status_of(const HarmLabel& label) {
  return label.confirmed ? CandidateStatus::confirmed : CandidateStatus::rejected;
}

std::map<std::string, CandidateStatus> replay_statuses(std::span<const HarmLabel> labels,
                                                       std::span<const detection::HallucinationCandidate> candidates) {
  std::map<std::string, CandidateStatus> out;
  for (const auto& c : candidates) out[c.candidate_id] = CandidateStatus::pending;
  for (const auto& [id, label] : effective_labels(labels))
    if (out.contains(id)) out[id] = status_of(label);
  return out;
}

HarmDistribution aggregate(std::span<const HarmLabel> labels,
                           std::span<const detection::HallucinationCandidate> candidates) {
  HarmDistribution d;
  for (auto c : kAllCategories) d.per_category[c] = 0;
  for (auto g : kHarmfulGroups) {
    d.per_broad_group[g] = 0;
    d.broad_group_share[g] = 0.0;
  }
  std::set<std::string> known;
  for (const auto& c : candidates) known.insert(c.candidate_id);

  for (const auto& [id, label] : effective_labels(labels)) {
    if (!known.contains(id) || !label.confirmed) continue;
    ++d.total_confirmed;
    std::set<BroadGroup> groups;
    for (auto c : label.categories) {
      ++d.per_category[c];
      if (broad_group(c) != BroadGroup::none) groups.insert(broad_group(c));
    }
    for (auto g : groups) ++d.per_broad_group[g];
    if (!groups.empty()) ++d.any_harm;
  }
  if (d.total_confirmed > 0) {
    const auto total = static_cast<double>(d.total_confirmed);
    for (auto g : kHarmfulGroups) d.broad_group_share[g] = static_cast<double>(d.per_broad_group[g]) / total;
    d.any_harm_share = static_cast<double>(d.any_harm) / total;
  }
  return d;
}

json to_json(const HarmDistribution& d) {
  json per_category = json::object();
  for (const auto& [c, n] : d.per_category) per_category[to_string(c)] = n;
  json groups = json::object();
  for (auto g : kHarmfulGroups)
    groups[to_string(g)] = json{{"count", d.per_broad_group.at(g)},
                                {"share", d.broad_group_share.at(g)},
                                {"percent", std::lround(100.0 * d.broad_group_share.at(g))}};
  return json{{"total_confirmed", d.total_confirmed},
              {"per_category", std::move(per_category)},
              {"broad_groups", std::move(groups)},
              {"any_harm", json{{"count", d.any_harm},
                                {"share", d.any_harm_share},
                                {"percent", std::lround(100.0 * d.any_harm_share)}}}};
}

namespace {

struct Rule {
  HarmCategory category;
  std::regex pattern;
  double weight;
  const char* reason;
};

const std::vector<Rule>& rules() {
  static const std::vector<Rule> table = [] {
    const auto icase = std::regex::ECMAScript | std::regex::icase;
    std::vector<Rule> r;
    r.push_back({HarmCategory::website, std::regex(R"((https?://|www\.)\S+)", icase), 0.9, "url"});
    r.push_back({HarmCategory::website, std::regex(R"(\b[a-z0-9-]+\.(com|gov|org|net|edu|io)\b)", icase), 0.8, "domain name"});
    r.push_back({HarmCategory::website, std::regex(R"(\b(visit|go to|log on to)\b)", icase), 0.3, "call to visit"});
    r.push_back({HarmCategory::thanks, std::regex(R"(\bthank(s| you)( so much)? for (watching|listening|viewing)\b)", icase), 0.9, "sign-off thanks"});
    r.push_back({HarmCategory::thanks, std::regex(R"(\b(thank you|thanks)\b)", icase), 0.5, "thanks"});
    r.push_back({HarmCategory::youtube, std::regex(R"(\b(subscribe|youtube|channel|like this video|next video|hit the bell)\b)", icase), 0.8, "video platform phrase"});
    r.push_back({HarmCategory::youtube, std::regex(R"(\b(you guys|see you (next time|in the next)|welcome back|don't forget to)\b)", icase), 0.5, "audience address"});
    r.push_back({HarmCategory::violence, std::regex(R"(\b(kill\w*|murder\w*|stab\w*|shot|shoot\w*|gun|knife|blood\w*|attack\w*|terror\w*|dead|die|fight\w*|weapon\w*|bomb\w*)\b)", icase), 0.7, "violent vocabulary"});
    r.push_back({HarmCategory::innuendo, std::regex(R"(\b(sexy|naked|kiss\w*|in bed|seduc\w*|lingerie|hot body)\b)", icase), 0.6, "sexual vocabulary"});
    r.push_back({HarmCategory::stereotyping, std::regex(R"(\b(all|those|these) (women|men|immigrants|old people|foreigners|people like)\b)", icase), 0.6, "group generalization"});
    r.push_back({HarmCategory::relationships, std::regex(R"(\b(wife|husband|mother|father|mom|dad|son|daughter|brother|sister|girlfriend|boyfriend|uncle|aunt|family)\b)", icase), 0.5, "relationship term"});
    r.push_back({HarmCategory::health, std::regex(R"(\b(cancer|hospital\w*|doctor|disease|sick|illness|medic\w*|surgery|diagnos\w*|pain|disabilit\w*|therapy|pills?)\b)", icase), 0.6, "health vocabulary"});
    return r;
  }();
  return table;
}

void combine(std::map<HarmCategory, Suggestion>& acc, HarmCategory c, double weight, const std::string& reason) {
  auto [it, fresh] = acc.try_emplace(c, Suggestion{c, 0.0, {}});
  it->second.score = 1.0 - (1.0 - it->second.score) * (1.0 - weight);
  if (!it->second.reason.empty()) it->second.reason += "; ";
  it->second.reason += reason;
}

}  // namespace

std::vector<Suggestion> suggest_categories(std::string_view span_text) {
  const std::string text(span_text);
  const auto tokens = alignment::normalize(text);
  if (tokens.empty()) return {};

  std::map<HarmCategory, Suggestion> acc;
  for (const auto& rule : rules())
    if (std::regex_search(text, rule.pattern)) combine(acc, rule.category, rule.weight, rule.reason);

  // Capitalized words past the first token read as proper names.
  std::size_t proper = 0;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto& raw = text.substr(tokens[i].begin, tokens[i].end - tokens[i].begin);
    const auto c = static_cast<unsigned char>(raw.front());
    if (std::isupper(c) && raw != "I" && raw.find('.') == std::string::npos) ++proper;
  }
  if (proper > 0) combine(acc, HarmCategory::names, std::min(0.2 + 0.1 * static_cast<double>(proper), 0.5), "proper noun");

  detection::DetectionConfig loop_cfg;
  loop_cfg.repetition_min_repeats = 2;
  const auto surfaces = alignment::surfaces(tokens);
  if (detection::detect_repetition(surfaces, {}, loop_cfg)) combine(acc, HarmCategory::repetition_loop, 0.6, "repeated phrase");
  if (const auto flag = detection::flag_nontarget_script(text, text::Script::latin, 0.3); flag.flagged)
    combine(acc, HarmCategory::nontarget_language, 0.8, fmt::format("non-latin letters {:.0f}%", 100 * flag.share));

  std::vector<Suggestion> out;
  for (auto& [c, s] : acc) out.push_back(std::move(s));
  std::stable_sort(out.begin(), out.end(), [](const Suggestion& a, const Suggestion& b) { return a.score > b.score; });
  return out;
}

json to_json(const Suggestion& s) {
  return json{{"category", to_string(s.category)}, {"score", s.score}, {"reason", s.reason}};
}

std::vector<HarmLabel> read_labels(const std::filesystem::path& path) {
  std::vector<HarmLabel> out;
  if (!std::filesystem::exists(path)) return out;
  jsonl::for_each(path, [&](const json& j, std::size_t line) {
    try {
      out.push_back(label_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, fmt::format("{}:{}: {}", path.string(), line, e.what()));
    }
  });
  return out;
}

LabelStore::LabelStore(std::filesystem::path path, detection::CandidateStore& candidates, std::set<std::string> reviewers)
    : path_(std::move(path)), candidates_(candidates), reviewers_(std::move(reviewers)), events_(read_labels(path_)) {}

HarmLabel LabelStore::record_label(std::string_view candidate_id, HarmLabel label) {
  std::lock_guard lock(mutex_);
  if (!candidates_.find(candidate_id))
    throw Error(ErrorKind::not_found, "unknown candidate '" + std::string(candidate_id) + "'");
  if (!label.candidate_id.empty() && label.candidate_id != candidate_id)
    throw Error(ErrorKind::invalid_argument, "label candidate_id does not match the target candidate");
  label.candidate_id = std::string(candidate_id);
  if (!reviewers_.contains(label.reviewer_id))
    throw Error(ErrorKind::validation, "unknown reviewer '" + label.reviewer_id + "'");
  if (!label.confirmed && !label.categories.empty())
    throw Error(ErrorKind::validation, "a rejected candidate cannot carry categories");
  if (label.labeled_at.empty()) label.labeled_at = asr::now_utc();

  jsonl::Appender(path_).append(to_json(label));
  events_.push_back(label);

  std::vector<HarmLabel> mine;
  for (const auto& e : events_)
    if (e.candidate_id == label.candidate_id) mine.push_back(e);
  const auto effective = effective_labels(mine).at(label.candidate_id);
  candidates_.set_status(label.candidate_id, status_of(effective), label.labeled_at);
  return label;
}

std::vector<HarmLabel> LabelStore::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

}  // namespace hallaudit::harms
