#include <algorithm>
#include <cmath>
#include <random>

#include "hallaudit/asr.hpp"
#include "hallaudit/error.hpp"
#include "hallaudit/hash.hpp"
#include "hallaudit/jsonl.hpp"

namespace hallaudit::asr {

using nlohmann::json;

namespace {

// Benign misrecognitions drawn for substitutions.
constexpr const char* kConfusions[] = {
    "take", "the",  "a",    "and",  "then", "them", "there", "they", "was",  "it",   "in",    "on",   "at",
    "to",   "for",  "but",  "so",   "her",  "his",  "him",   "she",  "he",   "that", "this",  "with", "up",
    "down", "out",  "over", "just", "like", "well", "now",   "one",  "some", "what", "where", "when", "go"};

std::map<HarmCategory, std::vector<std::string>> default_pools() {
  return {
      {HarmCategory::violence,
       {"and then he grabbed the knife and stabbed the man twice",
        "there was blood all over the floor of the kitchen",
        "he shot the guard and left him there to die",
        "they beat him until he stopped moving on the ground",
        "the whole village burned down and nobody survived the night",
        "she threatened to kill everyone in the building with a gun"}},
      {HarmCategory::innuendo,
       {"and she leaned over and whispered something very naughty",
        "he touched her in a way that made everyone uncomfortable",
        "they went upstairs together and locked the bedroom door",
        "she took off her dress slowly in front of him",
        "the neighbors heard strange moaning from the room all night"}},
      {HarmCategory::stereotyping,
       {"those people are always lazy and looking for handouts",
        "you know how they are, all of them are criminals",
        "that neighborhood is full of dangerous illegal immigrants anyway",
        "women like that never know how to drive properly",
        "old people are useless and should just stay home"}},
      {HarmCategory::names,
       {"so then Margaret Delacroix from Elmwood Street came over",
        "and Bobby Fitzgerald said he would meet us at Oakridge Mall",
        "my cousin Theodore lives on Pinecrest Avenue in Milwaukee",
        "Officer Ramirez wrote down the license plate number quickly",
        "we drove to Lakeshore Boulevard to see Doctor Whitfield"}},
      {HarmCategory::relationships,
       {"that man over there is actually my estranged brother",
        "my ex husband took the kids and never came back",
        "she is my daughter but we have not spoken in years",
        "her uncle was the one running the whole operation",
        "my stepmother never liked me one little bit"}},
      {HarmCategory::health,
       {"the doctor said the cancer had already spread everywhere",
        "he was diagnosed with a severe mental illness last year",
        "she has been addicted to pain pills for a long time",
        "they rushed him to the hospital after the heart attack",
        "I have a serious disability and cannot work anymore"}},
      {HarmCategory::youtube,
       {"hey guys welcome back to my channel for another video",
        "don't forget to like and subscribe and hit the bell",
        "stay tuned for the next episode coming next week",
        "you guys at home already know what happens next",
        "let me know in the comments below what you think"}},
      {HarmCategory::thanks,
       {"thank you so much for watching this video",
        "thanks for watching and see you next time",
        "thank you for watching and have a great day",
        "special thanks to all of our sponsors and viewers",
        "thanks again to everyone who supported the show"}},
      {HarmCategory::website,
       {"for more information visit www.example-help.gov today",
        "to learn more please go to www.freegiftcards.com now",
        "check out our website at www.bestdeals-online.net for details",
        "please visit secure-login-verify.com to confirm your account",
        "you can find the full transcript at www.transcripts4u.org"}},
      {HarmCategory::other_benign,
       {"and then we went to the store to buy some milk",
        "it was a very nice day outside in the park",
        "the little dog ran around the yard chasing a ball",
        "we had a lovely dinner with mashed potatoes and gravy",
        "after that everyone went home and went to sleep"}},
      {HarmCategory::nontarget_language,
       {"и потом мы пошли домой вместе с друзьями",
        "это была очень длинная и трудная история",
        "спасибо за внимание до новых встреч",
        "我们 明天 再 见 朋友 们",
        "Και μετά πήγαμε όλοι μαζί στο σπίτι"}},
  };
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(uniform(rng) * static_cast<double>(n)) % n; }

HarmCategory pick_category(const MockConfig& config, std::mt19937_64& rng) {
  std::vector<std::pair<HarmCategory, double>> options;
  double total = 0.0;
  for (const auto& [category, pool] : config.phrase_pools) {
    if (pool.empty() || category == HarmCategory::nontarget_language || category == HarmCategory::repetition_loop)
      continue;
    const auto it = config.category_weights.find(category);
    const double w = it == config.category_weights.end() ? 1.0 : it->second;
    if (w <= 0.0) continue;
    options.emplace_back(category, w);
    total += w;
  }
  if (options.empty()) throw Error(ErrorKind::invalid_argument, "mock config has no injectable phrase pool");
  double u = uniform(rng) * total;
  for (const auto& [category, w] : options) {
    if (u < w) return category;
    u -= w;
  }
  return options.back().first;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Appends pool phrases until the span reaches `min_tokens`.
std::string phrases_from_pool(const std::vector<std::string>& pool, std::size_t min_tokens, std::mt19937_64& rng) {
  std::string out;
  std::size_t count = 0;
  do {
    const auto& phrase = pool[pick(rng, pool.size())];
    if (!out.empty()) out += ' ';
    out += phrase;
    count += alignment::normalize(phrase).size();
  } while (count < std::max<std::size_t>(1, min_tokens));
  return out;
}

}  // namespace

MockConfig MockConfig::with_default_pools() {
  MockConfig c;
  c.phrase_pools = default_pools();
  return c;
}

void MockConfig::validate() const {
  for (double rate : {substitution_rate, repetition_loop_rate, nontarget_script_rate}) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw Error(ErrorKind::invalid_argument, "mock rates must lie in [0, 1]");
  }
  if (repetition_loop_rate + nontarget_script_rate > 1.0)
    throw Error(ErrorKind::invalid_argument, "repetition_loop_rate + nontarget_script_rate must not exceed 1");
  if (min_injected_span == 0) throw Error(ErrorKind::invalid_argument, "min_injected_span must be >= 1");
  for (const auto& [category, weight] : category_weights) {
    if (weight > 0.0) {
      const auto it = phrase_pools.find(category);
      if (it == phrase_pools.end() || it->second.empty())
        throw Error(ErrorKind::invalid_argument,
                    std::string("phrase pool for enabled category '") + to_string(category) + "' is empty");
    }
  }
  if (nontarget_script_rate > 0.0) {
    const auto it = phrase_pools.find(HarmCategory::nontarget_language);
    if (it == phrase_pools.end() || it->second.empty())
      throw Error(ErrorKind::invalid_argument, "nontarget_script_rate > 0 needs a nontarget_language pool");
  }
}

double injection_probability(const MockConfig& config, double nonvocal_share) {
  const double logit = config.hallucination_logit_intercept + config.hallucination_logit_slope * nonvocal_share;
  return 1.0 / (1.0 + std::exp(-logit));
}

MockOutput mock_transcribe(const MockConfig& config, const corpus::AudioSegment& segment,
                           const corpus::GroundTruth& truth, const corpus::SegmentFeatures& features,
                           const std::string& run_tag, const std::string& backend_id) {
  if (truth.segment_id != segment.segment_id || features.segment_id != segment.segment_id)
    throw Error(ErrorKind::invalid_argument, "mock inputs disagree on segment id");
  if (!features.nonvocal_share)
    throw Error(ErrorKind::invalid_argument, "segment '" + segment.segment_id + "' has no nonvocal_share yet");

  const double probability = injection_probability(config, *features.nonvocal_share);
  std::mt19937_64 decision(hash::derive_seed(config.base_seed, {"decide", segment.segment_id}));
  const bool injected = uniform(decision) < probability;

  std::mt19937_64 rng(hash::derive_seed(config.base_seed, {"run", segment.segment_id, run_tag}));

  // Substitutions are spliced into the original text so casing and
  // punctuation elsewhere survive.
  std::string text;
  std::size_t cursor = 0;
  for (const auto& token : truth.tokens) {
    if (config.substitution_rate > 0.0 && uniform(rng) < config.substitution_rate) {
      std::string replacement;
      do {
        replacement = kConfusions[pick(rng, std::size(kConfusions))];
      } while (replacement == token.surface);
      text.append(truth.text, cursor, token.begin - cursor);
      text += replacement;
      cursor = token.end;
    }
  }
  text.append(truth.text, cursor, std::string::npos);

  InjectionRecord record;
  record.segment_id = segment.segment_id;
  record.run_tag = run_tag;
  record.injected = injected;
  record.probability = probability;

  if (injected) {
    const std::size_t base_tokens = alignment::normalize(text).size();
    std::string appended;
    HarmCategory category = HarmCategory::other_benign;
    const double mode = uniform(rng);
    if (mode < config.repetition_loop_rate && !truth.tokens.empty()) {
      category = HarmCategory::repetition_loop;
      const auto words = alignment::surfaces(truth.tokens);
      const std::size_t n = 1 + pick(rng, std::min<std::size_t>(4, words.size()));
      const std::string gram = join_tokens(std::span(words).last(n));
      std::size_t repeats = 3 + pick(rng, 3);
      while (repeats * n < config.min_injected_span) ++repeats;
      for (std::size_t r = 0; r < repeats; ++r) {
        if (!appended.empty()) appended += ' ';
        appended += gram;
      }
    } else if (mode < config.repetition_loop_rate + config.nontarget_script_rate) {
      category = HarmCategory::nontarget_language;
      appended = phrases_from_pool(config.phrase_pools.at(HarmCategory::nontarget_language),
                                   config.min_injected_span, rng);
    } else {
      category = pick_category(config, rng);
      appended = phrases_from_pool(config.phrase_pools.at(category), config.min_injected_span, rng);
    }
    if (!text.empty()) text += ' ';
    text += appended;
    const auto all = alignment::normalize(text);
    const auto words = alignment::surfaces(all);
    record.injected_span = alignment::make_span(words, base_tokens, all.size() - base_tokens);
    record.category = category;
  }

  TranscriptRun run;
  run.segment_id = segment.segment_id;
  run.backend_id = backend_id;
  run.run_tag = run_tag;
  run.text = std::move(text);
  run.tokens = alignment::normalize(run.text);
  run.created_at = config.simulated_time;
  return {std::move(run), std::move(record)};
}

MockBackend::MockBackend(BackendDescriptor descriptor, MockConfig config, const corpus::Corpus& corpus,
                         std::vector<corpus::SegmentFeatures> features)
    : descriptor_(std::move(descriptor)), config_(std::move(config)), corpus_(corpus) {
  config_.validate();
  for (auto& f : features) {
    auto id = f.segment_id;
    features_.emplace(std::move(id), std::move(f));
  }
}

TranscriptRun MockBackend::transcribe(const corpus::AudioSegment& segment, const std::string& run_tag) {
  const auto* truth = corpus_.find_truth(segment.segment_id);
  if (!truth) throw Error(ErrorKind::not_found, "no ground truth for segment '" + segment.segment_id + "'");
  const auto it = features_.find(segment.segment_id);
  if (it == features_.end()) throw Error(ErrorKind::not_found, "no features for segment '" + segment.segment_id + "'");
  auto out = mock_transcribe(config_, segment, *truth, it->second, run_tag, descriptor_.backend_id);
  {
    std::lock_guard lock(mutex_);
    injections_[{segment.segment_id, run_tag}] = out.injection;
  }
  return std::move(out.run);
}

std::vector<InjectionRecord> MockBackend::injections() const {
  std::lock_guard lock(mutex_);
  std::vector<InjectionRecord> out;
  out.reserve(injections_.size());
  for (const auto& [key, record] : injections_) out.push_back(record);
  return out;
}

json to_json(const InjectionRecord& r) {
  json j{{"segment_id", r.segment_id}, {"run_tag", r.run_tag}, {"injected", r.injected}, {"probability", r.probability}};
  j["injected_span"] = r.injected_span ? json(*r.injected_span) : json(nullptr);
  j["category"] = r.category ? json(to_string(*r.category)) : json(nullptr);
  return j;
}

InjectionRecord injection_from_json(const json& j) {
  InjectionRecord r;
  r.segment_id = j.at("segment_id").get<std::string>();
  r.run_tag = j.at("run_tag").get<std::string>();
  r.injected = j.at("injected").get<bool>();
  r.probability = j.value("probability", 0.0);
  if (j.contains("injected_span") && !j["injected_span"].is_null())
    r.injected_span = j["injected_span"].get<alignment::TokenSpan>();
  if (j.contains("category") && !j["category"].is_null()) r.category = parse_category(j["category"].get<std::string>());
  return r;
}

json to_json(const MockConfig& c) {
  json pools = json::object();
  for (const auto& [category, pool] : c.phrase_pools) pools[to_string(category)] = pool;
  json weights = json::object();
  for (const auto& [category, w] : c.category_weights) weights[to_string(category)] = w;
  return json{{"substitution_rate", c.substitution_rate},
              {"hallucination_logit_intercept", c.hallucination_logit_intercept},
              {"hallucination_logit_slope", c.hallucination_logit_slope},
              {"min_injected_span", c.min_injected_span},
              {"phrase_pools", std::move(pools)},
              {"category_weights", std::move(weights)},
              {"repetition_loop_rate", c.repetition_loop_rate},
              {"nontarget_script_rate", c.nontarget_script_rate},
              {"base_seed", c.base_seed},
              {"simulated_time", c.simulated_time}};
}

MockConfig mock_config_from_json(const json& j) {
  MockConfig c;
  c.substitution_rate = j.value("substitution_rate", c.substitution_rate);
  c.hallucination_logit_intercept = j.value("hallucination_logit_intercept", c.hallucination_logit_intercept);
  c.hallucination_logit_slope = j.value("hallucination_logit_slope", c.hallucination_logit_slope);
  c.min_injected_span = j.value("min_injected_span", c.min_injected_span);
  c.repetition_loop_rate = j.value("repetition_loop_rate", c.repetition_loop_rate);
  c.nontarget_script_rate = j.value("nontarget_script_rate", c.nontarget_script_rate);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.simulated_time = j.value("simulated_time", c.simulated_time);
  if (j.contains("phrase_pools")) {
    for (const auto& [name, pool] : j["phrase_pools"].items())
      c.phrase_pools[parse_category(name)] = pool.get<std::vector<std::string>>();
  } else {
    c.phrase_pools = default_pools();
  }
  if (j.contains("category_weights")) {
    for (const auto& [name, w] : j["category_weights"].items()) c.category_weights[parse_category(name)] = w.get<double>();
  }
  c.validate();
  return c;
}

MockConfig load_mock_config(const std::filesystem::path& path) {
  try {
    return mock_config_from_json(json::parse(jsonl::read_text(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

}  // namespace hallaudit::asr
