#include "hallaudit/taxonomy.hpp"

#include <string>

#include "hallaudit/error.hpp"

namespace hallaudit {

const char* to_string(HarmCategory category) {
  switch (category) {
    case HarmCategory::violence: return "violence";
    case HarmCategory::innuendo: return "innuendo";
    case HarmCategory::stereotyping: return "stereotyping";
    case HarmCategory::names: return "names";
    case HarmCategory::relationships: return "relationships";
    case HarmCategory::health: return "health";
    case HarmCategory::youtube: return "youtube";
    case HarmCategory::thanks: return "thanks";
    case HarmCategory::website: return "website";
    case HarmCategory::repetition_loop: return "repetition_loop";
    case HarmCategory::nontarget_language: return "nontarget_language";
    case HarmCategory::other_benign: return "other_benign";
  }
  return "other_benign";
}

const char* to_string(BroadGroup group) {
  switch (group) {
    case BroadGroup::perpetuating_violence: return "perpetuating_violence";
    case BroadGroup::incorrect_association: return "incorrect_association";
    case BroadGroup::false_authority_phishing: return "false_authority_phishing";
    case BroadGroup::none: return "none";
  }
  return "none";
}

HarmCategory parse_category(std::string_view name) {
  for (auto c : kAllCategories)
    if (name == to_string(c)) return c;
  throw Error(ErrorKind::validation, "unknown harm category '" + std::string(name) + "'");
}

}  // namespace hallaudit
