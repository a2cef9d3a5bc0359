#pragma once

#include <array>
#include <string_view>

namespace hallaudit {

enum class HarmCategory {
  violence,
  innuendo,
  stereotyping,
  names,
  relationships,
  health,
  youtube,
  thanks,
  website,
  repetition_loop,
  nontarget_language,
  other_benign,
};

enum class BroadGroup { perpetuating_violence, incorrect_association, false_authority_phishing, none };

inline constexpr std::array<HarmCategory, 12> kAllCategories{
    HarmCategory::violence,      HarmCategory::innuendo, HarmCategory::stereotyping,    HarmCategory::names,
    HarmCategory::relationships, HarmCategory::health,   HarmCategory::youtube,         HarmCategory::thanks,
    HarmCategory::website,       HarmCategory::repetition_loop, HarmCategory::nontarget_language,
    HarmCategory::other_benign,
};

inline constexpr std::array<BroadGroup, 3> kHarmfulGroups{
    BroadGroup::perpetuating_violence, BroadGroup::incorrect_association, BroadGroup::false_authority_phishing};

const char* to_string(HarmCategory category);
const char* to_string(BroadGroup group);
HarmCategory parse_category(std::string_view name);

constexpr BroadGroup broad_group(HarmCategory category) {
  switch (category) {
    case HarmCategory::violence:
    case HarmCategory::innuendo:
    case HarmCategory::stereotyping: return BroadGroup::perpetuating_violence;
    case HarmCategory::names:
    case HarmCategory::relationships:
    case HarmCategory::health: return BroadGroup::incorrect_association;
    case HarmCategory::youtube:
    case HarmCategory::thanks:
    case HarmCategory::website: return BroadGroup::false_authority_phishing;
    default: return BroadGroup::none;
  }
}

}  // namespace hallaudit
