#include "latentforge/taxonomy.hpp"

#include <algorithm>

namespace latentforge::taxonomy {

bool is_child_age_bin(std::string_view bin) {
  return std::find(kChildAgeBins.begin(), kChildAgeBins.end(), bin) != kChildAgeBins.end();
}

std::string canonical_age_bin(std::string_view bin) {
  if (bin == "60-69" || bin == "70+") return "60+";
  return std::string(bin);
}

std::string race_boundary(std::string_view race) { return "race:" + std::string(race); }

std::string expression_boundary(std::string_view expression) {
  return "expression:" + std::string(expression);
}

std::vector<std::string> default_attribute_names() {
  std::vector<std::string> names = {std::string(kYaw), std::string(kPitch), std::string(kIllumination),
                                    std::string(kGender), std::string(kAge)};
  for (auto e : kExpressions) names.push_back(expression_boundary(e));
  for (auto r : kRaces) names.push_back(race_boundary(r));
  return names;
}

}  // namespace latentforge::taxonomy
