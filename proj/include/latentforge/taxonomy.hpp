#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

// Label vocabularies shared by the labeler outputs, the group planner and the
// boundary names.
namespace latentforge::taxonomy {

inline constexpr std::array<std::string_view, 7> kRaces = {
    "White", "Black", "Latino_Hispanic", "Southeast_Asian", "East_Asian", "Middle_Eastern", "Indian"};

inline constexpr std::array<std::string_view, 2> kGenders = {"Male", "Female"};

inline constexpr std::string_view kNeutral = "neutral";
inline constexpr std::array<std::string_view, 6> kExpressions = {"happy",   "sad",   "surprise",
                                                                 "disgust", "anger", "contempt"};

// Five adult intervals; the labeler's 60-69 and 70+ bins both map to "60+".
inline constexpr std::array<std::string_view, 5> kAdultAgeBins = {"20-29", "30-39", "40-49", "50-59",
                                                                  "60+"};
inline constexpr std::array<std::string_view, 3> kChildAgeBins = {"0-2", "3-9", "10-19"};

bool is_child_age_bin(std::string_view bin);

/// Maps labeler age bins onto the planner's adult bins ("60-69"/"70+" -> "60+").
std::string canonical_age_bin(std::string_view bin);

// Boundary naming. Scalar attributes use their bare name.
inline constexpr std::string_view kYaw = "yaw";
inline constexpr std::string_view kPitch = "pitch";
inline constexpr std::string_view kIllumination = "illumination";
inline constexpr std::string_view kGender = "gender";
inline constexpr std::string_view kAge = "age";

std::string race_boundary(std::string_view race);
std::string expression_boundary(std::string_view expression);

/// yaw, pitch, illumination, gender, age, 6 expressions, 7 races.
std::vector<std::string> default_attribute_names();

template <std::size_t N>
std::vector<std::string> to_strings(const std::array<std::string_view, N>& names) {
  return {names.begin(), names.end()};
}

}  // namespace latentforge::taxonomy
