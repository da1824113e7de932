#pragma once

#include <optional>
#include <string>

namespace latentforge {

enum class Stage { gan, diffusion };

const char* to_string(Stage s);
Stage parse_stage(const std::string& s);

enum class Verdict { pending, kept, dropped_detection, dropped_identity, dropped_gender };

const char* to_string(Verdict v);
Verdict parse_verdict(const std::string& s);

struct SampleRecord {
  std::string sample_id;
  std::string identity_id;
  Stage stage = Stage::diffusion;
  std::string prompt_id;  // diffusion only
  std::string embedding_ref;
  bool detected_face = false;
  std::string gender_label;
  std::optional<double> ip_score;
  Verdict verdict = Verdict::pending;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

}  // namespace latentforge
