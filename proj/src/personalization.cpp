#include "latentforge/personalization.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <system_error>

#include "latentforge/errors.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/random.hpp"

namespace latentforge {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPlaceholder = "{subject}";

template <typename T>
T field(const nlohmann::json& doc, const char* key, const char* what) {
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(what) + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json FinetuneJob::to_json() const {
  return {{"identity_id", identity_id},
          {"input_images", input_images},
          {"regularization_images", regularization_images},
          {"epochs", epochs},
          {"token", token},
          {"class_name", class_name},
          {"instance_prompt", identity_phrase()},
          {"train_text_encoder", train_text_encoder}};
}

FinetuneJob FinetuneJob::from_json(const nlohmann::json& doc) {
  FinetuneJob job;
  job.identity_id = field<std::string>(doc, "identity_id", "finetune job");
  job.input_images = field<std::vector<std::string>>(doc, "input_images", "finetune job");
  job.regularization_images = field<std::size_t>(doc, "regularization_images", "finetune job");
  job.epochs = field<std::size_t>(doc, "epochs", "finetune job");
  job.token = field<std::string>(doc, "token", "finetune job");
  job.class_name = field<std::string>(doc, "class_name", "finetune job");
  job.train_text_encoder = field<bool>(doc, "train_text_encoder", "finetune job");
  if (job.input_images.size() != kInputImages)
    throw InvariantError("finetune job '" + job.identity_id + "' lists " + std::to_string(job.input_images.size()) +
                         " input images, expected 6");
  if (job.token.empty()) throw InvariantError("finetune job token is empty");
  return job;
}

FinetuneJob make_finetune_job(const IdentityRecord& rec, const FinetuneConfig& cfg) {
  if (rec.variations.size() != FinetuneJob::kInputImages)
    throw InvariantError("identity '" + rec.identity_id + "' has " + std::to_string(rec.variations.size()) +
                         " variation images, expected 6");
  if (rec.status == IdentityStatus::planned)
    throw InvariantError("identity '" + rec.identity_id + "' has not been synthesized");
  if (cfg.token.empty()) throw InvariantError("finetune token must be nonempty");
  FinetuneJob job;
  job.identity_id = rec.identity_id;
  for (std::size_t i = 0; i < rec.variations.size(); ++i) job.input_images.push_back(rec.variation_image(i));
  job.regularization_images = cfg.regularization_images;
  job.epochs = cfg.epochs;
  job.token = cfg.token;
  job.class_name = cfg.class_name;
  job.train_text_encoder = cfg.train_text_encoder;
  return job;
}

FinetuneJob emit_finetune_job(const IdentityRecord& rec, const FinetuneConfig& cfg, const fs::path& dir) {
  FinetuneJob job = make_finetune_job(rec, cfg);
  write_file_atomic(dir / (rec.identity_id + ".json"), job.to_json().dump(2) + "\n");
  return job;
}

const char* to_string(PromptCategory c) {
  switch (c) {
    case PromptCategory::accessorization: return "accessorization";
    case PromptCategory::advanced_poses: return "advanced_poses";
    case PromptCategory::advanced_expressions: return "advanced_expressions";
    case PromptCategory::recontextualization: return "recontextualization";
  }
  return "accessorization";
}

PromptCategory parse_prompt_category(const std::string& s) {
  for (auto c : {PromptCategory::accessorization, PromptCategory::advanced_poses,
                 PromptCategory::advanced_expressions, PromptCategory::recontextualization})
    if (s == to_string(c)) return c;
  throw ConfigError("unknown prompt category '" + s + "'");
}

std::vector<PromptTemplate> default_prompt_templates() {
  using C = PromptCategory;
  return {
      {C::accessorization, "{subject} wearing scarf"},
      {C::accessorization, "{subject} wearing glasses"},
      {C::accessorization, "{subject} wearing a hat"},
      {C::accessorization, "{subject} wearing earrings"},
      {C::advanced_poses, "full body {subject} with accurate details of face in an indoor place"},
      {C::advanced_poses, "profile photo of {subject}"},
      {C::advanced_poses, "{subject} looking over the shoulder"},
      {C::advanced_poses, "{subject} looking up at the sky"},
      {C::advanced_expressions, "skeptical {subject}"},
      {C::advanced_expressions, "laughing {subject}"},
      {C::advanced_expressions, "surprised {subject}"},
      {C::advanced_expressions, "angry {subject}"},
      {C::recontextualization, "close photo of {subject} at the beach"},
      {C::recontextualization, "{subject} in a crowded street"},
      {C::recontextualization, "{subject} in a snowy forest"},
      {C::recontextualization, "{subject} sitting in an office"},
  };
}

std::vector<PromptSpec> build_prompt_bank(const std::vector<PromptTemplate>& templates, const std::string& token,
                                          const std::string& class_name, const std::string& negative_text) {
  if (token.empty()) throw ConfigError("prompt token must be nonempty");
  const std::string subject = token + " " + class_name;
  std::vector<PromptSpec> bank;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& t = templates[i];
    const auto at = t.text.find(kPlaceholder);
    if (at == std::string::npos) throw ConfigError("prompt template '" + t.text + "' has no {subject} placeholder");
    std::string text = t.text;
    for (auto pos = text.find(kPlaceholder); pos != std::string::npos; pos = text.find(kPlaceholder, pos + subject.size()))
      text.replace(pos, kPlaceholder.size(), subject);
    char id[16];
    std::snprintf(id, sizeof id, "p%02zu", i);
    bank.push_back({id, t.category, std::move(text), negative_text});
  }
  return bank;
}

nlohmann::json InferenceManifest::to_json() const {
  nlohmann::json prompt_list = nlohmann::json::array();
  for (const auto& p : prompts)
    prompt_list.push_back({{"prompt_id", p.prompt_id},
                           {"category", to_string(p.category)},
                           {"text", p.text},
                           {"negative_text", p.negative_text}});
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& e : expected)
    outputs.push_back({{"file", e.file_name}, {"prompt_id", e.prompt_id}, {"k", e.k}, {"seed", e.seed}});
  return {{"identity_id", identity_id}, {"samples_per_prompt", samples_per_prompt},
          {"output_dir", output_dir},   {"seed", seed},
          {"prompts", prompt_list},     {"expected_outputs", outputs}};
}

InferenceManifest InferenceManifest::from_json(const nlohmann::json& doc) {
  constexpr const char* what = "inference manifest";
  std::vector<PromptSpec> bank;
  for (const auto& p : field<nlohmann::json>(doc, "prompts", what))
    bank.push_back({field<std::string>(p, "prompt_id", what),
                    parse_prompt_category(field<std::string>(p, "category", what)),
                    field<std::string>(p, "text", what), field<std::string>(p, "negative_text", what)});
  auto m = make_inference_manifest(field<std::string>(doc, "identity_id", what), bank,
                                   field<std::size_t>(doc, "samples_per_prompt", what),
                                   field<std::uint64_t>(doc, "seed", what), field<std::string>(doc, "output_dir", what));
  if (m.to_json() != doc) throw FormatError("inference manifest: expected outputs disagree with prompts/seed");
  return m;
}

InferenceManifest make_inference_manifest(const std::string& identity_id, const std::vector<PromptSpec>& bank,
                                          std::size_t samples_per_prompt, std::uint64_t seed,
                                          const std::string& output_dir) {
  if (bank.empty()) throw InputError("inference manifest: empty prompt bank");
  if (samples_per_prompt == 0) throw InputError("inference manifest: samples_per_prompt must be >= 1");
  std::set<std::string> ids;
  for (const auto& p : bank)
    if (!ids.insert(p.prompt_id).second) throw InputError("duplicate prompt id '" + p.prompt_id + "'");
  InferenceManifest m;
  m.identity_id = identity_id;
  m.prompts = bank;
  m.samples_per_prompt = samples_per_prompt;
  m.output_dir = output_dir;
  m.seed = seed;
  std::uint64_t n = 0;
  for (const auto& p : bank)
    for (std::size_t k = 0; k < samples_per_prompt; ++k)
      m.expected.push_back({identity_id + "_" + p.prompt_id + "_" + std::to_string(k) + ".png", p.prompt_id, k,
                            mix_seed(seed, n++)});
  return m;
}

InferenceManifest emit_inference_manifest(const std::string& identity_id, const std::vector<PromptSpec>& bank,
                                          std::size_t samples_per_prompt, std::uint64_t seed, const fs::path& dir,
                                          const std::string& output_dir) {
  auto m = make_inference_manifest(identity_id, bank, samples_per_prompt, seed, output_dir);
  write_file_atomic(dir / (identity_id + ".json"), m.to_json().dump(2) + "\n");
  return m;
}

const char* to_string(Stage s) { return s == Stage::gan ? "gan" : "diffusion"; }

Stage parse_stage(const std::string& s) {
  if (s == "gan") return Stage::gan;
  if (s == "diffusion") return Stage::diffusion;
  throw FormatError("unknown stage '" + s + "'");
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pending: return "pending";
    case Verdict::kept: return "kept";
    case Verdict::dropped_detection: return "dropped_detection";
    case Verdict::dropped_identity: return "dropped_identity";
    case Verdict::dropped_gender: return "dropped_gender";
  }
  return "pending";
}

Verdict parse_verdict(const std::string& s) {
  for (auto v : {Verdict::pending, Verdict::kept, Verdict::dropped_detection, Verdict::dropped_identity,
                 Verdict::dropped_gender})
    if (s == to_string(v)) return v;
  throw FormatError("unknown verdict '" + s + "'");
}

IngestResult ingest_generated_samples(const InferenceManifest& manifest, const fs::path& dir) {
  std::error_code ec;
  std::set<std::string> present;
  fs::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot read " + dir.string() + ": " + ec.message());
  for (const auto& entry : it)
    if (entry.is_regular_file(ec)) present.insert(entry.path().filename().string());

  IngestResult out;
  out.report.expected = manifest.expected.size();
  std::set<std::string> listed;
  for (const auto& e : manifest.expected) {
    listed.insert(e.file_name);
    if (!present.count(e.file_name)) {
      out.report.missing.push_back(e.file_name);
      continue;
    }
    SampleRecord r;
    r.sample_id = e.file_name.substr(0, e.file_name.size() - 4);
    r.identity_id = manifest.identity_id;
    r.stage = Stage::diffusion;
    r.prompt_id = e.prompt_id;
    r.embedding_ref = r.sample_id;
    out.samples.push_back(std::move(r));
  }
  out.report.found = out.samples.size();
  for (const auto& f : present)
    if (!listed.count(f)) out.report.unexpected.push_back(f);
  return out;
}

}  // namespace latentforge
