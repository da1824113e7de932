#include "latentforge/curation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "latentforge/errors.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/latv.hpp"

namespace latentforge {

namespace fs = std::filesystem;

void FilterConfig::validate() const {
  if (!(t_ip > -1.0 && t_ip < 1.0)) throw ConfigError("t_ip must be in (-1, 1)");
}

double identity_preservation_score(const EmbeddingVector& sample, std::span<const EmbeddingVector> gan_embeddings,
                                   Stage stage) {
  if (stage != Stage::diffusion)
    throw InvariantError("identity preservation is only scored across domains; got a gan-stage sample");
  if (gan_embeddings.size() != kGanReferenceImages)
    throw InvariantError("identity preservation needs 6 GAN references, got " +
                         std::to_string(gan_embeddings.size()));
  double sum = 0.0;
  for (const auto& g : gan_embeddings) sum += cosine_similarity(sample, g);
  return sum / double(kGanReferenceImages);
}

void detection_gate(std::vector<SampleRecord>& samples, const std::map<std::string, int>& face_counts) {
  for (auto& s : samples) {
    if (s.verdict != Verdict::pending) continue;
    const auto it = face_counts.find(s.sample_id);
    const int faces = it == face_counts.end() ? 0 : it->second;
    if (faces >= 1)
      s.detected_face = true;
    else
      s.verdict = Verdict::dropped_detection;
  }
}

const std::string& GanReference::gender() const {
  if (genders.empty()) throw ConfigError("GAN reference has no gender label");
  for (const auto& g : genders)
    if (g != genders.front()) throw ConfigError("GAN reference gender labels disagree ('" + genders.front() + "' vs '" + g + "')");
  return genders.front();
}

IdentityFilterCounts FilterReport::totals() const {
  IdentityFilterCounts t;
  for (const auto& [id, c] : per_identity) {
    t.total += c.total;
    t.dropped_detection += c.dropped_detection;
    t.dropped_identity += c.dropped_identity;
    t.dropped_gender += c.dropped_gender;
    t.kept += c.kept;
  }
  return t;
}

nlohmann::json FilterReport::to_json() const {
  const auto t = totals();
  nlohmann::json survivors = nlohmann::json::object();
  nlohmann::json per_id = nlohmann::json::object();
  for (const auto& [id, c] : per_identity) {
    survivors[id] = c.kept;
    per_id[id] = {{"total", c.total},
                  {"dropped_detection", c.dropped_detection},
                  {"dropped_identity", c.dropped_identity},
                  {"dropped_gender", c.dropped_gender},
                  {"kept", c.kept}};
  }
  return {{"t_ip", t_ip},
          {"per_stage_drops",
           {{"detection", t.dropped_detection}, {"identity", t.dropped_identity}, {"gender", t.dropped_gender}}},
          {"total", t.total},
          {"kept", t.kept},
          {"per_identity_survivors", survivors},
          {"per_identity", per_id}};
}

FilterReport apply_filters(std::vector<SampleRecord>& samples, const FilterInputs& inputs, const FilterConfig& cfg) {
  cfg.validate();

  // Validate references up front so a bad identity fails before any verdict changes.
  std::set<std::string> identities;
  for (const auto& s : samples) identities.insert(s.identity_id);
  for (const auto& id : identities) {
    const auto it = inputs.gan.find(id);
    if (it == inputs.gan.end() || it->second.embeddings.size() != kGanReferenceImages)
      throw ConfigError("identity '" + id + "' has no complete set of 6 GAN embeddings");
    it->second.gender();
  }

  detection_gate(samples, inputs.face_counts);

  for (auto& s : samples) {
    if (s.verdict != Verdict::pending) continue;
    const auto& ref = inputs.gan.at(s.identity_id);
    const auto emb = inputs.embeddings.find(s.embedding_ref);
    if (emb == inputs.embeddings.end()) throw DataError("no embedding for sample '" + s.sample_id + "'");
    s.ip_score = identity_preservation_score(emb->second, ref.embeddings, s.stage);
    if (*s.ip_score < cfg.t_ip) s.verdict = Verdict::dropped_identity;
  }

  for (auto& s : samples) {
    if (s.verdict != Verdict::pending) continue;
    const auto label = inputs.gender_labels.find(s.sample_id);
    if (label == inputs.gender_labels.end()) throw DataError("no gender label for sample '" + s.sample_id + "'");
    s.gender_label = label->second;
    s.verdict = label->second == inputs.gan.at(s.identity_id).gender() ? Verdict::kept : Verdict::dropped_gender;
  }

  FilterReport report;
  report.t_ip = cfg.t_ip;
  for (const auto& s : samples) {
    auto& c = report.per_identity[s.identity_id];
    ++c.total;
    switch (s.verdict) {
      case Verdict::kept: ++c.kept; break;
      case Verdict::dropped_detection: ++c.dropped_detection; break;
      case Verdict::dropped_identity: ++c.dropped_identity; break;
      case Verdict::dropped_gender: ++c.dropped_gender; break;
      case Verdict::pending: break;
    }
  }
  return report;
}

std::map<std::string, EmbeddingVector> load_embeddings(const fs::path& latv, const fs::path& sidecar_csv) {
  const auto store = VectorStore::load(latv);
  static constexpr std::string_view header[] = {"sample_id", "row_index"};
  const auto table = read_csv(sidecar_csv, header);
  std::map<std::string, EmbeddingVector> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = sidecar_csv.string() + ":" + std::to_string(table.line_numbers[i]);
    if (row.size() != 2) throw DataError(where + ": expected sample_id,row_index");
    const auto idx = parse_int(row[1], where);
    if (idx < 0 || idx >= static_cast<long long>(store.count()))
      throw DataError(where + ": row " + row[1] + " outside " + latv.string());
    try {
      if (!out.emplace(row[0], EmbeddingVector(store.row(std::size_t(idx)))).second)
        throw DataError(where + ": duplicate sample_id '" + row[0] + "'");
    } catch (const InputError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

void save_embeddings(const fs::path& latv, const fs::path& sidecar_csv,
                     const std::vector<std::pair<std::string, EmbeddingVector>>& rows) {
  if (rows.empty()) {
    VectorStore().save(latv);
  } else {
    VectorStore store(static_cast<std::uint32_t>(rows.front().second.dim()));
    for (const auto& [id, e] : rows) store.append(e.values());
    store.save(latv);
  }
  std::string csv = "sample_id,row_index\n";
  for (std::size_t i = 0; i < rows.size(); ++i) csv += rows[i].first + "," + std::to_string(i) + "\n";
  write_file_atomic(sidecar_csv, csv);
}

std::map<std::string, int> load_face_counts(const fs::path& csv) {
  static constexpr std::string_view header[] = {"sample_id", "face_count"};
  const auto table = read_csv(csv, header);
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string where = csv.string() + ":" + std::to_string(table.line_numbers[i]);
    if (table.rows[i].size() != 2) throw DataError(where + ": expected sample_id,face_count");
    const auto n = parse_int(table.rows[i][1], where);
    if (n < 0) throw DataError(where + ": negative face count");
    out[table.rows[i][0]] = static_cast<int>(n);
  }
  return out;
}

std::map<std::string, std::string> load_gender_labels(const fs::path& csv) {
  static constexpr std::string_view header[] = {"sample_id", "gender"};
  const auto table = read_csv(csv, header);
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].size() != 2)
      throw DataError(csv.string() + ":" + std::to_string(table.line_numbers[i]) + ": expected sample_id,gender");
    out[table.rows[i][0]] = table.rows[i][1];
  }
  return out;
}

std::string samples_to_csv(std::span<const SampleRecord> samples) {
  std::ostringstream out;
  out << "sample_id,identity_id,stage,prompt_id,embedding_ref,detected_face,gender_label,ip_score,verdict\n";
  for (const auto& s : samples)
    out << s.sample_id << ',' << s.identity_id << ',' << to_string(s.stage) << ',' << s.prompt_id << ','
        << s.embedding_ref << ',' << (s.detected_face ? 1 : 0) << ',' << s.gender_label << ','
        << (s.ip_score ? format_double(*s.ip_score) : "") << ',' << to_string(s.verdict) << '\n';
  return out.str();
}

std::vector<SampleRecord> samples_from_csv(const std::string& text) {
  static constexpr std::string_view header[] = {"sample_id",     "identity_id",  "stage",
                                                "prompt_id",     "embedding_ref", "detected_face",
                                                "gender_label",  "ip_score",      "verdict"};
  const auto table = parse_csv(text, header);
  std::vector<SampleRecord> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::string where = "samples line " + std::to_string(table.line_numbers[i]);
    if (r.size() != 9) throw DataError(where + ": expected 9 fields");
    SampleRecord s;
    s.sample_id = r[0];
    s.identity_id = r[1];
    s.stage = parse_stage(r[2]);
    s.prompt_id = r[3];
    s.embedding_ref = r[4];
    s.detected_face = r[5] == "1";
    s.gender_label = r[6];
    if (!r[7].empty()) s.ip_score = parse_double(r[7], where);
    s.verdict = parse_verdict(r[8]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace latentforge
