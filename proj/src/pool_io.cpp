#include "latentforge/pool_io.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "latentforge/errors.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/latv.hpp"

namespace latentforge {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kLabelsHeader[] = {"index",      "race",  "gender", "age_bin",     "expression",
                                               "yaw",        "pitch", "illumination", "quality"};
constexpr std::string_view kScoreHeader[] = {"index", "score"};

}  // namespace

std::string score_file_name(const std::string& attribute) {
  std::string name = attribute;
  std::replace(name.begin(), name.end(), ':', '.');
  return name + ".csv";
}

std::string attribute_from_score_file(const fs::path& file) {
  std::string name = file.stem().string();
  std::replace(name.begin(), name.end(), '.', ':');
  return name;
}

void save_pool(const fs::path& dir, std::span<const CandidateSample> samples) {
  if (samples.empty()) throw InputError("save_pool: empty pool");
  VectorStore store(static_cast<std::uint32_t>(samples.front().latent.dim()));
  std::ostringstream labels;
  labels << "index,race,gender,age_bin,expression,yaw,pitch,illumination,quality\n";
  std::map<std::string, std::ostringstream> scores;
  for (const auto& s : samples) {
    store.append(s.latent.values());
    const auto& l = s.labels;
    labels << s.index << ',' << l.race << ',' << l.gender << ',' << l.age_bin << ',' << l.expression << ','
           << format_double(l.yaw) << ',' << format_double(l.pitch) << ',' << format_double(l.illumination) << ','
           << format_double(s.quality) << '\n';
    for (const auto& [attr, v] : s.scores) {
      auto& out = scores[attr];
      if (out.tellp() == 0) out << "index,score\n";
      out << s.index << ',' << format_double(v) << '\n';
    }
  }
  store.save(dir / "latents.latv");
  write_file_atomic(dir / "labels.csv", labels.str());
  for (const auto& [attr, out] : scores) write_file_atomic(dir / "scores" / score_file_name(attr), out.str());
}

std::vector<CandidateSample> load_pool(const fs::path& dir) {
  const auto store = VectorStore::load(dir / "latents.latv");
  const auto labels = read_csv(dir / "labels.csv", kLabelsHeader);
  if (labels.rows.size() != store.count())
    throw DataError("pool: labels.csv has " + std::to_string(labels.rows.size()) + " rows, latents.latv has " +
                    std::to_string(store.count()));

  std::vector<CandidateSample> out;
  std::map<long long, std::size_t> row_of;
  for (std::size_t i = 0; i < labels.rows.size(); ++i) {
    const auto& r = labels.rows[i];
    const std::string where = (dir / "labels.csv").string() + ":" + std::to_string(labels.line_numbers[i]);
    if (r.size() != 9) throw DataError(where + ": expected 9 fields");
    CandidateSample s;
    const auto index = parse_int(r[0], where);
    if (index < 0 || !row_of.emplace(index, i).second) throw DataError(where + ": bad or duplicate index");
    s.index = static_cast<std::size_t>(index);
    s.latent = store.latent(i);
    s.labels = {r[1], r[2], r[3], r[4], parse_double(r[5], where), parse_double(r[6], where), parse_double(r[7], where)};
    s.quality = parse_double(r[8], where);
    out.push_back(std::move(s));
  }

  std::error_code ec;
  if (fs::is_directory(dir / "scores", ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / "scores"))
      if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const auto attr = attribute_from_score_file(file);
      const auto table = read_csv(file, kScoreHeader);
      const bool bare = !table.rows.empty() && table.rows.front().size() == 1;
      if (table.rows.size() != out.size())
        throw DataError(file.string() + ": " + std::to_string(table.rows.size()) + " scores for " +
                        std::to_string(out.size()) + " latents");
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        const std::string where = file.string() + ":" + std::to_string(table.line_numbers[i]);
        if (bare) {
          if (r.size() != 1) throw DataError(where + ": mixed score file layouts");
          out[i].scores[attr] = parse_double(r[0], where);
          continue;
        }
        if (r.size() != 2) throw DataError(where + ": expected index,score");
        const auto it = row_of.find(parse_int(r[0], where));
        if (it == row_of.end()) throw DataError(where + ": index " + r[0] + " not in labels.csv");
        out[it->second].scores[attr] = parse_double(r[1], where);
      }
    }
  }
  return out;
}

StoredPoolBackend::StoredPoolBackend(std::vector<CandidateSample> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw InputError("stored pool is empty");
}

std::size_t StoredPoolBackend::dim() const { return samples_.front().latent.dim(); }

CandidateSample StoredPoolBackend::draw(std::size_t index, std::uint64_t) const {
  if (index >= samples_.size())
    throw BackendError("sample " + std::to_string(index) + ": stored pool has only " +
                       std::to_string(samples_.size()) + " candidates");
  return samples_[index];
}

}  // namespace latentforge
