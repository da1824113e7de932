#include "latentforge/identity_factory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <string_view>

#include "latentforge/errors.hpp"
#include "latentforge/latv.hpp"
#include "latentforge/taxonomy.hpp"

namespace latentforge {

const AttributeBoundary& require_boundary(const BoundarySet& set, const std::string& name) {
  const auto it = set.find(name);
  if (it == set.end()) throw ConfigError("missing boundary '" + name + "'");
  return it->second;
}

CandidatePool filter_candidates(std::vector<CandidateSample> sampled, double quality_percentile) {
  if (!(quality_percentile >= 0.0 && quality_percentile < 1.0))
    throw InputError("quality_percentile must be in [0, 1)");
  for (const auto& s : sampled)
    if (!std::isfinite(s.quality))
      throw InputError("candidate " + std::to_string(s.index) + " has non-finite quality");

  CandidatePool pool;
  pool.provenance.n_sampled = sampled.size();
  const auto drop = static_cast<std::size_t>(std::floor(quality_percentile * double(sampled.size())));
  pool.provenance.n_quality_dropped = drop;

  std::vector<std::size_t> order(sampled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sampled[a].quality < sampled[b].quality; });
  std::vector<bool> dropped(sampled.size(), false);
  for (std::size_t i = 0; i < drop; ++i) dropped[order[i]] = true;

  for (std::size_t i = 0; i < sampled.size(); ++i) {
    if (dropped[i]) continue;
    if (taxonomy::is_child_age_bin(sampled[i].labels.age_bin)) {
      ++pool.provenance.n_age_dropped;
      continue;
    }
    pool.samples.push_back(std::move(sampled[i]));
  }
  std::sort(pool.samples.begin(), pool.samples.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  return pool;
}

CandidatePool build_candidate_pool(const CandidateBackend& backend, std::size_t n,
                                   double quality_percentile, std::uint64_t seed) {
  if (n == 0) throw InputError("build_candidate_pool: n must be >= 1");
  if (!(quality_percentile >= 0.0 && quality_percentile < 1.0))
    throw InputError("quality_percentile must be in [0, 1)");
  std::vector<CandidateSample> sampled;
  sampled.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      sampled.push_back(backend.draw(i, seed));
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError("sample " + std::to_string(i) + ": " + e.what());
    }
    if (sampled.back().latent.dim() != backend.dim())
      throw BackendError("sample " + std::to_string(i) + ": latent dim " +
                         std::to_string(sampled.back().latent.dim()) + " != backend dim " +
                         std::to_string(backend.dim()));
  }
  return filter_candidates(std::move(sampled), quality_percentile);
}

double illumination_score(std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height) {
  if (width < 2 || height < 1) throw InputError("illumination_score: need width >= 2 and height >= 1");
  if (pixels.size() < width * height)
    throw InputError("illumination_score: buffer has " + std::to_string(pixels.size()) +
                     " bytes, expected " + std::to_string(width * height));
  const std::size_t half = width / 2;
  const std::size_t right_start = width - half;
  double left = 0.0, right = 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    const auto row = pixels.subspan(y * width, width);
    for (std::size_t x = 0; x < half; ++x) left += row[x];
    for (std::size_t x = right_start; x < width; ++x) right += row[x];
  }
  const double n = double(half * height);
  return (left / n - right / n) / 255.0;
}

GrayImage parse_pgm(std::span<const std::byte> bytes) {
  std::size_t pos = 0;
  auto peek = [&]() -> int {
    return pos < bytes.size() ? std::to_integer<unsigned char>(bytes[pos]) : -1;
  };
  auto skip_space = [&] {
    while (true) {
      const int c = peek();
      if (c == '#') {
        while (peek() != -1 && peek() != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    std::size_t v = 0;
    bool any = false;
    while (peek() >= '0' && peek() <= '9') {
      v = v * 10 + std::size_t(peek() - '0');
      if (v > (1u << 24)) throw FormatError(std::string("PGM: ") + what + " too large");
      any = true;
      ++pos;
    }
    if (!any) throw FormatError(std::string("PGM: missing ") + what);
    return v;
  };

  if (bytes.size() < 2 || peek() != 'P' || std::to_integer<char>(bytes[1]) != '5')
    throw FormatError("PGM: expected P5 magic");
  pos = 2;
  GrayImage img;
  img.width = read_uint("width");
  img.height = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (maxval == 0 || maxval > 255) throw FormatError("PGM: only 8-bit maxval supported");
  if (pos >= bytes.size()) throw FormatError("PGM: truncated after header");
  ++pos;  // single whitespace before raster
  const std::size_t need = img.width * img.height;
  if (bytes.size() - pos < need)
    throw FormatError("PGM: raster truncated (" + std::to_string(bytes.size() - pos) + " of " +
                      std::to_string(need) + " bytes)");
  img.pixels.resize(need);
  for (std::size_t i = 0; i < need; ++i) {
    const auto v = std::to_integer<std::uint8_t>(bytes[pos + i]);
    img.pixels[i] = maxval == 255 ? v : static_cast<std::uint8_t>(std::lround(255.0 * v / double(maxval)));
  }
  return img;
}

GroupPlan plan_demographic_groups(const std::vector<std::string>& races,
                                  const std::vector<std::string>& age_bins,
                                  const std::vector<std::string>& genders, std::size_t per_group) {
  auto check = [](const std::vector<std::string>& names, const char* what) {
    if (names.empty()) throw ConfigError(std::string("no ") + what + " names given");
    std::set<std::string> seen;
    for (const auto& n : names)
      if (!seen.insert(n).second) throw ConfigError(std::string("duplicate ") + what + " name '" + n + "'");
  };
  check(races, "race");
  check(age_bins, "age bin");
  check(genders, "gender");
  if (per_group == 0) throw InputError("per_group must be >= 1");

  GroupPlan plan;
  plan.per_group = per_group;
  plan.age_bins = age_bins;
  plan.genders = genders;
  int id = 0;
  for (const auto& r : races)
    for (const auto& a : age_bins)
      for (const auto& g : genders) plan.groups.push_back({r, a, g, id++});
  return plan;
}

std::vector<CandidateSample> select_seed_candidates(std::span<const CandidateSample> pool,
                                                    const DemographicGroup& group, std::size_t k) {
  if (pool.empty()) throw InputError("select_seed_candidates: empty pool");
  if (k > pool.size())
    throw InputError("select_seed_candidates: k=" + std::to_string(k) + " exceeds pool of " +
                     std::to_string(pool.size()));
  auto matches = [&](const CandidateSample& c) {
    return int(c.labels.race == group.race) + int(c.labels.gender == group.gender) +
           int(taxonomy::canonical_age_bin(c.labels.age_bin) == group.age_bin);
  };
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> tier(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) tier[i] = matches(pool[i]);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (tier[a] != tier[b]) return tier[a] > tier[b];
                      if (pool[a].quality != pool[b].quality) return pool[a].quality > pool[b].quality;
                      return pool[a].index < pool[b].index;
                    });
  std::vector<CandidateSample> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool[order[i]]);
  return out;
}

VariationSpec VariationSpec::default_spec(const EditAlphas& a) {
  const std::string yaw(taxonomy::kYaw), pitch(taxonomy::kPitch);
  const std::string happy = taxonomy::expression_boundary("happy");
  return {{{"frontal", {}},
           {"yaw+", {{yaw, a.yaw}}},
           {"yaw-", {{yaw, -a.yaw}}},
           {"pitch+", {{pitch, a.pitch}}},
           {"happy+", {{happy, a.expression}}},
           {"yaw+happy+", {{yaw, a.yaw}, {happy, a.expression}}}}};
}

void VariationSpec::validate() const {
  if (recipes.size() != kCount)
    throw ConfigError("variation spec needs exactly 6 recipes, got " + std::to_string(recipes.size()));
  std::set<std::string> tags;
  for (const auto& r : recipes) {
    if (r.tag.empty() || !tags.insert(r.tag).second)
      throw ConfigError("variation tags must be unique and nonempty ('" + r.tag + "')");
    for (const auto& [attr, alpha] : r.edits) {
      const bool allowed = attr == taxonomy::kYaw || attr == taxonomy::kPitch ||
                           attr == taxonomy::kIllumination || attr.rfind("expression:", 0) == 0;
      if (!allowed) throw ConfigError("variation recipe '" + r.tag + "' edits unsupported attribute '" + attr + "'");
      if (!std::isfinite(alpha)) throw ConfigError("variation recipe '" + r.tag + "' has non-finite alpha");
    }
  }
}

const char* to_string(IdentityStatus s) {
  switch (s) {
    case IdentityStatus::planned: return "planned";
    case IdentityStatus::synthesized: return "synthesized";
    case IdentityStatus::personalized: return "personalized";
    case IdentityStatus::curated: return "curated";
  }
  return "planned";
}

IdentityStatus parse_identity_status(const std::string& s) {
  for (auto st : {IdentityStatus::planned, IdentityStatus::synthesized, IdentityStatus::personalized,
                  IdentityStatus::curated})
    if (s == to_string(st)) return st;
  throw FormatError("unknown identity status '" + s + "'");
}

std::string IdentityRecord::variation_image(std::size_t i) const {
  return identity_id + "_gan_" + variations.at(i).tag + ".png";
}

IdentityRecord synthesize_identity(std::string identity_id, const CandidateSample& seed,
                                   const DemographicGroup& group, const GroupPlan& plan,
                                   const BoundarySet& boundaries, const EditAlphas& alphas) {
  const auto& yaw = require_boundary(boundaries, std::string(taxonomy::kYaw));
  const auto& pitch = require_boundary(boundaries, std::string(taxonomy::kPitch));
  const bool expressive = seed.labels.expression != taxonomy::kNeutral;
  const AttributeBoundary* expression =
      expressive ? &require_boundary(boundaries, taxonomy::expression_boundary(seed.labels.expression)) : nullptr;
  const auto& race = require_boundary(boundaries, taxonomy::race_boundary(group.race));
  const auto& age = require_boundary(boundaries, std::string(taxonomy::kAge));
  const auto& gender = require_boundary(boundaries, std::string(taxonomy::kGender));

  auto index_of = [](const std::vector<std::string>& names, const std::string& v, const char* what) {
    const auto it = std::find(names.begin(), names.end(), v);
    if (it == names.end()) throw InputError(std::string("unknown ") + what + " '" + v + "'");
    return it - names.begin();
  };
  const auto target_age = index_of(plan.age_bins, group.age_bin, "age bin");
  const auto seed_age = index_of(plan.age_bins, taxonomy::canonical_age_bin(seed.labels.age_bin), "age bin");
  const double age_sign = target_age > seed_age ? 1.0 : target_age < seed_age ? -1.0 : 0.0;
  index_of(plan.genders, group.gender, "gender");
  const double gender_sign = group.gender == plan.genders.front() ? 1.0 : -1.0;

  IdentityRecord rec;
  rec.identity_id = std::move(identity_id);
  rec.group = group;
  rec.seed_index = seed.index;
  rec.seed_expression = seed.labels.expression;
  rec.seed_latent = seed.latent;

  const EditStep pose[] = {EditStep::neutralize(yaw), EditStep::neutralize(pitch)};
  rec.pose_neutral_latent = compose_edits(rec.seed_latent, pose);

  rec.neutral_latent = rec.pose_neutral_latent;
  if (expression) {
    const EditStep steps[] = {EditStep::neutralize(*expression), EditStep::shift(*expression, -alphas.expression)};
    rec.neutral_latent = compose_edits(rec.pose_neutral_latent, steps);
  }

  const EditStep demographic[] = {EditStep::shift(race, alphas.race), EditStep::shift(age, age_sign * alphas.age),
                                  EditStep::shift(gender, gender_sign * alphas.gender)};
  rec.demographic_latent = compose_edits(rec.neutral_latent, demographic);
  rec.status = IdentityStatus::planned;
  return rec;
}

IdentityRecord generate_variations(IdentityRecord rec, const VariationSpec& spec,
                                   const BoundarySet& boundaries) {
  spec.validate();
  if (rec.demographic_latent.dim() == 0)
    throw InputError("identity '" + rec.identity_id + "' has no demographic latent");
  rec.variations.clear();
  for (const auto& recipe : spec.recipes) {
    std::vector<EditStep> steps;
    for (const auto& [attr, alpha] : recipe.edits) {
      try {
        steps.push_back(EditStep::shift(require_boundary(boundaries, attr), alpha));
      } catch (const ConfigError& e) {
        throw ConfigError("variation '" + recipe.tag + "': " + e.what());
      }
    }
    rec.variations.push_back({recipe.tag, compose_edits(rec.demographic_latent, steps)});
  }
  rec.status = IdentityStatus::synthesized;
  return rec;
}

std::vector<IdentityRecord> synthesize_population(std::span<const CandidateSample> pool,
                                                  const GroupPlan& plan, const BoundarySet& boundaries,
                                                  const EditAlphas& alphas) {
  std::vector<bool> used(pool.size(), false);
  std::vector<IdentityRecord> out;
  std::vector<std::string> unfilled;
  std::size_t next_id = 0;
  for (const auto& group : plan.groups) {
    std::vector<CandidateSample> remaining;
    std::vector<std::size_t> position;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (!used[i]) {
        remaining.push_back(pool[i]);
        position.push_back(i);
      }
    if (remaining.size() < plan.per_group) {
      unfilled.push_back(std::to_string(group.group_id) + " (" + group.race + "/" + group.age_bin + "/" +
                         group.gender + ")");
      continue;
    }
    const auto seeds = select_seed_candidates(remaining, group, plan.per_group);
    for (const auto& seed : seeds) {
      for (std::size_t j = 0; j < remaining.size(); ++j)
        if (remaining[j].index == seed.index) used[position[j]] = true;
      char id[32];
      std::snprintf(id, sizeof id, "id%04zu", next_id++);
      out.push_back(synthesize_identity(id, seed, group, plan, boundaries, alphas));
    }
  }
  if (!unfilled.empty()) {
    std::string msg = "cannot fill " + std::to_string(unfilled.size()) + " demographic group(s):";
    for (const auto& g : unfilled) msg += " " + g;
    throw DataError(msg);
  }
  return out;
}

nlohmann::json identity_to_json(const IdentityRecord& rec, const IdentityRows& rows) {
  nlohmann::json variations = nlohmann::json::array();
  for (std::size_t i = 0; i < rec.variations.size(); ++i)
    variations.push_back({{"tag", rec.variations[i].tag},
                          {"row", rows.variations.at(i)},
                          {"image", rec.variation_image(i)}});
  return {{"identity_id", rec.identity_id},
          {"group",
           {{"group_id", rec.group.group_id},
            {"race", rec.group.race},
            {"age_bin", rec.group.age_bin},
            {"gender", rec.group.gender}}},
          {"seed_index", rec.seed_index},
          {"seed_expression", rec.seed_expression},
          {"status", to_string(rec.status)},
          {"latents",
           {{"seed", rows.seed},
            {"pose_neutral", rows.pose_neutral},
            {"neutral", rows.neutral},
            {"demographic", rows.demographic}}},
          {"steps", {"pose_neutralization", "expression_neutralization", "demographic_transformation"}},
          {"variations", variations}};
}

IdentityRecord identity_from_json(const nlohmann::json& doc, const VectorStore& latents) {
  try {
    IdentityRecord rec;
    rec.identity_id = doc.at("identity_id").get<std::string>();
    const auto& g = doc.at("group");
    rec.group = {g.at("race").get<std::string>(), g.at("age_bin").get<std::string>(),
                 g.at("gender").get<std::string>(), g.at("group_id").get<int>()};
    rec.seed_index = doc.at("seed_index").get<std::size_t>();
    rec.seed_expression = doc.at("seed_expression").get<std::string>();
    rec.status = parse_identity_status(doc.at("status").get<std::string>());
    const auto& l = doc.at("latents");
    rec.seed_latent = latents.latent(l.at("seed").get<std::size_t>());
    rec.pose_neutral_latent = latents.latent(l.at("pose_neutral").get<std::size_t>());
    rec.neutral_latent = latents.latent(l.at("neutral").get<std::size_t>());
    rec.demographic_latent = latents.latent(l.at("demographic").get<std::size_t>());
    for (const auto& v : doc.at("variations"))
      rec.variations.push_back({v.at("tag").get<std::string>(), latents.latent(v.at("row").get<std::size_t>())});
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("identity document: ") + e.what());
  }
}

}  // namespace latentforge
