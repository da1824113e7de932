#include "latentforge/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "latentforge/curation.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/latv.hpp"
#include "latentforge/pool_io.hpp"
#include "latentforge/random.hpp"
#include "latentforge/simworld.hpp"
#include "latentforge/taxonomy.hpp"

namespace latentforge {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return 2;
    case ErrorKind::dependency: return 3;
    case ErrorKind::data:
    case ErrorKind::format:
    case ErrorKind::input:
    case ErrorKind::invariant:
    case ErrorKind::dimension:
    case ErrorKind::degenerate:
    case ErrorKind::training: return 4;
    default: return 1;
  }
}

namespace {

constexpr const char* kManifestFormat = "latentforge-run/1";

struct StageInfo {
  std::vector<std::string> dirs;
  std::vector<std::string> deps;
};

const std::map<std::string, StageInfo>& stage_table() {
  static const std::map<std::string, StageInfo> table = {
      {"pool", {{"pool"}, {}}},
      {"boundaries", {{"boundaries"}, {"pool"}}},
      {"identities", {{"identities"}, {"boundaries", "pool"}}},
      {"variations", {{"variations", "gan"}, {"identities", "boundaries"}}},
      {"personalize-emit", {{"prompts", "jobs", "manifests"}, {"variations"}}},
      {"ingest", {{"diffusion", "ingest"}, {"personalize-emit", "variations"}}},
      {"filter", {{"filter"}, {"ingest", "variations"}}},
      {"eval", {{"eval"}, {"filter", "variations"}}},
  };
  return table;
}

void log(const std::string& stage, const std::string& msg) { std::cerr << "[" << stage << "] " << msg << "\n"; }

std::string threshold_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tip%.2f", t);
  return buf;
}

std::string boundary_file(const std::string& attribute) {
  std::string name = attribute;
  std::replace(name.begin(), name.end(), ':', '.');
  return name + ".json";
}

void write_json(const fs::path& path, const json& doc) { write_file_atomic(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("missing directory " + dir.string());
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void copy_file_into(const fs::path& from, const fs::path& to) {
  std::error_code ec;
  if (!fs::is_regular_file(from, ec)) throw DataError("bridge output missing: " + from.string());
  write_file_atomic(to, read_file_bytes(from));
}

class Runner {
 public:
  Runner(const RunConfig& cfg, fs::path run) : cfg_(cfg), run_(std::move(run)) {}

  void run_stage(const std::string& name) {
    if (name == "pool") return pool();
    if (name == "boundaries") return boundaries();
    if (name == "identities") return identities();
    if (name == "variations") return variations();
    if (name == "personalize-emit") return personalize_emit();
    if (name == "ingest") return ingest();
    if (name == "filter") return filter();
    if (name == "eval") return eval();
    throw ConfigError("unknown stage '" + name + "'");
  }

 private:
  const World& world() {
    if (!world_) {
      WorldConfig wc;
      wc.dim = cfg_.sim.dim;
      wc.embed_dim = cfg_.sim.embed_dim;
      wc.noise_sigma = cfg_.sim.noise_sigma;
      wc.child_fraction = cfg_.sim.child_fraction;
      wc.seed = mix_seed(cfg_.seed, 1);
      world_ = World::create(wc);
    }
    return *world_;
  }

  bool sim() const { return cfg_.backend == "simworld"; }

  BoundarySet load_boundaries() {
    BoundarySet set;
    for (const auto& f : sorted_files(run_ / "boundaries", ".json")) {
      auto b = AttributeBoundary::from_json(read_json(f));
      set.emplace(b.attribute(), std::move(b));
    }
    return set;
  }

  std::vector<IdentityRecord> load_records(const fs::path& dir) {
    const auto latents = VectorStore::load(dir / "latents.latv");
    std::vector<IdentityRecord> out;
    for (const auto& f : sorted_files(dir / "records", ".json")) out.push_back(identity_from_json(read_json(f), latents));
    return out;
  }

  GroupPlan plan() const { return plan_demographic_groups(cfg_.races, cfg_.age_bins, cfg_.genders, cfg_.per_group); }

  void pool() {
    CandidatePool pool;
    if (sim()) {
      pool = build_candidate_pool(world(), cfg_.pool_size, cfg_.quality_percentile, mix_seed(cfg_.seed, 2));
    } else {
      StoredPoolBackend backend(load_pool(cfg_.bridge.pool_dir));
      pool = build_candidate_pool(backend, cfg_.pool_size, cfg_.quality_percentile, mix_seed(cfg_.seed, 2));
    }
    save_pool(run_ / "pool", pool.samples);
    write_json(run_ / "pool" / "provenance.json", {{"n_sampled", pool.provenance.n_sampled},
                                                   {"n_quality_dropped", pool.provenance.n_quality_dropped},
                                                   {"n_age_dropped", pool.provenance.n_age_dropped},
                                                   {"n_kept", pool.samples.size()},
                                                   {"quality_percentile", cfg_.quality_percentile}});
    log("pool", std::to_string(pool.provenance.n_sampled) + " sampled, " +
                    std::to_string(pool.provenance.n_quality_dropped) + " low quality, " +
                    std::to_string(pool.provenance.n_age_dropped) + " under 20, " + std::to_string(pool.samples.size()) +
                    " kept");
  }

  void boundaries() {
    const auto samples = load_pool(run_ / "pool");
    auto score_of = [&](const CandidateSample& s, const std::string& attr) {
      const auto it = s.scores.find(attr);
      if (it == s.scores.end())
        throw DataError("pool sample " + std::to_string(s.index) + " has no score for '" + attr + "'");
      return it->second;
    };

    std::map<std::string, LabeledPool> scalar;
    for (auto a : {taxonomy::kYaw, taxonomy::kPitch, taxonomy::kIllumination, taxonomy::kGender, taxonomy::kAge}) {
      LabeledPool p{std::string(a), {}, {}};
      for (const auto& s : samples) {
        p.latents.push_back(s.latent);
        p.scores.push_back(score_of(s, p.attribute));
      }
      scalar.emplace(p.attribute, std::move(p));
    }

    std::map<std::string, LabeledPool> expressions;
    for (const auto& s : samples) {
      const bool neutral = s.labels.expression == taxonomy::kNeutral;
      const std::string key = neutral ? std::string(taxonomy::kNeutral) : taxonomy::expression_boundary(s.labels.expression);
      auto& p = expressions[key];
      p.attribute = key;
      p.latents.push_back(s.latent);
      const auto it = s.scores.find(key);
      p.scores.push_back(it == s.scores.end() ? 0.0 : it->second);
    }

    std::map<std::string, LabeledPool> races;
    for (const auto& r : cfg_.races) races[taxonomy::race_boundary(r)].attribute = taxonomy::race_boundary(r);
    for (const auto& s : samples) {
      const auto key = taxonomy::race_boundary(s.labels.race);
      auto it = races.find(key);
      if (it == races.end()) continue;
      it->second.latents.push_back(s.latent);
      it->second.scores.push_back(score_of(s, key));
    }

    std::vector<AttributeBoundary> all;
    for (auto [pools, scheme] : {std::pair{&scalar, SuiteScheme::binary},
                                 {&expressions, SuiteScheme::one_vs_one_vs_neutral},
                                 {&races, SuiteScheme::one_vs_all}}) {
      SvmConfig svm = cfg_.svm;
      svm.seed = mix_seed(cfg_.seed, 3);
      auto trained = train_attribute_suite(*pools, scheme, svm);
      all.insert(all.end(), trained.begin(), trained.end());
    }

    std::string report =
        "# average_distance: mean |signed distance| over training vectors, unit normal\n"
        "attribute,n_images,validation_accuracy,average_distance\n";
    for (const auto& b : all) {
      write_json(run_ / "boundaries" / boundary_file(b.attribute()), b.to_json());
      report += b.attribute() + "," + std::to_string(b.meta().n_train) + "," +
                format_double(b.meta().validation_accuracy) + "," + format_double(b.meta().average_distance) + "\n";
    }
    write_file_atomic(run_ / "boundaries" / "report.csv", report);
    log("boundaries", std::to_string(all.size()) + " boundaries trained");
  }

  void save_records(const fs::path& dir, const std::vector<IdentityRecord>& records) {
    VectorStore store(static_cast<std::uint32_t>(records.empty() ? cfg_.sim.dim : records.front().seed_latent.dim()));
    for (const auto& rec : records) {
      IdentityRows rows;
      rows.seed = store.append(rec.seed_latent.values());
      rows.pose_neutral = store.append(rec.pose_neutral_latent.values());
      rows.neutral = store.append(rec.neutral_latent.values());
      rows.demographic = store.append(rec.demographic_latent.values());
      for (const auto& v : rec.variations) rows.variations.push_back(store.append(v.latent.values()));
      write_json(dir / "records" / (rec.identity_id + ".json"), identity_to_json(rec, rows));
    }
    store.save(dir / "latents.latv");
  }

  void identities() {
    const auto pool = load_pool(run_ / "pool");
    const auto p = plan();
    const auto records = synthesize_population(pool, p, load_boundaries(), cfg_.alphas);
    json groups = json::array();
    for (const auto& g : p.groups)
      groups.push_back({{"group_id", g.group_id}, {"race", g.race}, {"age_bin", g.age_bin}, {"gender", g.gender}});
    write_json(run_ / "identities" / "plan.json",
               {{"groups", groups}, {"per_group", p.per_group}, {"quota", p.quota()}});
    save_records(run_ / "identities", records);
    log("identities", std::to_string(records.size()) + " identities in " + std::to_string(p.groups.size()) + " groups");
  }

  void variations() {
    const auto boundaries = load_boundaries();
    auto records = load_records(run_ / "identities");
    for (auto& rec : records) rec = generate_variations(std::move(rec), cfg_.variation_spec, boundaries);
    save_records(run_ / "variations", records);

    std::vector<SampleRecord> gan_samples;
    for (const auto& rec : records)
      for (std::size_t i = 0; i < rec.variations.size(); ++i) {
        SampleRecord s;
        const auto image = rec.variation_image(i);
        s.sample_id = image.substr(0, image.size() - 4);
        s.identity_id = rec.identity_id;
        s.stage = Stage::gan;
        s.embedding_ref = s.sample_id;
        gan_samples.push_back(std::move(s));
      }

    const fs::path gan = run_ / "gan";
    if (sim()) {
      std::vector<std::pair<std::string, EmbeddingVector>> rows;
      std::string genders = "sample_id,gender\n";
      std::size_t k = 0;
      for (const auto& rec : records) {
        const double g = world().score(rec.demographic_latent, std::string(taxonomy::kGender));
        const std::string& label = g >= 0.0 ? cfg_.genders[0] : cfg_.genders[1];
        for (const auto& v : rec.variations) {
          rows.emplace_back(gan_samples[k].sample_id, world().embed(v.latent));
          genders += gan_samples[k].sample_id + "," + label + "\n";
          ++k;
        }
      }
      save_embeddings(gan / "embeddings.latv", gan / "embeddings.csv", rows);
      write_file_atomic(gan / "genders.csv", genders);
    } else {
      for (auto f : {"embeddings.latv", "embeddings.csv", "genders.csv"}) copy_file_into(cfg_.bridge.gan_dir / f, gan / f);
      const auto embeddings = load_embeddings(gan / "embeddings.latv", gan / "embeddings.csv");
      for (const auto& s : gan_samples)
        if (!embeddings.count(s.embedding_ref)) throw DataError("bridge GAN embeddings lack '" + s.sample_id + "'");
    }
    write_file_atomic(gan / "samples.csv", samples_to_csv(gan_samples));
    log("variations", std::to_string(gan_samples.size()) + " GAN variation images");
  }

  void personalize_emit() {
    const auto records = load_records(run_ / "variations");
    const auto bank = build_prompt_bank(cfg_.prompt_templates, cfg_.finetune.token, cfg_.finetune.class_name);
    json prompts = json::array();
    for (const auto& p : bank)
      prompts.push_back({{"prompt_id", p.prompt_id}, {"category", to_string(p.category)}, {"text", p.text},
                         {"negative_text", p.negative_text}});
    write_json(run_ / "prompts" / "bank.json", prompts);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& rec = records[i];
      emit_finetune_job(rec, cfg_.finetune, run_ / "jobs");
      emit_inference_manifest(rec.identity_id, bank, cfg_.samples_per_prompt, mix_seed(cfg_.seed, 1000 + i),
                              run_ / "manifests", "diffusion/images/" + rec.identity_id);
    }
    log("personalize-emit", std::to_string(records.size()) + " jobs, " + std::to_string(bank.size()) + " prompts");
  }

  void simulate_generation(const std::vector<InferenceManifest>& manifests) {
    const auto records = load_records(run_ / "variations");
    std::map<std::string, const IdentityRecord*> by_id;
    for (const auto& r : records) by_id[r.identity_id] = &r;
    const auto gan_genders = load_gender_labels(run_ / "gan" / "genders.csv");

    PersonalizationSimConfig sc{cfg_.sim.outlier_fraction, cfg_.sim.no_face_fraction, cfg_.sim.gender_flip_fraction};
    std::vector<std::pair<std::string, EmbeddingVector>> rows;
    std::string detections = "sample_id,face_count\n", genders = "sample_id,gender\n";
    for (std::size_t i = 0; i < manifests.size(); ++i) {
      const auto& m = manifests[i];
      const auto it = by_id.find(m.identity_id);
      if (it == by_id.end()) throw DataError("manifest for unknown identity '" + m.identity_id + "'");
      const auto& rec = *it->second;
      const std::string& gender = gan_genders.at(rec.identity_id + "_gan_" + rec.variations.front().tag);
      const std::string& other = gender == cfg_.genders[0] ? cfg_.genders[1] : cfg_.genders[0];

      std::map<std::string, std::size_t> prompt_pos;
      for (std::size_t p = 0; p < m.prompts.size(); ++p) prompt_pos[m.prompts[p].prompt_id] = p;
      std::vector<double> sigma;
      for (const auto& e : m.expected) {
        const double u = m.prompts.size() > 1 ? double(prompt_pos.at(e.prompt_id)) / double(m.prompts.size() - 1) : 0.0;
        sigma.push_back(cfg_.sim.sigma_d_min + u * (cfg_.sim.sigma_d_max - cfg_.sim.sigma_d_min));
      }
      const auto generated = simulate_personalization(world(), rec.demographic_latent, sigma, sc, m.seed);
      for (std::size_t k = 0; k < m.expected.size(); ++k) {
        const auto& file = m.expected[k].file_name;
        const std::string id = file.substr(0, file.size() - 4);
        write_file_atomic(run_ / m.output_dir / file, "simworld sample " + id + "\n");
        rows.emplace_back(id, generated[k].embedding);
        detections += id + "," + std::to_string(generated[k].face_count) + "\n";
        genders += id + "," + (generated[k].gender_flipped ? other : gender) + "\n";
      }
    }
    const fs::path d = run_ / "diffusion";
    save_embeddings(d / "embeddings.latv", d / "embeddings.csv", rows);
    write_file_atomic(d / "detections.csv", detections);
    write_file_atomic(d / "genders.csv", genders);
  }

  std::vector<InferenceManifest> load_manifests() {
    std::vector<InferenceManifest> out;
    for (const auto& f : sorted_files(run_ / "manifests", ".json")) out.push_back(InferenceManifest::from_json(read_json(f)));
    return out;
  }

  void ingest() {
    const auto manifests = load_manifests();
    const fs::path d = run_ / "diffusion";
    if (sim()) {
      simulate_generation(manifests);
    } else {
      for (auto f : {"embeddings.latv", "embeddings.csv", "detections.csv", "genders.csv"})
        copy_file_into(cfg_.bridge.diffusion_dir / f, d / f);
      for (const auto& m : manifests) {
        const fs::path src = cfg_.bridge.diffusion_dir / "images" / m.identity_id;
        std::error_code ec;
        if (!fs::is_directory(src, ec)) continue;  // reported as missing below
        for (const auto& e : fs::directory_iterator(src))
          if (e.is_regular_file()) copy_file_into(e.path(), run_ / m.output_dir / e.path().filename());
      }
    }

    std::vector<SampleRecord> samples;
    json report = json::object();
    std::size_t missing = 0;
    for (const auto& m : manifests) {
      const fs::path dir = run_ / m.output_dir;
      fs::create_directories(dir);
      auto result = ingest_generated_samples(m, dir);
      missing += result.report.missing.size();
      report[m.identity_id] = {{"expected", result.report.expected},
                               {"found", result.report.found},
                               {"missing", result.report.missing},
                               {"unexpected", result.report.unexpected}};
      for (const auto& u : result.report.unexpected) log("ingest", "warning: unexpected file " + (dir / u).string());
      samples.insert(samples.end(), result.samples.begin(), result.samples.end());
    }
    write_file_atomic(run_ / "ingest" / "samples.csv", samples_to_csv(samples));
    write_json(run_ / "ingest" / "report.json", report);
    log("ingest", std::to_string(samples.size()) + " samples, " + std::to_string(missing) + " missing");
  }

  std::vector<double> thresholds() const {
    std::vector<double> t = cfg_.t_ip_sweep;
    t.push_back(cfg_.t_ip);
    std::sort(t.begin(), t.end(), std::greater<>());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  }

  std::map<std::string, GanReference> gan_references() {
    const auto gan_samples = samples_from_csv(read_file_text(run_ / "gan" / "samples.csv"));
    const auto embeddings = load_embeddings(run_ / "gan" / "embeddings.latv", run_ / "gan" / "embeddings.csv");
    const auto genders = load_gender_labels(run_ / "gan" / "genders.csv");
    std::map<std::string, GanReference> refs;
    for (const auto& s : gan_samples) {
      auto& r = refs[s.identity_id];
      const auto e = embeddings.find(s.embedding_ref);
      if (e == embeddings.end()) throw DataError("no GAN embedding for '" + s.sample_id + "'");
      r.embeddings.push_back(e->second);
      const auto g = genders.find(s.sample_id);
      if (g == genders.end()) throw DataError("no GAN gender label for '" + s.sample_id + "'");
      r.genders.push_back(g->second);
    }
    return refs;
  }

  void filter() {
    const auto samples = samples_from_csv(read_file_text(run_ / "ingest" / "samples.csv"));
    const fs::path d = run_ / "diffusion";
    FilterInputs inputs;
    inputs.face_counts = load_face_counts(d / "detections.csv");
    inputs.embeddings = load_embeddings(d / "embeddings.latv", d / "embeddings.csv");
    inputs.gender_labels = load_gender_labels(d / "genders.csv");
    inputs.gan = gan_references();

    json summary = {{"primary", threshold_tag(cfg_.t_ip)}, {"thresholds", json::array()}};
    for (double t : thresholds()) {
      auto filtered = samples;
      const auto report = apply_filters(filtered, inputs, FilterConfig{t});
      const fs::path out = run_ / "filter" / threshold_tag(t);
      write_file_atomic(out / "samples.csv", samples_to_csv(filtered));
      write_json(out / "report.json", report.to_json());
      summary["thresholds"].push_back({{"t_ip", t}, {"tag", threshold_tag(t)}, {"kept", report.totals().kept}});
      log("filter", threshold_tag(t) + ": kept " + std::to_string(report.totals().kept) + " of " +
                        std::to_string(report.totals().total));
    }
    write_json(run_ / "filter" / "summary.json", summary);
  }

  DatasetScores load_reference_scores(const ReferenceSpec& ref) {
    static constexpr std::string_view header[] = {"series", "score"};
    const auto table = read_csv(ref.scores, header);
    std::vector<double> mated, nonmated;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      const std::string where = ref.scores.string() + ":" + std::to_string(table.line_numbers[i]);
      if (r.size() != 2) throw DataError(where + ": expected series,score");
      const double v = parse_double(r[1], where);
      if (r[0] == "mated")
        mated.push_back(v);
      else if (r[0] == "nonmated")
        nonmated.push_back(v);
      else
        throw DataError(where + ": series must be mated or nonmated");
    }
    if (mated.empty() || nonmated.empty()) throw DataError(ref.scores.string() + ": needs mated and nonmated scores");
    return {ref.name, 0, ScoreDistribution::from_scores(std::move(mated), cfg_.eval.bins),
            ScoreDistribution::from_scores(std::move(nonmated), cfg_.eval.bins)};
  }

  void eval() {
    std::vector<DatasetScores> datasets;
    json summary = json::object();
    auto evaluate = [&](const std::string& name, const std::vector<SampleRecord>& records,
                        const std::map<std::string, EmbeddingVector>& embeddings, SamplingParams params) {
      const auto set = sample_comparisons(records, params, mix_seed(cfg_.seed, 9000 + datasets.size()), name);
      write_json(run_ / "eval" / "comparisons" / (name + ".json"), set.to_json());
      for (const auto& w : set.warnings) log("eval", name + ": " + w);
      auto scored = score_comparisons(set, embeddings, cfg_.eval.bins);
      summary[name] = {{"n_identities", set.identities.size()},
                       {"skipped_identities", set.skipped_identities},
                       {"n_mated", scored.mated.scores.size()},
                       {"n_nonmated", scored.nonmated.scores.size()},
                       {"mated_mean", scored.mated.mean},
                       {"mated_std", scored.mated.std},
                       {"nonmated_mean", scored.nonmated.mean},
                       {"nonmated_std", scored.nonmated.std}};
      datasets.push_back({name, set.identities.size(), std::move(scored.mated), std::move(scored.nonmated)});
    };

    SamplingParams gan_params = cfg_.eval.sampling;
    gan_params.per_identity = std::min(gan_params.per_identity, cfg_.eval.gan_per_identity);
    evaluate("gan", samples_from_csv(read_file_text(run_ / "gan" / "samples.csv")),
             load_embeddings(run_ / "gan" / "embeddings.latv", run_ / "gan" / "embeddings.csv"), gan_params);

    const auto diffusion =
        load_embeddings(run_ / "diffusion" / "embeddings.latv", run_ / "diffusion" / "embeddings.csv");
    for (double t : thresholds()) {
      std::vector<SampleRecord> kept;
      for (auto& s : samples_from_csv(read_file_text(run_ / "filter" / threshold_tag(t) / "samples.csv")))
        if (s.verdict == Verdict::kept) kept.push_back(std::move(s));
      evaluate("diffusion_" + threshold_tag(t), kept, diffusion, cfg_.eval.sampling);
    }

    std::vector<std::string> refs;
    for (const auto& r : cfg_.eval.references) {
      refs.push_back(r.name);
      if (!r.scores.empty()) datasets.push_back(load_reference_scores(r));
    }
    const auto report = distribution_report(datasets, refs, {cfg_.eval.bins, cfg_.eval.epsilon});
    write_distribution_report(report, run_ / "eval");
    summary["_meta"] = {{"bins", cfg_.eval.bins}, {"epsilon", cfg_.eval.epsilon},
                        {"quality_threshold", cfg_.quality_threshold}, {"references", refs}};
    write_json(run_ / "eval" / "summary.json", summary);
    log("eval", std::to_string(datasets.size()) + " datasets evaluated");
  }

  const RunConfig& cfg_;
  fs::path run_;
  std::optional<World> world_;
};

// Files under a stage's directories, relative to the run directory, sorted.
json digest_outputs(const fs::path& run, const StageInfo& info) {
  std::vector<std::string> files;
  for (const auto& d : info.dirs) {
    std::error_code ec;
    if (!fs::is_directory(run / d, ec)) continue;
    for (const auto& e : fs::recursive_directory_iterator(run / d))
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), run).generic_string());
  }
  std::sort(files.begin(), files.end());
  json out = json::array();
  for (const auto& f : files) out.push_back({{"path", f}, {"sha256", sha256_file(run / f)}});
  return out;
}

std::string aggregate_digest(const json& outputs) {
  std::string lines;
  for (const auto& o : outputs) lines += o.at("path").get<std::string>() + " " + o.at("sha256").get<std::string>() + "\n";
  return sha256_hex(lines);
}

class RunLock {
 public:
  explicit RunLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw IoError("cannot open lock " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw IoError("run directory is locked by another process: " + path.parent_path().string());
    }
  }
  ~RunLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace

RunSummary execute(const RunConfig& config, const fs::path& run_dir, const std::vector<std::string>& stages) {
  config.validate();
  const auto& table = stage_table();
  std::set<std::string> requested;
  for (const auto& s : stages) {
    if (!table.count(s)) throw ConfigError("unknown stage '" + s + "'");
    requested.insert(s);
  }
  if (requested.empty()) requested.insert(pipeline_stages().begin(), pipeline_stages().end());

  fs::create_directories(run_dir);
  RunLock lock(run_dir / ".lock");

  const json effective = config.to_json();
  const std::string config_digest = sha256_hex(effective.dump());
  const fs::path manifest_path = run_dir / "manifest.json";

  json manifest;
  std::error_code ec;
  if (fs::exists(manifest_path, ec)) {
    manifest = read_json(manifest_path);
    if (manifest.value("config_sha256", "") != config_digest)
      throw ConfigError("run directory " + run_dir.string() +
                        " was created with a different configuration; use a new --run-dir");
  } else {
    manifest = {{"format", kManifestFormat},
                {"config_sha256", config_digest},
                {"seed", config.seed},
                {"config", effective},
                {"stages", json::object()}};
  }

  Runner runner(config, run_dir);
  RunSummary summary;
  for (const auto& name : pipeline_stages()) {
    if (!requested.count(name)) continue;
    const auto& info = table.at(name);

    json inputs = {{"config", config_digest}};
    for (const auto& dep : info.deps) {
      if (!manifest["stages"].contains(dep))
        throw DependencyError("stage '" + name + "' needs outputs of stage '" + dep + "', which has not run in " +
                              run_dir.string());
      inputs[dep] = aggregate_digest(digest_outputs(run_dir, table.at(dep)));
      if (inputs[dep] != manifest["stages"][dep]["output_digest"])
        throw DataError("outputs of stage '" + dep + "' were modified after they were recorded");
    }

    if (manifest["stages"].contains(name)) {
      const auto& recorded = manifest["stages"][name];
      const auto outputs = digest_outputs(run_dir, info);
      if (recorded["inputs"] == inputs && recorded["outputs"] == outputs) {
        log(name, "up to date");
        summary.up_to_date.push_back(name);
        continue;
      }
      throw DataError("stage '" + name + "' is recorded but its inputs or outputs changed; use a new --run-dir");
    }

    for (const auto& d : info.dirs) fs::remove_all(run_dir / d);
    runner.run_stage(name);
    const auto outputs = digest_outputs(run_dir, info);
    manifest["stages"][name] = {{"inputs", inputs}, {"outputs", outputs}, {"output_digest", aggregate_digest(outputs)}};
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    summary.executed.push_back(name);
  }
  return summary;
}

}  // namespace latentforge
