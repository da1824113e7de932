// Acceptance suite: one PASS/FAIL line per criterion.
//
// usage: acceptance <latentforge-cli> <smoke-config> <golden-dir> <scratch-dir>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "latentforge/boundary_training.hpp"
#include "latentforge/curation.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/evaluation.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/identity_factory.hpp"
#include "latentforge/latv.hpp"
#include "latentforge/personalization.hpp"
#include "latentforge/random.hpp"
#include "latentforge/simworld.hpp"
#include "latentforge/taxonomy.hpp"

namespace fs = std::filesystem;
using namespace latentforge;
using nlohmann::json;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(d);
  for (auto& x : v) x = g(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// --- criteria --------------------------------------------------------------

Outcome algebra_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ua(-5.0, 5.0);
  double worst_orth = 0, worst_idem = 0, worst_lin = 0, worst_leak = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 64;
    const LatentVector w(gaussian(rng, d, 2.0));
    const AttributeBoundary b1("a", gaussian(rng, d), ua(rng));
    const AttributeBoundary b2("b", gaussian(rng, d), ua(rng));
    const double alpha = ua(rng);

    const auto n1 = neutralize(w, b1);
    worst_orth = std::max(worst_orth, std::abs(dot(n1.values(), b1.normal())));
    const auto nn = neutralize(n1, b1);
    for (std::size_t i = 0; i < d; ++i) worst_idem = std::max(worst_idem, std::abs(nn[i] - n1[i]));
    worst_lin = std::max(worst_lin,
                         std::abs(signed_distance(transform(w, b1, alpha), b1) - signed_distance(w, b1) - alpha));
    const double leak = dot(transform(w, b2, alpha).values(), b1.normal()) - dot(w.values(), b1.normal());
    worst_leak = std::max(worst_leak, std::abs(leak - alpha * dot(b2.normal(), b1.normal())));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst_orth < 1e-6, fmt("orthogonality %.3g", worst_orth));
  o.require(worst_idem < 1e-9, fmt("idempotence %.3g", worst_idem));
  o.require(worst_lin < 1e-6, fmt("linearity %.3g", worst_lin));
  o.require(worst_leak < 1e-6, fmt("leakage %.3g", worst_leak));
  o.require(elapsed < 1.0, fmt("runtime %.2fs", elapsed));
  if (o.ok)
    o.detail = fmt("1000 triples, max errors %.1e / %.1e / %.1e", worst_orth, worst_idem, worst_lin) +
               fmt(" / %.1e, %.2fs", worst_leak, elapsed);
  return o;
}

Outcome boundary_recovery() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::vector<std::string> attributes = {"yaw", "pitch", "illumination", "gender", "age"};
  double worst_cos = 1.0, worst_acc = 1.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    WorldConfig wc;
    wc.seed = seed;
    const auto world = World::create(wc);
    const auto samples = sample_labeled_latents(world, 10000, mix_seed(seed, 77));
    for (const auto& attr : attributes) {
      LabeledPool pool{attr, {}, {}};
      for (const auto& s : samples) {
        pool.latents.push_back(s.latent);
        pool.scores.push_back(s.scores.at(attr));
      }
      SvmConfig cfg;
      cfg.seed = seed;
      const auto split = select_extremes(pool, default_per_side(pool.latents.size(), cfg));
      std::vector<LatentVector> pos, neg;
      for (auto i : split.positives) pos.push_back(pool.latents[i]);
      for (auto i : split.negatives) neg.push_back(pool.latents[i]);
      const auto b = train_linear_boundary(attr, pos, neg, cfg);
      worst_cos = std::min(worst_cos, std::abs(dot(b.normal(), world.direction(attr))));
      worst_acc = std::min(worst_acc, b.meta().validation_accuracy);
    }
  }
  const double elapsed = seconds_since(t0);
  o.require(worst_cos >= 0.95, fmt("worst |cos| %.4f", worst_cos));
  o.require(worst_acc >= 0.99, fmt("worst validation accuracy %.4f", worst_acc));
  o.require(elapsed < 30.0, fmt("runtime %.1fs", elapsed));
  if (o.ok)
    o.detail = fmt("20 worlds x 5 attributes, worst |cos| %.4f, worst accuracy %.4f, %.1fs", worst_cos, worst_acc,
                   elapsed);
  return o;
}

Outcome protocol_constants(const fs::path& golden) {
  Outcome o;
  const auto plan = plan_demographic_groups(taxonomy::to_strings(taxonomy::kRaces),
                                            taxonomy::to_strings(taxonomy::kAdultAgeBins),
                                            taxonomy::to_strings(taxonomy::kGenders), 10);
  o.require(plan.groups.size() == 70, "group count");
  o.require(plan.quota() == 700, "identity quota");

  WorldConfig wc;
  wc.seed = 5;
  const auto world = World::create(wc);
  BoundarySet boundaries;
  for (const auto& a : world.attributes()) boundaries.emplace(a, world.planted_boundary(a));
  const auto pool = build_candidate_pool(world, 400, 0.1, 1);
  auto rec = synthesize_identity("id0000", pool.samples.front(), plan.groups.front(), plan, boundaries, {});
  rec = generate_variations(rec, VariationSpec::default_spec({}), boundaries);
  o.require(rec.variations.size() == 6, "variation count");

  const auto job = make_finetune_job(rec, FinetuneConfig{});
  o.require(job.input_images.size() == 6 && job.regularization_images == 200 && job.epochs == 1000 &&
                job.token == "xyz" && job.class_name == "person" && job.train_text_encoder,
            "fine-tune job fields");
  o.require(job.to_json() == json::parse(read_file_text(golden / "finetune_job.json")), "fine-tune job golden file");

  const auto bank = build_prompt_bank(default_prompt_templates(), "xyz", "person");
  json bank_doc = json::array();
  std::set<std::string> texts;
  bool negative_ok = true;
  for (const auto& p : bank) {
    bank_doc.push_back({{"prompt_id", p.prompt_id}, {"category", to_string(p.category)}, {"text", p.text},
                        {"negative_text", p.negative_text}});
    texts.insert(p.text);
    negative_ok = negative_ok && p.negative_text == "photo with the style of painting, comics, drawing, or containing text";
  }
  for (auto s : {"xyz person wearing scarf", "close photo of xyz person at the beach", "skeptical xyz person",
                 "full body xyz person with accurate details of face in an indoor place"})
    o.require(texts.count(s) == 1, std::string("missing prompt: ") + s);
  o.require(negative_ok, "negative prompt");
  o.require(bank_doc == json::parse(read_file_text(golden / "prompt_bank.json")), "prompt bank golden file");

  std::vector<SampleRecord> data;
  for (int i = 0; i < 70; ++i)
    for (int k = 0; k < 10; ++k) {
      SampleRecord s;
      s.identity_id = "id" + std::to_string(i);
      s.sample_id = s.identity_id + "_" + std::to_string(k);
      data.push_back(s);
    }
  const auto set = sample_comparisons(data, SamplingParams{}, 11);
  std::map<std::string, int> mated, nonmated;
  auto owner = [](const std::string& s) { return s.substr(0, s.find('_')); };
  for (const auto& p : set.mated) ++mated[owner(p.a)];
  for (const auto& p : set.nonmated) ++nonmated[owner(p.a)];
  bool per_identity = mated.size() == 70 && nonmated.size() == 70;
  for (const auto& [id, n] : mated) per_identity = per_identity && n == 20;
  for (const auto& [id, n] : nonmated) per_identity = per_identity && n == 20;
  o.require(per_identity, "20 mated + 20 non-mated per identity");
  if (o.ok) o.detail = "70 groups, 700 identities, 6 variations, job and prompt bank match golden files, 20+20 pairs";
  return o;
}

Outcome filter_semantics() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t d = 32, identities = 100, n = 10000;

  FilterInputs in;
  std::vector<SampleRecord> samples;
  for (std::size_t k = 0; k < identities; ++k) {
    GanReference ref;
    const auto center = gaussian(rng, d);
    for (int i = 0; i < 6; ++i) {
      auto v = center;
      const auto e = gaussian(rng, d, 0.4);
      for (std::size_t j = 0; j < d; ++j) v[j] += e[j];
      ref.embeddings.emplace_back(v);
      ref.genders.push_back(k % 2 ? "Female" : "Male");
    }
    in.gan["id" + std::to_string(k)] = ref;
  }
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord s;
    s.identity_id = "id" + std::to_string(i % identities);
    s.sample_id = "s" + std::to_string(i);
    s.embedding_ref = s.sample_id;
    const auto& ref = in.gan[s.identity_id].embeddings[0];
    auto v = gaussian(rng, d);
    const double pull = 4.0 * u(rng);
    for (std::size_t j = 0; j < d; ++j) v[j] += pull * ref.values()[j] / ref.norm();
    in.embeddings.emplace(s.sample_id, EmbeddingVector(v));
    if (u(rng) > 0.05) in.face_counts[s.sample_id] = 1;
    in.gender_labels[s.sample_id] = u(rng) < 0.05 ? "Other" : in.gan[s.identity_id].gender();
    samples.push_back(s);
  }

  std::map<double, std::set<std::string>> kept;
  std::map<double, std::vector<SampleRecord>> filtered;
  for (double t : {0.4, 0.3, 0.2}) {
    auto s = samples;
    apply_filters(s, in, FilterConfig{t});
    for (const auto& x : s) {
      if (x.verdict == Verdict::kept) kept[t].insert(x.sample_id);
      // a detection failure is never scored
      o.require(!(x.verdict == Verdict::dropped_detection && x.ip_score), "ip_score on an undetected sample");
      // identity failures never reach the gender stage
      o.require(!(x.verdict == Verdict::dropped_identity && !x.gender_label.empty()), "gender checked after drop");
    }
    auto again = s;
    apply_filters(again, in, FilterConfig{t});
    o.require(again == s, "filter not idempotent");
    filtered[t] = std::move(s);
  }
  auto subset = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  o.require(subset(kept[0.4], kept[0.3]) && subset(kept[0.3], kept[0.2]), "kept sets not nested");

  // Boundary equality: a threshold equal to a sample's score keeps that sample.
  std::size_t equality_checked = 0;
  for (const auto& x : filtered[0.2]) {
    if (!x.ip_score || equality_checked >= 200) continue;
    std::vector<SampleRecord> one = {samples[std::stoul(x.sample_id.substr(1))]};
    apply_filters(one, in, FilterConfig{*x.ip_score});
    o.require(one[0].verdict != Verdict::dropped_identity, "sample at the threshold was dropped");
    ++equality_checked;
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 5.0, fmt("runtime %.2fs", elapsed));
  if (o.ok)
    o.detail = std::to_string(n) + " samples, kept " + std::to_string(kept[0.4].size()) + " / " +
               std::to_string(kept[0.3].size()) + " / " + std::to_string(kept[0.2].size()) +
               fmt(" at t_ip 0.4/0.3/0.2, %.2fs", elapsed);
  return o;
}

double sweep_eer(const std::vector<double>& mated, const std::vector<double>& nonmated) {
  std::vector<double> all(mated);
  all.insert(all.end(), nonmated.begin(), nonmated.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> cuts = {all.front() - 1.0, all.back() + 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) cuts.push_back(0.5 * (all[i] + all[i + 1]));
  double best_gap = 2.0, best = 0.5;
  for (double t : cuts) {
    double fnmr = 0, fmr = 0;
    for (double s : mated) fnmr += s < t;
    for (double s : nonmated) fmr += s >= t;
    fnmr /= double(mated.size());
    fmr /= double(nonmated.size());
    if (std::abs(fnmr - fmr) < best_gap) {
      best_gap = std::abs(fnmr - fmr);
      best = 0.5 * (fnmr + fmr);
    }
  }
  return best;
}

Outcome metric_oracles() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto p = ScoreDistribution::from_scores({-0.5, 0.5}, 2);
  const auto q = ScoreDistribution::from_scores({-0.5, 0.5, 0.5, 0.5}, 2);
  o.require(std::abs(kl_divergence(p, p, 2)) < 1e-9, "KL(P,P)");
  o.require(std::abs(kl_divergence(p, q, 2) - 0.14384) < 1e-4, fmt("two-bin KL %.6f", kl_divergence(p, q, 2)));
  o.require(compute_eer(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}).eer == 0.0, "separable EER");
  const std::vector<double> m4 = {0.6, 0.4}, n4 = {0.5, 0.3};
  o.require(std::abs(compute_eer(m4, n4).eer - 0.5) < 1e-12 && std::abs(sweep_eer(m4, n4) - 0.5) < 1e-12,
            "four-score EER");

  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> size(1, 100);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_excess = -1.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> m(size(rng)), n(size(rng));
    const double shift = 0.5 * (trial % 6);
    for (auto& x : m) x = g(rng) + shift;
    for (auto& x : n) x = g(rng);
    const double tol = 1.0 / (2.0 * double(std::min(m.size(), n.size())));
    worst_excess = std::max(worst_excess, std::abs(compute_eer(m, n).eer - sweep_eer(m, n)) - tol);
  }
  o.require(worst_excess <= 1e-12, fmt("EER deviates from sweep beyond tolerance by %.3g", worst_excess));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 5.0, fmt("runtime %.2fs", elapsed));
  if (o.ok) o.detail = fmt("KL hand case %.5f, 100 random EER instances within tolerance, %.2fs", kl_divergence(p, q, 2), elapsed);
  return o;
}

Outcome latv_fuzzing() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::size_t cases = 0;
  auto expect_format_error = [&](const std::vector<std::byte>& bytes, const std::string& what) {
    ++cases;
    try {
      VectorStore::parse(bytes);
      o.require(false, what + ": parsed without error");
    } catch (const FormatError&) {
    } catch (const std::exception& e) {
      o.require(false, what + ": unexpected " + e.what());
    }
  };
  for (int round = 0; round < 50; ++round) {
    const std::uint32_t dim = 1 + rng() % 16, count = 1 + rng() % 8;
    VectorStore s(dim);
    for (std::uint32_t r = 0; r < count; ++r) s.append(gaussian(rng, dim));
    const auto good = s.serialize();
    for (std::size_t cut = 0; cut < good.size(); ++cut)
      expect_format_error({good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut)}, "truncation");
    auto extra = good;
    extra.push_back(std::byte{0});
    expect_format_error(extra, "trailing byte");
    for (int b = 0; b < 4; ++b) {
      auto bad = good;
      bad[b] = std::byte(std::to_integer<int>(bad[b]) ^ 0x20);
      expect_format_error(bad, "bad magic");
    }
    for (std::size_t field : {8u, 12u}) {
      auto bad = good;
      const std::uint32_t delta = 1 + rng() % 5;
      bad[field] = std::byte(std::to_integer<int>(bad[field]) + int(delta));
      expect_format_error(bad, field == 8 ? "count mismatch" : "dim mismatch");
    }
    auto version = good;
    version[4] = std::byte(2);
    expect_format_error(version, "version");
  }
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::byte> junk(rng() % 64);
    for (auto& b : junk) b = std::byte(rng() & 0xff);
    ++cases;
    try {
      const auto s = VectorStore::parse(junk);
      o.require(s.serialize() == junk, "random bytes misread");
    } catch (const FormatError&) {
    } catch (const std::exception& e) {
      o.require(false, std::string("random bytes: unexpected ") + e.what());
    }
  }
  if (o.ok) o.detail = std::to_string(cases) + " malformed inputs, all structured FormatError";
  return o;
}

int run_cli(const std::string& cli, const std::vector<std::string>& args) {
  std::string cmd = "'" + cli + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree_digests(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != ".lock")
      out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
  return out;
}

struct EndToEnd {
  bool ran = false;
  double seconds = 0.0;
  fs::path first, second;
};

EndToEnd run_twice(const std::string& cli, const fs::path& config, const fs::path& scratch) {
  EndToEnd r;
  r.first = scratch / "run_a";
  r.second = scratch / "run_b";
  fs::remove_all(r.first);
  fs::remove_all(r.second);
  const auto t0 = Clock::now();
  const int a = run_cli(cli, {"run", "--config", config.string(), "--run-dir", r.first.string()});
  r.seconds = seconds_since(t0);
  const int b = run_cli(cli, {"run", "--config", config.string(), "--run-dir", r.second.string()});
  r.ran = a == 0 && b == 0;
  return r;
}

Outcome table3_trend(const EndToEnd& e2e) {
  Outcome o;
  o.require(e2e.ran, "CLI run failed");
  if (!o.ok) return o;
  const auto summary = json::parse(read_file_text(e2e.first / "eval" / "summary.json"));
  const auto cfg = json::parse(read_file_text(e2e.first / "manifest.json")).at("config");
  o.require(cfg.at("pool_size") == 2560 && cfg.at("per_group") == 2 && cfg.at("simworld").at("outlier_fraction") == 0.1,
            "smoke configuration differs from the acceptance setup");
  const double m40 = summary.at("diffusion_tip0.40").at("mated_mean");
  const double m30 = summary.at("diffusion_tip0.30").at("mated_mean");
  const double m20 = summary.at("diffusion_tip0.20").at("mated_mean");
  const double gan = summary.at("gan").at("mated_mean");
  o.require(summary.at("gan").at("n_identities") == 140, "expected 140 identities");
  o.require(m40 > m30 && m30 > m20, fmt("mated means not decreasing: %.4f %.4f %.4f", m40, m30, m20));
  o.require(gan > m40, fmt("GAN mated mean %.4f not above diffusion %.4f", gan, m40));
  o.require(e2e.seconds < 120.0, fmt("runtime %.1fs", e2e.seconds));
  if (o.ok)
    o.detail = fmt("diffusion mated means %.4f > %.4f > %.4f", m40, m30, m20) +
               fmt(", GAN %.4f, end-to-end %.1fs", gan, e2e.seconds);
  return o;
}

Outcome determinism(const EndToEnd& e2e) {
  Outcome o;
  o.require(e2e.ran, "CLI run failed");
  if (!o.ok) return o;
  const auto a = tree_digests(e2e.first), b = tree_digests(e2e.second);
  o.require(a.size() == b.size(), "different file sets");
  std::size_t differing = 0;
  std::string first_diff;
  for (const auto& [path, digest] : a) {
    const auto it = b.find(path);
    if (it == b.end() || it->second != digest) {
      if (!differing++) first_diff = path;
    }
  }
  o.require(differing == 0, std::to_string(differing) + " differing files, first " + first_diff);
  o.require(a.count("manifest.json") && a.count("eval/report.csv"), "manifest or report missing");
  if (o.ok) o.detail = std::to_string(a.size()) + " files byte-identical across two CLI runs, manifest included";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 5) {
    std::cerr << "usage: acceptance <latentforge-cli> <smoke-config> <golden-dir> <scratch-dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path config = argv[2], golden = argv[3], scratch = argv[4];
  fs::create_directories(scratch);

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  EndToEnd e2e;
  bool e2e_done = false;
  auto end_to_end = [&]() -> const EndToEnd& {
    if (!e2e_done) {
      e2e = run_twice(cli, config, scratch);
      e2e_done = true;
    }
    return e2e;
  };

  criteria.emplace_back("edit algebra", algebra_suite);
  criteria.emplace_back("boundary recovery", boundary_recovery);
  criteria.emplace_back("protocol constants", [&] { return protocol_constants(golden); });
  criteria.emplace_back("filter semantics", filter_semantics);
  criteria.emplace_back("score trend across t_ip", [&] { return table3_trend(end_to_end()); });
  criteria.emplace_back("metric oracles", metric_oracles);
  criteria.emplace_back("run determinism", [&] { return determinism(end_to_end()); });
  criteria.emplace_back("LATV format strictness", latv_fuzzing);

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.ok;
    std::printf("%s  %-26s %s\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
