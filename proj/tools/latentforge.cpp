// latentforge: run the dataset pipeline or use individual modules.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "latentforge/boundary_training.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/evaluation.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/latent_geometry.hpp"
#include "latentforge/latv.hpp"
#include "latentforge/pipeline.hpp"
#include "latentforge/pool_io.hpp"
#include "latentforge/simworld.hpp"

namespace fs = std::filesystem;
using namespace latentforge;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

WorldConfig world_config(std::uint64_t seed, std::size_t dim, std::size_t embed_dim, double noise) {
  WorldConfig wc;
  wc.seed = seed;
  wc.dim = dim;
  wc.embed_dim = embed_dim;
  wc.noise_sigma = noise;
  return wc;
}

AttributeBoundary load_boundary(const fs::path& p) {
  try {
    return AttributeBoundary::from_json(nlohmann::json::parse(read_file_text(p)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic face-dataset pipeline toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "execute pipeline stages in a run directory");
  fs::path config_path, run_dir;
  std::string stage_list;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> t_ip;
  run->add_option("--config", config_path, "run configuration (JSON)")->required();
  run->add_option("--run-dir", run_dir, "output directory")->required();
  run->add_option("--stages", stage_list, "comma-separated subset of stages");
  run->add_option("--seed-override", seed_override, "replace the configured seed");
  run->add_option("--t-ip", t_ip, "identity-preservation threshold");

  // sim
  auto* sim = app.add_subcommand("sim", "simulated world artifacts");
  sim->require_subcommand(1);
  std::uint64_t sim_seed = 0;
  std::size_t sim_dim = 64, sim_embed = 32, sim_n = 10000;
  double sim_noise = 0.0;
  fs::path sim_out;
  auto* sim_world = sim->add_subcommand("world", "write planted boundaries as JSON");
  auto* sim_pool = sim->add_subcommand("pool", "write a labeled latent pool");
  for (auto* c : {sim_world, sim_pool}) {
    c->add_option("--seed", sim_seed);
    c->add_option("--dim", sim_dim);
    c->add_option("--embed-dim", sim_embed);
    c->add_option("--noise", sim_noise);
    c->add_option("--out", sim_out)->required();
  }
  sim_pool->add_option("-n,--count", sim_n);

  // train-boundary
  auto* train = app.add_subcommand("train-boundary", "train one attribute boundary from a pool");
  fs::path pool_dir, boundary_out;
  std::string attribute;
  SvmConfig svm;
  train->add_option("--pool", pool_dir)->required();
  train->add_option("--attribute", attribute)->required();
  train->add_option("--out", boundary_out)->required();
  train->add_option("--epochs", svm.epochs);
  train->add_option("--lambda", svm.l2_lambda);
  train->add_option("--seed", svm.seed);

  // edit
  auto* edit = app.add_subcommand("edit", "shift or neutralize latents along a boundary");
  fs::path edit_in, edit_boundary, edit_out;
  double alpha = 0.0;
  bool do_neutralize = false;
  edit->add_option("--latents", edit_in)->required();
  edit->add_option("--boundary", edit_boundary)->required();
  edit->add_option("--out", edit_out)->required();
  auto* alpha_opt = edit->add_option("--alpha", alpha);
  auto* neutral_opt = edit->add_flag("--neutralize", do_neutralize);
  alpha_opt->excludes(neutral_opt);

  // illumination
  auto* illum = app.add_subcommand("illumination", "left/right brightness score of a PGM image");
  fs::path pgm;
  illum->add_option("image", pgm)->required();

  // eer
  auto* eer = app.add_subcommand("eer", "EER and score statistics from a series,score CSV");
  fs::path score_csv;
  eer->add_option("scores", score_csv)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = load_run_config(config_path);
      if (seed_override) cfg.seed = *seed_override;
      if (t_ip) cfg.t_ip = *t_ip;
      const auto summary = execute(cfg, run_dir, split_list(stage_list));
      std::cout << "executed " << summary.executed.size() << " stage(s), " << summary.up_to_date.size()
                << " up to date\n";
    } else if (sim_world->parsed()) {
      const auto world = World::create(world_config(sim_seed, sim_dim, sim_embed, sim_noise));
      for (const auto& a : world.attributes()) {
        std::string name = a;
        std::replace(name.begin(), name.end(), ':', '.');
        write_file_atomic(sim_out / (name + ".json"), world.planted_boundary(a).to_json().dump(2) + "\n");
      }
      std::cout << world.attributes().size() << " planted boundaries written to " << sim_out.string() << "\n";
    } else if (sim_pool->parsed()) {
      const auto world = World::create(world_config(sim_seed, sim_dim, sim_embed, sim_noise));
      save_pool(sim_out, sample_labeled_latents(world, sim_n, sim_seed));
      std::cout << sim_n << " samples written to " << sim_out.string() << "\n";
    } else if (train->parsed()) {
      const auto samples = load_pool(pool_dir);
      LabeledPool pool{attribute, {}, {}};
      for (const auto& s : samples) {
        const auto it = s.scores.find(attribute);
        if (it == s.scores.end()) throw DataError("pool has no scores for '" + attribute + "'");
        pool.latents.push_back(s.latent);
        pool.scores.push_back(it->second);
      }
      const auto split = select_extremes(pool, default_per_side(pool.latents.size(), svm));
      std::vector<LatentVector> pos, neg;
      for (auto i : split.positives) pos.push_back(pool.latents[i]);
      for (auto i : split.negatives) neg.push_back(pool.latents[i]);
      const auto b = train_linear_boundary(attribute, pos, neg, svm);
      write_file_atomic(boundary_out, b.to_json().dump(2) + "\n");
      std::printf("%s: accuracy %.4f, average distance %.4f\n", attribute.c_str(), b.meta().validation_accuracy,
                  b.meta().average_distance);
    } else if (edit->parsed()) {
      if (!do_neutralize && alpha_opt->count() == 0) throw ConfigError("edit needs --alpha or --neutralize");
      const auto in = VectorStore::load(edit_in);
      const auto b = load_boundary(edit_boundary);
      VectorStore out(in.dim());
      for (std::size_t i = 0; i < in.count(); ++i) {
        const auto w = in.latent(i);
        out.append((do_neutralize ? neutralize(w, b) : transform(w, b, alpha)).values());
      }
      out.save(edit_out);
      std::cout << out.count() << " latents written to " << edit_out.string() << "\n";
    } else if (illum->parsed()) {
      const auto img = parse_pgm(read_file_bytes(pgm));
      std::printf("%.6f\n", illumination_score(img.pixels, img.width, img.height));
    } else if (eer->parsed()) {
      static constexpr std::string_view header[] = {"series", "score"};
      const auto table = read_csv(score_csv, header);
      std::vector<double> mated, nonmated;
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        const std::string where = score_csv.string() + ":" + std::to_string(table.line_numbers[i]);
        if (r.size() != 2) throw DataError(where + ": expected series,score");
        (r[0] == "mated" ? mated : nonmated).push_back(parse_double(r[1], where));
      }
      const auto m = ScoreDistribution::from_scores(mated), n = ScoreDistribution::from_scores(nonmated);
      const auto e = compute_eer(mated, nonmated);
      std::printf("mated %s  nonmated %s  eer %.4f @ %.4f\n", format_mean_std(m.mean, m.std).c_str(),
                  format_mean_std(n.mean, n.std).c_str(), e.eer, e.threshold);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
