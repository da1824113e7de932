#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "latentforge/errors.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/pipeline.hpp"
#include "latentforge/taxonomy.hpp"

namespace latentforge {

using nlohmann::json;

namespace {

// Field reader that reports errors by JSON path and rejects unknown keys.
class Fields {
 public:
  Fields(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  std::string sub(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : node_.items())
      if (!seen_.count(k)) throw ConfigError(path_ + "." + k + ": unknown field");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field + ": " + msg);
}

}  // namespace

void RunConfig::validate() const {
  require(backend == "simworld" || backend == "bridge", "backend", "must be 'simworld' or 'bridge'");
  require(pool_size >= 1, "pool_size", "must be >= 1");
  require(quality_percentile >= 0.0 && quality_percentile < 1.0, "quality_percentile", "must be in [0, 1)");
  require(per_group >= 1, "per_group", "must be >= 1");
  require(samples_per_prompt >= 1, "prompts.samples_per_prompt", "must be >= 1");
  require(t_ip > -1.0 && t_ip < 1.0, "t_ip", "must be in (-1, 1)");
  for (double t : t_ip_sweep) require(t > -1.0 && t < 1.0, "t_ip_sweep", "values must be in (-1, 1)");
  require(eval.bins >= 2, "eval.bins", "must be >= 2");
  require(eval.epsilon >= 0.0, "eval.epsilon", "must be >= 0");
  require(eval.sampling.per_identity >= 2, "eval.per_identity", "must be >= 2");
  require(eval.gan_per_identity >= 2, "eval.gan_per_identity", "must be >= 2");
  require(std::isfinite(quality_threshold), "quality_threshold", "must be finite");
  require(genders.size() == 2, "genders", "exactly two names are required");
  require(sim.sigma_d_min >= 0.0 && sim.sigma_d_max >= sim.sigma_d_min, "simworld.sigma_d", "need 0 <= min <= max");
  for (auto [v, name] : {std::pair{sim.outlier_fraction, "outlier_fraction"}, {sim.no_face_fraction, "no_face_fraction"},
                         {sim.gender_flip_fraction, "gender_flip_fraction"}})
    require(v >= 0.0 && v <= 1.0, std::string("simworld.") + name, "must be in [0, 1]");
  svm.validate();
  variation_spec.validate();
  std::set<std::string> refs;
  for (const auto& r : eval.references) require(refs.insert(r.name).second, "eval.references", "duplicate name " + r.name);

  std::set<std::string> evaluated = {"gan"};
  auto add_threshold = [&](double t) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "diffusion_tip%.2f", t);
    evaluated.insert(buf);
  };
  add_threshold(t_ip);
  for (double t : t_ip_sweep) add_threshold(t);
  for (const auto& r : eval.references)
    require(!r.scores.empty() || evaluated.count(r.name), "eval.references",
            "'" + r.name + "' is neither an evaluated dataset nor given a scores file");

  for (const auto& recipe : variation_spec.recipes)
    for (const auto& [attr, alpha] : recipe.edits)
      if (attr.rfind("expression:", 0) == 0) {
        const auto e = attr.substr(11);
        require(std::find(taxonomy::kExpressions.begin(), taxonomy::kExpressions.end(), e) !=
                    taxonomy::kExpressions.end(),
                "variation_spec", "unknown expression '" + e + "'");
      }

  require(!races.empty() && !age_bins.empty(), "races/age_bins", "must be nonempty");
  if (backend == "simworld")
    for (const auto& r : races)
      require(std::find(taxonomy::kRaces.begin(), taxonomy::kRaces.end(), r) != taxonomy::kRaces.end(), "races",
              "simworld has no boundary for race '" + r + "'");
  if (backend == "bridge") {
    require(!bridge.pool_dir.empty(), "bridge.pool_dir", "required for the bridge backend");
    require(!bridge.gan_dir.empty(), "bridge.gan_dir", "required for the bridge backend");
    require(!bridge.diffusion_dir.empty(), "bridge.diffusion_dir", "required for the bridge backend");
  }
}

json RunConfig::to_json() const {
  json recipes = json::array();
  for (const auto& r : variation_spec.recipes) {
    json edits = json::array();
    for (const auto& [attr, alpha] : r.edits) edits.push_back({{"attribute", attr}, {"alpha", alpha}});
    recipes.push_back({{"tag", r.tag}, {"edits", edits}});
  }
  json templates = json::array();
  for (const auto& t : prompt_templates) templates.push_back({{"category", to_string(t.category)}, {"text", t.text}});
  json refs = json::array();
  for (const auto& r : eval.references) refs.push_back({{"name", r.name}, {"scores", r.scores.string()}});
  return {
      {"backend", backend},
      {"seed", seed},
      {"pool_size", pool_size},
      {"quality_percentile", quality_percentile},
      {"races", races},
      {"age_bins", age_bins},
      {"genders", genders},
      {"per_group", per_group},
      {"alphas",
       {{"yaw", alphas.yaw}, {"pitch", alphas.pitch}, {"expression", alphas.expression},
        {"race", alphas.race}, {"age", alphas.age}, {"gender", alphas.gender}}},
      {"variation_spec", recipes},
      {"svm",
       {{"max_train", svm.max_train}, {"holdout_fraction", svm.holdout_fraction}, {"l2_lambda", svm.l2_lambda},
        {"epochs", svm.epochs}, {"learning_rate", svm.learning_rate}}},
      {"finetune",
       {{"regularization_images", finetune.regularization_images}, {"epochs", finetune.epochs},
        {"token", finetune.token}, {"class_name", finetune.class_name},
        {"train_text_encoder", finetune.train_text_encoder}}},
      {"prompts", {{"samples_per_prompt", samples_per_prompt}, {"templates", templates}}},
      {"t_ip", t_ip},
      {"t_ip_sweep", t_ip_sweep},
      {"eval",
       {{"per_identity", eval.sampling.per_identity}, {"mated", eval.sampling.mated_per_id},
        {"nonmated", eval.sampling.nonmated_per_id}, {"gan_per_identity", eval.gan_per_identity},
        {"bins", eval.bins}, {"epsilon", eval.epsilon}, {"references", refs}}},
      {"quality_threshold", quality_threshold},
      {"simworld",
       {{"dim", sim.dim}, {"embed_dim", sim.embed_dim}, {"noise_sigma", sim.noise_sigma},
        {"child_fraction", sim.child_fraction}, {"sigma_d", {sim.sigma_d_min, sim.sigma_d_max}},
        {"outlier_fraction", sim.outlier_fraction}, {"no_face_fraction", sim.no_face_fraction},
        {"gender_flip_fraction", sim.gender_flip_fraction}}},
      {"bridge",
       {{"pool_dir", bridge.pool_dir.string()}, {"gan_dir", bridge.gan_dir.string()},
        {"diffusion_dir", bridge.diffusion_dir.string()}}},
  };
}

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line number
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ConfigError("config parse error at line " + std::to_string(line) + ": " + e.what());
  }

  RunConfig c;
  c.races = taxonomy::to_strings(taxonomy::kRaces);
  c.age_bins = taxonomy::to_strings(taxonomy::kAdultAgeBins);
  c.genders = taxonomy::to_strings(taxonomy::kGenders);
  c.prompt_templates = default_prompt_templates();

  Fields top(doc, "config");
  top.read("backend", c.backend);
  top.read("seed", c.seed);
  top.read("pool_size", c.pool_size);
  top.read("quality_percentile", c.quality_percentile);
  top.read("races", c.races);
  top.read("age_bins", c.age_bins);
  top.read("genders", c.genders);
  top.read("per_group", c.per_group);
  top.read("t_ip", c.t_ip);
  top.read("t_ip_sweep", c.t_ip_sweep);
  top.read("quality_threshold", c.quality_threshold);

  if (const auto* a = top.child("alphas")) {
    Fields f(*a, top.sub("alphas"));
    f.read("yaw", c.alphas.yaw);
    f.read("pitch", c.alphas.pitch);
    f.read("expression", c.alphas.expression);
    f.read("race", c.alphas.race);
    f.read("age", c.alphas.age);
    f.read("gender", c.alphas.gender);
    f.finish();
  }
  c.variation_spec = VariationSpec::default_spec(c.alphas);
  if (const auto* v = top.child("variation_spec")) {
    if (!v->is_array()) throw ConfigError("config.variation_spec: expected an array");
    c.variation_spec.recipes.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string path = top.sub("variation_spec") + "[" + std::to_string(i) + "]";
      Fields f((*v)[i], path);
      VariationRecipe r;
      f.read("tag", r.tag);
      json edits = json::array();
      f.read("edits", edits);
      for (std::size_t k = 0; k < edits.size(); ++k) {
        Fields e(edits[k], path + ".edits[" + std::to_string(k) + "]");
        std::string attr;
        double alpha = 0.0;
        e.read("attribute", attr);
        e.read("alpha", alpha);
        e.finish();
        r.edits.emplace_back(attr, alpha);
      }
      f.finish();
      c.variation_spec.recipes.push_back(std::move(r));
    }
  }
  if (const auto* s = top.child("svm")) {
    Fields f(*s, top.sub("svm"));
    f.read("max_train", c.svm.max_train);
    f.read("holdout_fraction", c.svm.holdout_fraction);
    f.read("l2_lambda", c.svm.l2_lambda);
    f.read("epochs", c.svm.epochs);
    f.read("learning_rate", c.svm.learning_rate);
    f.finish();
  }
  if (const auto* s = top.child("finetune")) {
    Fields f(*s, top.sub("finetune"));
    f.read("regularization_images", c.finetune.regularization_images);
    f.read("epochs", c.finetune.epochs);
    f.read("token", c.finetune.token);
    f.read("class_name", c.finetune.class_name);
    f.read("train_text_encoder", c.finetune.train_text_encoder);
    f.finish();
  }
  if (const auto* s = top.child("prompts")) {
    Fields f(*s, top.sub("prompts"));
    f.read("samples_per_prompt", c.samples_per_prompt);
    if (const auto* t = f.child("templates")) {
      c.prompt_templates.clear();
      for (std::size_t i = 0; i < t->size(); ++i) {
        Fields tf((*t)[i], f.sub("templates") + "[" + std::to_string(i) + "]");
        std::string category, text;
        tf.read("category", category);
        tf.read("text", text);
        tf.finish();
        try {
          c.prompt_templates.push_back({parse_prompt_category(category), text});
        } catch (const ConfigError& e) {
          throw ConfigError(f.sub("templates") + "[" + std::to_string(i) + "]: " + e.what());
        }
      }
    }
    f.finish();
  }
  if (const auto* s = top.child("eval")) {
    Fields f(*s, top.sub("eval"));
    f.read("per_identity", c.eval.sampling.per_identity);
    f.read("mated", c.eval.sampling.mated_per_id);
    f.read("nonmated", c.eval.sampling.nonmated_per_id);
    f.read("gan_per_identity", c.eval.gan_per_identity);
    f.read("bins", c.eval.bins);
    f.read("epsilon", c.eval.epsilon);
    if (const auto* refs = f.child("references")) {
      for (std::size_t i = 0; i < refs->size(); ++i) {
        const auto& r = (*refs)[i];
        if (r.is_string()) {
          c.eval.references.push_back({r.get<std::string>(), {}});
          continue;
        }
        Fields rf(r, f.sub("references") + "[" + std::to_string(i) + "]");
        ReferenceSpec spec;
        std::string scores;
        rf.read("name", spec.name);
        rf.read("scores", scores);
        rf.finish();
        spec.scores = scores;
        c.eval.references.push_back(std::move(spec));
      }
    }
    f.finish();
  }
  if (const auto* s = top.child("simworld")) {
    Fields f(*s, top.sub("simworld"));
    f.read("dim", c.sim.dim);
    f.read("embed_dim", c.sim.embed_dim);
    f.read("noise_sigma", c.sim.noise_sigma);
    f.read("child_fraction", c.sim.child_fraction);
    std::vector<double> sigma_d = {c.sim.sigma_d_min, c.sim.sigma_d_max};
    f.read("sigma_d", sigma_d);
    if (sigma_d.size() != 2) throw ConfigError(f.sub("sigma_d") + ": expected [min, max]");
    c.sim.sigma_d_min = sigma_d[0];
    c.sim.sigma_d_max = sigma_d[1];
    f.read("outlier_fraction", c.sim.outlier_fraction);
    f.read("no_face_fraction", c.sim.no_face_fraction);
    f.read("gender_flip_fraction", c.sim.gender_flip_fraction);
    f.finish();
  }
  if (const auto* s = top.child("bridge")) {
    Fields f(*s, top.sub("bridge"));
    std::string pool, gan, diffusion;
    f.read("pool_dir", pool);
    f.read("gan_dir", gan);
    f.read("diffusion_dir", diffusion);
    f.finish();
    c.bridge = {pool, gan, diffusion};
  }
  top.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_run_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace latentforge
