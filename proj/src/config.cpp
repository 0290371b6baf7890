#include "scdiff/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "scdiff/errors.hpp"

namespace scdiff {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::string& section,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ParseError("unknown key \"" + item.key() + "\" in " + section);
  }
}

void require_object(const json& obj, const std::string& section) {
  if (!obj.is_object())
    throw ParseError(section + " must be a JSON object");
}

template <typename T>
T get_as(const json& obj, const std::string& section, const char* key,
         T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("bad value for " + section + "." + key + ": " + e.what());
  }
}

Vector get_per_gene(const json& obj, const std::string& section,
                    const char* key, Index n_genes) {
  if (!obj.contains(key))
    throw ParseError(section + " is missing required key \"" + key + "\"");
  const json& v = obj.at(key);
  Vector out(n_genes);
  try {
    if (v.is_number()) {
      out.setConstant(v.get<double>());
      return out;
    }
    if (!v.is_array() || static_cast<Index>(v.size()) != n_genes)
      throw ParseError(section + "." + key +
                       " must be a number or an array of length n_genes");
    for (Index g = 0; g < n_genes; ++g)
      out(g) = v.at(static_cast<std::size_t>(g)).get<double>();
  } catch (const json::exception& e) {
    throw ParseError("bad value for " + section + "." + key + ": " + e.what());
  }
  return out;
}

void parse_data(const json& obj, DataConfig& out) {
  require_object(obj, "data");
  reject_unknown_keys(obj, "data", {"path", "top_k", "negation"});
  out.path = get_as<std::string>(obj, "data", "path", out.path);
  out.top_k = get_as<Index>(obj, "data", "top_k", out.top_k);
  out.negation = get_as<double>(obj, "data", "negation", out.negation);
}

void parse_schedule(const json& obj, ScheduleConfig& out) {
  require_object(obj, "schedule");
  reject_unknown_keys(obj, "schedule", {"T", "beta_start", "beta_end"});
  out.T = get_as<int>(obj, "schedule", "T", out.T);
  out.beta_start = get_as<double>(obj, "schedule", "beta_start", out.beta_start);
  out.beta_end = get_as<double>(obj, "schedule", "beta_end", out.beta_end);
}

void parse_model(const json& obj, ModelConfig& out) {
  require_object(obj, "model");
  reject_unknown_keys(
      obj, "model",
      {"patch_size", "hidden_size", "n_blocks", "n_heads", "mlp_ratio"});
  out.patch_size = get_as<Index>(obj, "model", "patch_size", out.patch_size);
  out.hidden_size = get_as<Index>(obj, "model", "hidden_size", out.hidden_size);
  out.n_blocks = get_as<Index>(obj, "model", "n_blocks", out.n_blocks);
  out.n_heads = get_as<Index>(obj, "model", "n_heads", out.n_heads);
  out.mlp_ratio = get_as<double>(obj, "model", "mlp_ratio", out.mlp_ratio);
}

void parse_train(const json& obj, TrainConfig& out) {
  require_object(obj, "train");
  reject_unknown_keys(obj, "train",
                      {"epochs", "batch_size", "learning_rate", "beta1",
                       "beta2", "adam_eps", "seed", "checkpoint_every",
                       "log_every"});
  out.epochs = get_as<int>(obj, "train", "epochs", out.epochs);
  out.batch_size = get_as<int>(obj, "train", "batch_size", out.batch_size);
  out.learning_rate =
      get_as<double>(obj, "train", "learning_rate", out.learning_rate);
  out.beta1 = get_as<double>(obj, "train", "beta1", out.beta1);
  out.beta2 = get_as<double>(obj, "train", "beta2", out.beta2);
  out.adam_eps = get_as<double>(obj, "train", "adam_eps", out.adam_eps);
  out.seed = get_as<std::uint64_t>(obj, "train", "seed", out.seed);
  out.checkpoint_every =
      get_as<int>(obj, "train", "checkpoint_every", out.checkpoint_every);
  out.log_every = get_as<int>(obj, "train", "log_every", out.log_every);
}

void parse_sample(const json& obj, SampleConfig& out) {
  require_object(obj, "sample");
  reject_unknown_keys(obj, "sample",
                      {"method", "n_steps", "eta", "n_samples", "seed"});
  if (obj.contains("method"))
    out.method = sample_method_from_string(
        get_as<std::string>(obj, "sample", "method", "ddpm"));
  out.n_steps = get_as<int>(obj, "sample", "n_steps", out.n_steps);
  out.eta = get_as<double>(obj, "sample", "eta", out.eta);
  out.n_samples = get_as<Index>(obj, "sample", "n_samples", out.n_samples);
  out.seed = get_as<std::uint64_t>(obj, "sample", "seed", out.seed);
}

GeneratorSpec parse_generator(const json& obj) {
  require_object(obj, "generator");
  reject_unknown_keys(
      obj, "generator",
      {"n_genes", "n_cells", "components", "dropout_prob", "seed"});
  GeneratorSpec spec;
  spec.n_genes = get_as<Index>(obj, "generator", "n_genes", Index{0});
  spec.n_cells = get_as<Index>(obj, "generator", "n_cells", Index{0});
  spec.seed = get_as<std::uint64_t>(obj, "generator", "seed", 0);
  if (spec.n_genes <= 0)
    throw ParseError("generator.n_genes must be a positive integer");
  spec.dropout_prob =
      get_per_gene(obj, "generator", "dropout_prob", spec.n_genes);
  if (!obj.contains("components") || !obj.at("components").is_array() ||
      obj.at("components").empty())
    throw ParseError("generator.components must be a nonempty array");
  for (const json& c : obj.at("components")) {
    const std::string section =
        "generator.components[" + std::to_string(spec.components.size()) + "]";
    require_object(c, section);
    reject_unknown_keys(c, section, {"weight", "log_mean", "log_sd"});
    MixtureComponent comp;
    comp.weight = get_as<double>(c, section, "weight", 1.0);
    comp.log_mean = get_per_gene(c, section, "log_mean", spec.n_genes);
    comp.log_sd = get_per_gene(c, section, "log_sd", spec.n_genes);
    spec.components.push_back(std::move(comp));
  }
  return spec;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  require_object(doc, "config");
  reject_unknown_keys(
      doc, "config",
      {"data", "schedule", "model", "train", "sample", "generator"});

  RunConfig cfg;
  if (doc.contains("data")) parse_data(doc.at("data"), cfg.data);
  if (doc.contains("schedule")) parse_schedule(doc.at("schedule"), cfg.schedule);
  if (doc.contains("model")) parse_model(doc.at("model"), cfg.model);
  if (doc.contains("train")) parse_train(doc.at("train"), cfg.train);
  if (doc.contains("sample")) parse_sample(doc.at("sample"), cfg.sample);
  if (doc.contains("generator"))
    cfg.generator = parse_generator(doc.at("generator"));
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string run_config_json(const RunConfig& cfg) {
  json doc;
  doc["data"] = {{"path", cfg.data.path},
                 {"top_k", cfg.data.top_k},
                 {"negation", cfg.data.negation}};
  doc["schedule"] = {{"T", cfg.schedule.T},
                     {"beta_start", cfg.schedule.beta_start},
                     {"beta_end", cfg.schedule.beta_end}};
  doc["model"] = {{"patch_size", cfg.model.patch_size},
                  {"hidden_size", cfg.model.hidden_size},
                  {"n_blocks", cfg.model.n_blocks},
                  {"n_heads", cfg.model.n_heads},
                  {"mlp_ratio", cfg.model.mlp_ratio}};
  doc["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"seed", cfg.train.seed},
                  {"checkpoint_every", cfg.train.checkpoint_every},
                  {"log_every", cfg.train.log_every}};
  doc["sample"] = {{"method", to_string(cfg.sample.method)},
                   {"n_steps", cfg.sample.n_steps},
                   {"eta", cfg.sample.eta},
                   {"n_samples", cfg.sample.n_samples},
                   {"seed", cfg.sample.seed}};
  if (cfg.generator) {
    json gen;
    gen["n_genes"] = cfg.generator->n_genes;
    gen["n_cells"] = cfg.generator->n_cells;
    gen["seed"] = cfg.generator->seed;
    gen["dropout_prob"] = vector_to_json(cfg.generator->dropout_prob);
    json comps = json::array();
    for (const MixtureComponent& c : cfg.generator->components)
      comps.push_back({{"weight", c.weight},
                       {"log_mean", vector_to_json(c.log_mean)},
                       {"log_sd", vector_to_json(c.log_sd)}});
    gen["components"] = comps;
    doc["generator"] = gen;
  }
  return doc.dump(2) + "\n";
}

DenoiserConfig make_denoiser_config(const ModelConfig& model, Index n_genes) {
  DenoiserConfig cfg;
  cfg.n_genes = n_genes;
  cfg.patch_size = model.patch_size;
  cfg.hidden_size = model.hidden_size;
  cfg.n_blocks = model.n_blocks;
  cfg.n_heads = model.n_heads;
  cfg.mlp_ratio = model.mlp_ratio;
  return cfg;
}

SampleMethod sample_method_from_string(const std::string& s) {
  if (s == "ddpm") return SampleMethod::ddpm;
  if (s == "ddim") return SampleMethod::ddim;
  throw ParseError("unknown sampling method \"" + s +
                   "\" (expected ddpm or ddim)");
}

std::string to_string(SampleMethod m) {
  return m == SampleMethod::ddpm ? "ddpm" : "ddim";
}

}  // namespace scdiff
