// Copyright 2026 The ged Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command line front end: synth, train, infer, eval.
//
// Exit status: 0 success, 1 input error, 2 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ged/checkpoint.hpp"
#include "ged/evaluation.hpp"
#include "ged/inference.hpp"
#include "ged/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumeric = 2;

// Every recognised key with its default. Config files may only set these.
json default_config() {
  const ged::UNetConfig m;
  const ged::OptimConfig o;
  const ged::AugmentConfig a;
  const ged::MatchConfig e;
  return json{
      {"seed", 0},
      {"model.base_channels", m.base_channels},
      {"model.stage_multipliers", m.stage_multipliers},
      {"model.attention_stages", m.attention_stages},
      {"model.text_tokens", m.text_tokens},
      {"model.text_width", m.text_width},
      {"model.embed_dim", m.embed_dim},
      {"model.strategy", ged::to_string(m.strategy)},
      {"model.init_seed", m.init_seed},
      {"training.lr_start", o.lr_start},
      {"training.lr_end", o.lr_end},
      {"training.beta1", o.beta1},
      {"training.beta2", o.beta2},
      {"training.eps", o.eps},
      {"training.weight_decay", o.weight_decay},
      {"training.clip_norm", o.clip_norm},
      {"training.accumulation", o.accumulation},
      {"training.steps", o.total_steps},
      {"training.mode", "partial"},
      {"training.differentiable_granularity", true},
      {"augment.crop", a.crop_height},
      {"augment.random_crop", a.enable_crop},
      {"augment.scale", a.enable_scale},
      {"augment.flip", a.enable_flip},
      {"augment.scale_min", a.scale_min},
      {"augment.scale_max", a.scale_max},
      {"inference.caption", ""},
      {"evaluation.max_dist_frac", e.max_dist_frac},
      {"evaluation.n_thresholds", e.n_thresholds},
      {"evaluation.nms", e.apply_nms},
      {"evaluation.kernel", "ref"},
  };
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return !a.is_number_integer() || b.is_number_integer();
  return a.type() == b.type();
}

json load_config(const std::string& path) {
  json cfg = default_config();
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw ged::IoError("cannot read config " + path);
  json file;
  try {
    file = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ged::ValidationError("config " + path + ": " + e.what());
  }
  ged::require(file.is_object(), "config " + path + " must hold a JSON object");
  for (const auto& [key, value] : file.items()) {
    ged::require(cfg.contains(key), "config " + path + ": unknown key '" + key + "'");
    ged::require(same_kind(cfg[key], value), "config " + path + ": wrong type for '" + key + "'");
    cfg[key] = value;
  }
  return cfg;
}

template <typename T>
void override_with(json& cfg, const std::string& key, const std::optional<T>& flag) {
  if (flag) cfg[key] = *flag;
}

json section(const json& cfg, const std::vector<std::string>& prefixes) {
  json out = json::object();
  for (const auto& [key, value] : cfg.items())
    for (const auto& p : prefixes)
      if (key == p || key.rfind(p + ".", 0) == 0) out[key] = value;
  return out;
}

void echo_config(const json& cfg) { std::cout << "effective config: " << cfg.dump() << std::endl; }

ged::UNetConfig model_config(const json& c) {
  ged::UNetConfig m;
  m.base_channels = c["model.base_channels"];
  m.stage_multipliers = c["model.stage_multipliers"].get<std::vector<int>>();
  m.attention_stages = c["model.attention_stages"].get<std::vector<int>>();
  m.text_tokens = c["model.text_tokens"];
  m.text_width = c["model.text_width"];
  m.embed_dim = c["model.embed_dim"];
  m.strategy = ged::granularity_strategy_from_string(c["model.strategy"]);
  m.init_seed = c["model.init_seed"];
  m.validate();
  return m;
}

ged::TrainRunConfig run_config(const json& c) {
  ged::TrainRunConfig r;
  r.optim.lr_start = c["training.lr_start"];
  r.optim.lr_end = c["training.lr_end"];
  r.optim.beta1 = c["training.beta1"];
  r.optim.beta2 = c["training.beta2"];
  r.optim.eps = c["training.eps"];
  r.optim.weight_decay = c["training.weight_decay"];
  r.optim.clip_norm = c["training.clip_norm"];
  r.optim.accumulation = c["training.accumulation"];
  r.optim.total_steps = c["training.steps"];
  r.optim.validate();
  r.mode = ged::finetune_mode_from_string(c["training.mode"]);
  r.differentiable_granularity = c["training.differentiable_granularity"];
  r.augment.crop_height = r.augment.crop_width = c["augment.crop"];
  r.augment.enable_crop = c["augment.random_crop"];
  r.augment.enable_scale = c["augment.scale"];
  r.augment.enable_flip = c["augment.flip"];
  r.augment.scale_min = c["augment.scale_min"];
  r.augment.scale_max = c["augment.scale_max"];
  r.seed = c["seed"];
  return r;
}

ged::MatchConfig match_config(const json& c) {
  ged::MatchConfig m;
  m.max_dist_frac = c["evaluation.max_dist_frac"];
  m.n_thresholds = c["evaluation.n_thresholds"];
  m.apply_nms = c["evaluation.nms"];
  m.validate();
  return m;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  int n = 0;
  uint64_t seed = 0;
  int size = 128;
  std::string split = "train";
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  ged::require(a.n > 0, "--n must be positive");
  const ged::DatasetManifest m =
      ged::generate_synthetic_corpus(a.n, a.seed, a.out, {a.size, a.split});
  std::cout << (fs::path(a.out) / "manifest.json").string() << std::endl;
  return m.entries.empty() ? kExitInput : kExitOk;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string manifest, config, out, log, captions;
  std::optional<int> steps, crop, accumulation;
  std::optional<double> lr_start, lr_end;
  std::optional<uint64_t> seed;
  std::optional<std::string> mode, strategy;
};

int cmd_train(const TrainArgs& a) {
  json cfg = load_config(a.config);
  override_with(cfg, "training.steps", a.steps);
  override_with(cfg, "training.lr_start", a.lr_start);
  override_with(cfg, "training.lr_end", a.lr_end);
  override_with(cfg, "training.accumulation", a.accumulation);
  override_with(cfg, "training.mode", a.mode);
  override_with(cfg, "augment.crop", a.crop);
  override_with(cfg, "model.strategy", a.strategy);
  override_with(cfg, "seed", a.seed);
  cfg = section(cfg, {"seed", "model", "training", "augment"});
  echo_config(cfg);

  const ged::UNetConfig mc = model_config(cfg);
  const ged::TrainRunConfig rc = run_config(cfg);
  const ged::DatasetManifest manifest = ged::load_manifest(a.manifest);
  const std::vector<ged::AnnotatedImage> corpus = ged::load_all(manifest);
  ged::require(!corpus.empty(), "manifest " + a.manifest + " lists no images");
  const ged::GranularityBounds bounds = manifest.granularity_bounds.count_max > 0
                                            ? manifest.granularity_bounds
                                            : ged::compute_granularity_bounds(corpus);
  const ged::CaptionTable captions =
      a.captions.empty() ? ged::CaptionTable{} : ged::load_captions(a.captions);

  ged::Denoiser model(mc);
  const ged::LatentCodec codec;
  const fs::path out(a.out);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path);
  if (!log) throw ged::IoError("cannot write " + log_path.string());

  const auto records = ged::train(model, codec, corpus, bounds, captions, rc, [&](const auto& r) {
    log << json{{"step", r.step},
                {"lr", r.lr},
                {"mse", r.loss.mse},
                {"ord_pairwise", r.loss.ord_pairwise},
                {"ord_gran", r.loss.ord_gran},
                {"total", r.loss.total}}
               .dump()
        << "\n"
        << std::flush;
  });
  ged::save_checkpoint(out, model, codec,
                       {{"steps", records.size()},
                        {"granularity_bounds", {bounds.count_min, bounds.count_max}},
                        {"config", cfg}});
  std::cout << "wrote " << out.string() << " after " << records.size() << " steps" << std::endl;
  return kExitOk;
}

// --- infer ---------------------------------------------------------------

struct InferArgs {
  std::string checkpoint, manifest, out, captions;
  std::optional<std::string> caption;
  std::optional<double> g;
  int sweep = 0;
  bool no_granularity = false;
  std::string config;
};

int cmd_infer(const InferArgs& a) {
  json cfg = load_config(a.config);
  override_with(cfg, "inference.caption", a.caption);
  cfg = section(cfg, {"inference"});
  const int modes = (a.g ? 1 : 0) + (a.sweep > 0 ? 1 : 0) + (a.no_granularity ? 1 : 0);
  ged::require(modes == 1, "pass exactly one of --g, --sweep or --no-granularity");
  echo_config(cfg);

  const ged::Checkpoint ckpt = ged::load_checkpoint(a.checkpoint);
  const ged::UNetConfig& mc = ckpt.model->config();
  const ged::DatasetManifest manifest = ged::load_manifest(a.manifest);
  const ged::CaptionTable captions =
      a.captions.empty() ? ged::CaptionTable{} : ged::load_captions(a.captions);
  const ged::Predictor predictor(*ckpt.model, ckpt.codec);

  size_t written = 0;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    const ged::RgbImage image = ged::read_rgb_png(manifest.resolve(entry.image));
    const auto it = captions.find(entry.id);
    const std::string caption =
        it != captions.end() ? it->second : cfg["inference.caption"].get<std::string>();
    const ged::TextEmbedding text = ged::embed_caption(caption, mc.text_tokens, mc.text_width);
    std::vector<ged::EdgePrediction> preds;
    if (a.sweep > 0)
      preds = predictor.sweep(image, a.sweep, text, entry.id);
    else
      preds.push_back(predictor.predict(
          image, a.no_granularity ? ged::Granularity{} : ged::Granularity{*a.g}, text, entry.id));
    for (const auto& p : preds) {
      ged::write_prediction(a.out, p);
      ++written;
    }
  }
  std::cout << "wrote " << written << " predictions to " << a.out << std::endl;
  return kExitOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string pred_dir, manifest, out, config;
  bool no_nms = false;
  int multi = 0;
  std::optional<std::string> kernel, g;
  std::optional<int> n_thresholds;
  std::optional<double> max_dist_frac;
};

// Single mode picks <id>_<tag>.png for --g, else the only <id>_g*.png file.
fs::path single_prediction(const fs::path& dir, const std::string& id,
                           const std::optional<std::string>& g) {
  if (g) {
    const ged::Granularity value =
        *g == "na" ? ged::Granularity{} : ged::Granularity{std::stod(*g)};
    return dir / ged::prediction_filename(id, value);
  }
  std::vector<fs::path> found;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind(id + "_g", 0) == 0 && name.size() == id.size() + 9 &&
          e.path().extension() == ".png")
        found.push_back(e.path());
    }
  ged::require(found.size() <= 1, "several predictions for '" + id + "'; choose one with --g");
  return found.empty() ? dir / ged::prediction_filename(id, ged::Granularity{}) : found.front();
}

int cmd_eval(const EvalArgs& a) {
  json cfg = load_config(a.config);
  if (a.no_nms) cfg["evaluation.nms"] = false;
  override_with(cfg, "evaluation.kernel", a.kernel);
  override_with(cfg, "evaluation.n_thresholds", a.n_thresholds);
  override_with(cfg, "evaluation.max_dist_frac", a.max_dist_frac);
  cfg = section(cfg, {"evaluation"});
  ged::require(a.multi == 0 || a.multi >= 2, "--multi needs at least 2 granularities");
  ged::require(a.multi == 0 || !a.g, "--g and --multi are exclusive");
  echo_config(cfg);

  const ged::MatchConfig mc = match_config(cfg);
  const auto backend = ged::make_backend(cfg["evaluation.kernel"]);
  const ged::DatasetManifest manifest = ged::load_manifest(a.manifest);
  const fs::path dir(a.pred_dir);

  std::vector<ged::GroundTruth> gts;
  std::vector<ged::PredictionSet> preds;
  std::vector<std::string> missing;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const std::string& id = manifest.entries[i].id;
    std::vector<fs::path> files;
    if (a.multi > 0)
      for (double g : ged::sweep_grid(a.multi)) files.push_back(dir / ged::prediction_filename(id, g));
    else
      files.push_back(single_prediction(dir, id, a.g));
    bool complete = true;
    for (const auto& f : files) complete = complete && fs::exists(f);
    if (!complete) {
      missing.push_back(id);
      continue;
    }
    ged::PredictionSet set{id, {}};
    for (const auto& f : files) set.maps.push_back(ged::read_prob_png(f));
    preds.push_back(std::move(set));
    gts.push_back({id, ged::load_entry(manifest, i).annotations});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ged::ValidationError("missing predictions for: " + list);
  }

  const ged::EvalResult r = a.multi > 0 ? ged::evaluate_multi(preds, gts, mc, *backend)
                                        : ged::evaluate(preds, gts, mc, *backend);
  const std::vector<std::string> header = {
      std::string("nms=") + (mc.apply_nms ? "on" : "off"),
      "multi=" + std::to_string(a.multi),
      "max_dist_frac=" + cfg["evaluation.max_dist_frac"].dump(),
      "n_thresholds=" + std::to_string(mc.n_thresholds),
      "images=" + std::to_string(gts.size()),
  };
  const fs::path out = a.out.empty() ? dir / "results.csv" : fs::path(a.out);
  ged::write_results_csv(out, r, header);
  std::printf("%s ODS %.4f  OIS %.4f  AP %.4f  (%s kernel)\n", a.multi > 0 ? "best" : "single",
              r.ods, r.ois, r.ap, backend->name().c_str());
  std::cout << "wrote " << out.string() << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative edge detection: synthetic data, training, inference, evaluation"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render a synthetic multi-annotator corpus");
  synth->add_option("--n", sa.n, "Number of images")->required()->check(CLI::Range(1, 1000000));
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--size", sa.size, "Image side in pixels (multiple of 8)");
  synth->add_option("--split", sa.split, "Split name written to the manifest");
  synth->add_option("--out", sa.out, "Output directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Finetune the denoiser on a manifest");
  train->add_option("--manifest", ta.manifest)->required();
  train->add_option("--config", ta.config, "JSON file with namespaced keys");
  train->add_option("--out", ta.out, "Checkpoint path")->required();
  train->add_option("--log", ta.log, "JSONL step log (default <out>.log.jsonl)");
  train->add_option("--captions", ta.captions, "JSON map of image id to caption");
  train->add_option("--steps", ta.steps)->check(CLI::PositiveNumber);
  train->add_option("--lr-start", ta.lr_start);
  train->add_option("--lr-end", ta.lr_end);
  train->add_option("--accumulation", ta.accumulation)->check(CLI::PositiveNumber);
  train->add_option("--crop", ta.crop)->check(CLI::PositiveNumber);
  train->add_option("--mode", ta.mode)->check(CLI::IsMember({"partial", "full"}));
  train->add_option("--strategy", ta.strategy)
      ->check(CLI::IsMember({"encoding", "time_step", "text_prompt"}));
  train->add_option("--seed", ta.seed);

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Predict edge maps with a checkpoint");
  infer->add_option("--checkpoint", ia.checkpoint)->required();
  infer->add_option("--manifest", ia.manifest)->required();
  infer->add_option("--out", ia.out, "Output directory")->required();
  infer->add_option("--config", ia.config);
  infer->add_option("--g", ia.g, "Granularity in [0, 1]")->check(CLI::Range(0.0, 1.0));
  infer->add_option("--sweep", ia.sweep, "Evenly spaced granularities, endpoints included")
      ->check(CLI::Range(2, 1000));
  infer->add_flag("--no-granularity", ia.no_granularity, "Predict without a granularity");
  infer->add_option("--caption", ia.caption);
  infer->add_option("--captions", ia.captions);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score predictions against the annotations");
  eval->add_option("--pred-dir", ea.pred_dir)->required();
  eval->add_option("--manifest", ea.manifest)->required();
  eval->add_option("--out", ea.out, "CSV path (default <pred-dir>/results.csv)");
  eval->add_option("--config", ea.config);
  eval->add_flag("--no-nms", ea.no_nms, "Score raw maps without thinning");
  eval->add_option("--multi", ea.multi, "Best-ODS/OIS over this many swept granularities");
  eval->add_option("--g", ea.g, "Granularity tag of the files to score (value or 'na')");
  eval->add_option("--kernel", ea.kernel)->check(CLI::IsMember({"ref", "fast"}));
  eval->add_option("--n-thresholds", ea.n_thresholds)->check(CLI::PositiveNumber);
  eval->add_option("--max-dist-frac", ea.max_dist_frac);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*train) return cmd_train(ta);
    if (*infer) return cmd_infer(ia);
    if (*eval) return cmd_eval(ea);
  } catch (const ged::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitInput;
  }
  return kExitInput;
}
