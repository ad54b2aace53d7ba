#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hmgdyn/cli.hpp"
#include "hmgdyn/dataset.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/train.hpp"
#include "json.hpp"

namespace hmgdyn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by every subcommand; empty strings mean "not given".
struct CommonFlags {
  std::string config;
  std::string seed;
  std::string preset;
  std::string out;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string*>> mapped;  // key <- flag value
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "Key = value config file");
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--preset", f.preset, "full or desk")->check(CLI::IsMember({"full", "desk"}));
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--set", f.sets, "Override a setting, key=value (repeatable)");
}

void map_flag(CLI::App* sub, CommonFlags& f, const std::string& flag, const std::string& key, std::string& storage,
              const std::string& help) {
  sub->add_option(flag, storage, help);
  f.mapped.emplace_back(key, &storage);
}

RunConfig assemble(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::from_file(f.config);
  if (!f.seed.empty()) cfg.set("seed", f.seed);
  if (!f.preset.empty()) cfg.set("preset", f.preset);
  if (!f.out.empty()) cfg.set("out", f.out);
  for (const auto& [key, value] : f.mapped) {
    if (!value->empty()) cfg.set(key, *value);
  }
  for (const auto& s : f.sets) cfg.set_assignment(s);
  return cfg;
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path out = cfg.require("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out.string() + ": " + ec.message());
  return out;
}

models::Preset preset_of(const RunConfig& cfg) { return models::parse_preset(cfg.get_string("preset", "desk")); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  os << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kSynthKeys = {
    "seed", "preset", "out", "dataset.kind", "dataset.num_samples", "dataset.pairs_per_clip", "dataset.max_frame_gap",
    "dataset.frame_size", "dataset.clip_length", "dataset.octaves", "dataset.sprite_count_min",
    "dataset.sprite_count_max", "dataset.sprite_area_min", "dataset.sprite_area_max", "dataset.velocity_min",
    "dataset.velocity_max", "dataset.patch_size", "dataset.perturb_range", "dataset.max_retries"};

int cmd_synth(RunConfig& cfg) {
  cfg.check_keys(kSynthKeys);
  const models::Preset preset = preset_of(cfg);
  const std::string kind = cfg.get_string("dataset.kind", "static");
  if (kind != "static" && kind != "dynamic") throw Error(ErrorKind::ConfigInvalid, "dataset.kind must be static or dynamic");
  const bool dynamic = kind == "dynamic";
  using datasynth::DatasetRecipe;
  DatasetRecipe r = preset == models::Preset::Full ? (dynamic ? DatasetRecipe::full_dynamic() : DatasetRecipe::full_static())
                                                   : (dynamic ? DatasetRecipe::desk_dynamic() : DatasetRecipe::desk_static());
  r.seed = cfg.get_u64("seed", r.seed);
  r.num_samples = static_cast<int>(cfg.get_int("dataset.num_samples", r.num_samples));
  r.pairs_per_clip = static_cast<int>(cfg.get_int("dataset.pairs_per_clip", r.pairs_per_clip));
  r.max_frame_gap = static_cast<int>(cfg.get_int("dataset.max_frame_gap", r.max_frame_gap));
  r.frame_size = static_cast<int>(cfg.get_int("dataset.frame_size", r.frame_size));
  r.clip_length = static_cast<int>(cfg.get_int("dataset.clip_length", r.clip_length));
  r.octaves = static_cast<int>(cfg.get_int("dataset.octaves", r.octaves));
  r.sprite_count_min = static_cast<int>(cfg.get_int("dataset.sprite_count_min", r.sprite_count_min));
  r.sprite_count_max = static_cast<int>(cfg.get_int("dataset.sprite_count_max", r.sprite_count_max));
  r.sprite_area_min = cfg.get_double("dataset.sprite_area_min", r.sprite_area_min);
  r.sprite_area_max = cfg.get_double("dataset.sprite_area_max", r.sprite_area_max);
  r.velocity_min = cfg.get_double("dataset.velocity_min", r.velocity_min);
  r.velocity_max = cfg.get_double("dataset.velocity_max", r.velocity_max);
  r.pair.patch_size = static_cast<int>(cfg.get_int("dataset.patch_size", r.pair.patch_size));
  r.pair.perturb_range = cfg.get_double("dataset.perturb_range", r.pair.perturb_range);
  r.pair.max_retries = static_cast<int>(cfg.get_int("dataset.max_retries", r.pair.max_retries));
  r.preset = models::preset_name(preset);
  r.validate();
  const fs::path out = prepare_out(cfg);

  cfg.resolve("seed", r.seed);
  cfg.resolve("preset", r.preset);
  cfg.resolve("dataset.kind", kind);
  cfg.resolve("dataset.num_samples", r.num_samples);
  cfg.resolve("dataset.pairs_per_clip", r.pairs_per_clip);
  cfg.resolve("dataset.max_frame_gap", r.max_frame_gap);
  cfg.resolve("dataset.frame_size", r.frame_size);
  cfg.resolve("dataset.clip_length", r.clip_length);
  cfg.resolve("dataset.octaves", r.octaves);
  cfg.resolve("dataset.sprite_count_min", r.sprite_count_min);
  cfg.resolve("dataset.sprite_count_max", r.sprite_count_max);
  cfg.resolve("dataset.sprite_area_min", r.sprite_area_min);
  cfg.resolve("dataset.sprite_area_max", r.sprite_area_max);
  cfg.resolve("dataset.velocity_min", r.velocity_min);
  cfg.resolve("dataset.velocity_max", r.velocity_max);
  cfg.resolve("dataset.patch_size", r.pair.patch_size);
  cfg.resolve("dataset.perturb_range", r.pair.perturb_range);
  cfg.resolve("dataset.max_retries", r.pair.max_retries);

  const auto ds = datasynth::build_dataset(r);
  datasynth::write_dataset(out, ds);
  cfg.write(out / "resolved.cfg");
  double ratio = 0.0;
  for (const auto& s : ds.samples) ratio += s.dynamic_area_ratio;
  std::printf("wrote %zu samples to %s (mean dynamic area %.3f)\n", ds.samples.size(), out.string().c_str(),
              ratio / ds.samples.size());
  return 0;
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kIngestKeys = {"seed",           "preset",           "out",
                                              "frames",         "ingest.resize",    "ingest.min_length",
                                              "ingest.flow_skip", "ingest.max_moving_ratio", "ingest.flow_block",
                                              "ingest.flow_radius"};

int cmd_ingest(RunConfig& cfg) {
  cfg.check_keys(kIngestKeys);
  const fs::path frames_dir = cfg.require("frames");
  datasynth::StaticClipConfig sc;
  sc.min_length = static_cast<int>(cfg.get_int("ingest.min_length", sc.min_length));
  sc.flow_skip = static_cast<int>(cfg.get_int("ingest.flow_skip", sc.flow_skip));
  sc.max_moving_ratio = cfg.get_double("ingest.max_moving_ratio", sc.max_moving_ratio);
  sc.flow_block = static_cast<int>(cfg.get_int("ingest.flow_block", sc.flow_block));
  sc.flow_radius = static_cast<int>(cfg.get_int("ingest.flow_radius", sc.flow_radius));
  const bool do_resize = cfg.get_bool("ingest.resize", true);
  if (sc.min_length < 1 || sc.flow_skip < 1) throw Error(ErrorKind::ConfigInvalid, "ingest lengths must be >= 1");

  if (!fs::is_directory(frames_dir)) throw Error(ErrorKind::IoError, "frames directory not found: " + frames_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(frames_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::DatasetEmpty, "no PNG frames in " + frames_dir.string());
  const fs::path out = prepare_out(cfg);

  std::vector<imaging::GrayImage> frames;
  for (const auto& f : files) {
    imaging::GrayImage g = imaging::read_gray_png(f);
    if (g.width != datasynth::kBoundaryFrameSize || g.height != datasynth::kBoundaryFrameSize) {
      if (!do_resize) throw Error(ErrorKind::SizeMismatch, f.string() + " is not 256x256 and ingest.resize is off");
      g = imaging::resize(g, datasynth::kBoundaryFrameSize, datasynth::kBoundaryFrameSize);
    }
    frames.push_back(std::move(g));
  }
  auto clips = datasynth::extract_static_clips(frames, sc);

  json jc = json::array();
  for (auto& c : clips) {
    c.frame_files.clear();
    for (int i = c.first; i <= c.last; ++i) c.frame_files.push_back(files[i].filename().string());
    json stats = json::array();
    for (const auto& s : c.stats) {
      stats.push_back({{"frame", s.frame},
                       {"unchanged_vs_previous", s.unchanged_vs_previous},
                       {"unchanged_vs_first", s.unchanged_vs_first},
                       {"moving_ratio", s.moving_ratio}});
    }
    jc.push_back({{"id", c.id},
                  {"first", c.first},
                  {"last", c.last},
                  {"length", c.length()},
                  {"is_static", c.is_static},
                  {"frames", c.frame_files},
                  {"stats", stats}});
  }
  write_json(out / "clips.json", json{{"frames_dir", frames_dir.string()}, {"num_frames", frames.size()}, {"clips", jc}});

  cfg.resolve("ingest.resize", do_resize);
  cfg.resolve("ingest.min_length", sc.min_length);
  cfg.resolve("ingest.flow_skip", sc.flow_skip);
  cfg.resolve("ingest.max_moving_ratio", sc.max_moving_ratio);
  cfg.resolve("ingest.flow_block", sc.flow_block);
  cfg.resolve("ingest.flow_radius", sc.flow_radius);
  cfg.write(out / "resolved.cfg");
  std::printf("%zu frames, %zu static clips\n", frames.size(), clips.size());
  return 0;
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kTrainKeys = {"seed",
                                             "preset",
                                             "out",
                                             "dataset",
                                             "model",
                                             "n_scales",
                                             "resume",
                                             "train.batch_size",
                                             "train.learning_rate",
                                             "train.decay_step",
                                             "train.decay_rate",
                                             "train.phases",
                                             "train.checkpoint_every",
                                             "train.log_every"};

train::PhasePlan parse_phases(const std::string& text) {
  // iterations:sigma_f:sigma_d, comma separated
  train::PhasePlan plan;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    train::Phase p;
    char c1 = 0, c2 = 0;
    double iters = 0;
    std::istringstream is(item);
    if (!(is >> iters >> c1 >> p.weights.sigma_f >> c2 >> p.weights.sigma_d) || c1 != ':' || c2 != ':') {
      throw Error(ErrorKind::ConfigInvalid, "train.phases entry '" + item + "' is not iterations:sigma_f:sigma_d");
    }
    p.iterations = static_cast<long>(iters);
    plan.phases.push_back(p);
  }
  plan.validate();
  return plan;
}

std::string format_phases(const train::PhasePlan& plan) {
  std::string s;
  for (const auto& p : plan.phases) {
    if (!s.empty()) s += ",";
    std::ostringstream os;
    os << p.iterations << ':' << p.weights.sigma_f << ':' << p.weights.sigma_d;
    s += os.str();
  }
  return s;
}

int cmd_train(RunConfig& cfg) {
  cfg.check_keys(kTrainKeys);
  const std::string model_name = cfg.get_string("model", "mhn");
  if (model_name != "mhn" && model_name != "mhn_m") throw Error(ErrorKind::ConfigInvalid, "model must be mhn or mhn_m");
  const bool mask = model_name == "mhn_m";
  const models::Preset preset = preset_of(cfg);
  train::TrainConfig tc = preset == models::Preset::Full ? train::full_train_config(mask) : train::desk_train_config(mask);
  tc.n_scales = static_cast<int>(cfg.get_int("n_scales", 0));
  tc.seed = cfg.get_u64("seed", tc.seed);
  tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", tc.batch_size));
  tc.schedule.initial_rate = cfg.get_double("train.learning_rate", tc.schedule.initial_rate);
  tc.schedule.decay_step = cfg.get_int("train.decay_step", tc.schedule.decay_step);
  tc.schedule.decay_rate = cfg.get_double("train.decay_rate", tc.schedule.decay_rate);
  if (cfg.has("train.phases")) tc.plan = parse_phases(cfg.get_string("train.phases", ""));
  tc.checkpoint_every = cfg.get_int("train.checkpoint_every", tc.checkpoint_every);
  tc.log_every = std::max(1L, cfg.get_int("train.log_every", tc.log_every));
  tc.validate();
  const fs::path dataset_dir = cfg.require("dataset");
  const fs::path out = prepare_out(cfg);
  tc.out_dir = out;

  const auto ds = datasynth::read_dataset(dataset_dir);
  long start = 0;
  std::optional<models::Mhn> model;
  const std::string resume = cfg.get_string("resume", "");
  if (!resume.empty()) {
    auto lm = train::load_model(resume);
    const auto& mc = lm.model.config();
    const auto want = tc.model_config();
    if (mc.n_scales != want.n_scales || mc.mask_enabled != want.mask_enabled || mc.input_size != want.input_size) {
      throw Error(ErrorKind::ConfigInvalid, "checkpoint " + resume + " does not match the requested model");
    }
    start = lm.iteration;
    model.emplace(std::move(lm.model));
  } else {
    model.emplace(tc.model_config(), tc.seed);
  }
  if (!ds.samples.empty() && ds.samples.front().patch_a.width != model->config().input_size) {
    throw Error(ErrorKind::ConfigInvalid, "dataset patch size " + std::to_string(ds.samples.front().patch_a.width) +
                                              " does not match the " + models::preset_name(preset) + " model input " +
                                              std::to_string(model->config().input_size));
  }

  cfg.resolve("model", model_name);
  cfg.resolve("preset", models::preset_name(preset));
  cfg.resolve("n_scales", model->config().n_scales);
  cfg.resolve("seed", tc.seed);
  cfg.resolve("train.batch_size", tc.batch_size);
  cfg.resolve("train.learning_rate", tc.schedule.initial_rate);
  cfg.resolve("train.decay_step", tc.schedule.decay_step);
  cfg.resolve("train.decay_rate", tc.schedule.decay_rate);
  cfg.resolve("train.phases", format_phases(tc.plan));
  cfg.resolve("train.checkpoint_every", tc.checkpoint_every);
  cfg.resolve("train.log_every", tc.log_every);
  cfg.write(out / "resolved.cfg");

  if (start > 0) std::printf("resuming from iteration %ld\n", start);
  const auto result = train::train(tc, ds, *model, start, [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  });
  std::printf("finished at iteration %ld; checkpoint %s\n", result.final_iteration,
              (out / "checkpoint.bin").string().c_str());
  if (result.fallbacks > 0) std::printf("%ld degenerate outputs replaced by identity\n", result.fallbacks);
  return 0;
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kEvalKeys = {"seed",
                                            "preset",
                                            "out",
                                            "dataset",
                                            "checkpoint",
                                            "estimator",
                                            "eval.baselines",
                                            "eval.thresholds",
                                            "eval.threshold_count",
                                            "eval.ratio_thresholds",
                                            "eval.plot",
                                            "eval.batch_size",
                                            "ransac.iterations",
                                            "ransac.inlier_tol",
                                            "ransac.block",
                                            "ransac.radius"};

int cmd_eval(RunConfig& cfg) {
  cfg.check_keys(kEvalKeys);
  const fs::path dataset_dir = cfg.require("dataset");
  const std::string primary = cfg.get_string("estimator", "model");
  std::vector<std::string> names{primary};
  {
    std::stringstream ss(cfg.get_string("eval.baselines", ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty() && item != primary) names.push_back(item);
    }
  }
  train::RansacConfig rc;
  rc.iterations = static_cast<int>(cfg.get_int("ransac.iterations", rc.iterations));
  rc.inlier_tol = cfg.get_double("ransac.inlier_tol", rc.inlier_tol);
  rc.block = static_cast<int>(cfg.get_int("ransac.block", rc.block));
  rc.radius = static_cast<int>(cfg.get_int("ransac.radius", rc.radius));
  rc.seed = cfg.get_u64("seed", rc.seed);
  const int batch = static_cast<int>(cfg.get_int("eval.batch_size", 32));
  if (batch < 1) throw Error(ErrorKind::ConfigInvalid, "eval.batch_size must be >= 1");

  std::vector<double> thresholds =
      cfg.has("eval.thresholds") ? cfg.get_doubles("eval.thresholds", {})
                                 : train::default_thresholds(static_cast<int>(cfg.get_int("eval.threshold_count", 41)));
  if (thresholds.empty() || !std::is_sorted(thresholds.begin(), thresholds.end()) || thresholds.front() <= 0.0) {
    throw Error(ErrorKind::ConfigInvalid, "eval.thresholds must be positive and ascending");
  }
  const auto ratios = cfg.get_doubles("eval.ratio_thresholds", train::default_ratio_thresholds());
  const bool plot = cfg.get_bool("eval.plot", true);

  std::optional<train::LoadedModel> lm;
  if (std::find(names.begin(), names.end(), "model") != names.end()) lm = train::load_model(cfg.require("checkpoint"));
  const auto ds = datasynth::read_dataset(dataset_dir);
  if (ds.samples.empty()) throw Error(ErrorKind::DatasetEmpty, "dataset " + dataset_dir.string() + " is empty");
  if (lm && ds.samples.front().patch_a.width != lm->model.config().input_size) {
    throw Error(ErrorKind::ConfigInvalid, "checkpoint expects " + std::to_string(lm->model.config().input_size) +
                                              " px patches, dataset has " +
                                              std::to_string(ds.samples.front().patch_a.width));
  }
  const fs::path out = prepare_out(cfg);

  std::vector<train::NamedReport> reports;
  for (const auto& name : names) {
    train::Estimator est;
    if (name == "model") {
      est = train::model_estimator(lm->model, batch);
    } else if (name == "identity") {
      est = train::identity_estimator();
    } else if (name == "oracle") {
      est = train::oracle_estimator();
    } else if (name == "ransac") {
      est = train::ransac_estimator(rc);
    } else {
      throw Error(ErrorKind::ConfigInvalid, "unknown estimator '" + name + "' (model, identity, oracle, ransac)");
    }
    reports.push_back({name, train::evaluate(est, ds, thresholds, ratios)});
    std::printf("%-9s n=%zu mean e_c %.4f median e_c %.4f\n", name.c_str(), ds.samples.size(),
                reports.back().report.mean_ec, reports.back().report.median_ec);
  }
  train::write_reports(out, reports);
  if (plot) {
    std::vector<CdfCurve> curves;
    for (const auto& r : reports) curves.push_back({r.name, r.report.cdf});
    render_cdf_png(out / "cdf.png", thresholds, curves);
  }

  std::string tlist;
  for (double t : thresholds) tlist += (tlist.empty() ? "" : ",") + std::to_string(t);
  std::string rlist;
  for (double t : ratios) rlist += (rlist.empty() ? "" : ",") + std::to_string(t);
  std::string blist;
  for (size_t i = 1; i < names.size(); ++i) blist += (blist.empty() ? "" : ",") + names[i];
  cfg.resolve("estimator", primary);
  cfg.resolve("eval.baselines", blist);
  cfg.resolve("eval.thresholds", tlist);
  cfg.resolve("eval.ratio_thresholds", rlist);
  cfg.resolve("eval.plot", plot);
  cfg.resolve("ransac.iterations", rc.iterations);
  cfg.resolve("ransac.inlier_tol", rc.inlier_tol);
  cfg.resolve("ransac.block", rc.block);
  cfg.resolve("ransac.radius", rc.radius);
  cfg.resolve("seed", rc.seed);
  cfg.write(out / "resolved.cfg");
  return 0;
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kInferKeys = {"seed", "preset", "out", "checkpoint", "image_a", "image_b", "infer.resize"};

json homography_json(const geometry::Homography& h) { return h.data(); }

int cmd_infer(RunConfig& cfg) {
  cfg.check_keys(kInferKeys);
  auto lm = train::load_model(cfg.require("checkpoint"));
  const int size = lm.model.config().input_size;
  const bool do_resize = cfg.get_bool("infer.resize", false);
  auto load = [&](const std::string& key) {
    imaging::GrayImage g = imaging::read_gray_png(cfg.require(key));
    if (g.width != size || g.height != size) {
      if (!do_resize) {
        throw Error(ErrorKind::SizeMismatch, cfg.require(key) + " is " + std::to_string(g.width) + "x" +
                                                 std::to_string(g.height) + ", model expects " + std::to_string(size) +
                                                 " px (set infer.resize=true to resize)");
      }
      g = imaging::resize(g, size, size);
    }
    return g;
  };
  const imaging::GrayImage a = load("image_a");
  const imaging::GrayImage b = load("image_b");
  const fs::path out = prepare_out(cfg);

  // H maps image_a onto image_b.
  const auto est = lm.model.estimate(a, b);
  const auto frame = geometry::PatchFrame::square(size);
  json scales = json::array();
  for (const auto& s : est.scales) {
    scales.push_back({{"level", s.level},
                      {"displacement", s.displacement.d},
                      {"residual", homography_json(s.residual)},
                      {"cascaded", homography_json(s.cascaded)}});
  }
  write_json(out / "homography.json",
             json{{"homography", homography_json(est.homography)},
                  {"displacement", geometry::homography_to_displacement(est.homography, frame).d},
                  {"scales", scales},
                  {"fallbacks", est.fallbacks}});
  if (lm.model.config().mask_enabled) {
    for (const auto& s : est.scales) {
      const std::string lvl = std::to_string(s.level);
      imaging::write_png(out / ("mask1_level" + lvl + ".png"), *s.mask1);
      imaging::write_png(out / ("mask2_level" + lvl + ".png"), *s.mask2);
    }
    imaging::write_png(out / "mask1.png", *est.scales.back().mask1);
    imaging::write_png(out / "mask2.png", *est.scales.back().mask2);
  }
  imaging::write_png(out / "anaglyph.png", imaging::anaglyph(b, imaging::warp(a, est.homography)));

  cfg.resolve("infer.resize", do_resize);
  cfg.write(out / "resolved.cfg");
  const auto& h = est.homography.data();
  std::printf("H = [%.6g %.6g %.6g; %.6g %.6g %.6g; %.6g %.6g %.6g]\n", h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7],
              h[8]);
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Multi-scale homography estimation for dynamic scenes", "hmgdyn"};
  app.require_subcommand(1);

  CommonFlags synth_f, ingest_f, train_f, eval_f, infer_f;
  std::string s_kind, s_num;
  std::string i_frames;
  std::string t_dataset, t_model, t_resume, t_scales;
  std::string e_dataset, e_ckpt, e_est, e_base;
  std::string f_ckpt, f_a, f_b, f_resize;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic pair dataset");
  add_common(synth, synth_f);
  map_flag(synth, synth_f, "--kind", "dataset.kind", s_kind, "static or dynamic");
  map_flag(synth, synth_f, "--num-samples", "dataset.num_samples", s_num, "Number of samples");

  auto* ingest = app.add_subcommand("ingest", "Detect static clips in a directory of numbered PNG frames");
  add_common(ingest, ingest_f);
  map_flag(ingest, ingest_f, "--frames", "frames", i_frames, "Frame directory");

  auto* trn = app.add_subcommand("train", "Train MHN or MHN_m on a dataset");
  add_common(trn, train_f);
  map_flag(trn, train_f, "--dataset", "dataset", t_dataset, "Dataset directory");
  map_flag(trn, train_f, "--model", "model", t_model, "mhn or mhn_m");
  map_flag(trn, train_f, "--resume", "resume", t_resume, "Checkpoint to resume from");
  map_flag(trn, train_f, "--scales", "n_scales", t_scales, "Number of pyramid scales");

  auto* ev = app.add_subcommand("eval", "Evaluate mean corner error on a dataset");
  add_common(ev, eval_f);
  map_flag(ev, eval_f, "--dataset", "dataset", e_dataset, "Dataset directory");
  map_flag(ev, eval_f, "--checkpoint", "checkpoint", e_ckpt, "Model checkpoint");
  map_flag(ev, eval_f, "--estimator", "estimator", e_est, "model, identity, oracle or ransac");
  map_flag(ev, eval_f, "--baselines", "eval.baselines", e_base, "Comma list of comparison estimators");

  auto* inf = app.add_subcommand("infer", "Estimate the homography between two images");
  add_common(inf, infer_f);
  map_flag(inf, infer_f, "--checkpoint", "checkpoint", f_ckpt, "Model checkpoint");
  map_flag(inf, infer_f, "--image-a", "image_a", f_a, "Moving image");
  map_flag(inf, infer_f, "--image-b", "image_b", f_b, "Reference image");
  map_flag(inf, infer_f, "--resize", "infer.resize", f_resize, "Resize inputs to the model size (true/false)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      RunConfig cfg = assemble(synth_f);
      return cmd_synth(cfg);
    }
    if (ingest->parsed()) {
      RunConfig cfg = assemble(ingest_f);
      return cmd_ingest(cfg);
    }
    if (trn->parsed()) {
      RunConfig cfg = assemble(train_f);
      return cmd_train(cfg);
    }
    if (ev->parsed()) {
      RunConfig cfg = assemble(eval_f);
      return cmd_eval(cfg);
    }
    if (inf->parsed()) {
      RunConfig cfg = assemble(infer_f);
      return cmd_infer(cfg);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "hmgdyn: %s\n", e.what());
    return exit_code_for(static_cast<int>(e.kind()));
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "hmgdyn: %s\n", e.what());
    return 3;
  }
  return 2;
}

}  // namespace hmgdyn::cli
