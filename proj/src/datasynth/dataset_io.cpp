#include <cstdio>
#include <fstream>
#include <sstream>

#include "hmgdyn/dataset.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/rng.hpp"
#include "json.hpp"

namespace hmgdyn::datasynth {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

json recipe_json(const DatasetRecipe& r) {
  return json{{"preset", r.preset},
              {"seed", r.seed},
              {"num_samples", r.num_samples},
              {"pairs_per_clip", r.pairs_per_clip},
              {"max_frame_gap", r.max_frame_gap},
              {"frame_size", r.frame_size},
              {"clip_length", r.clip_length},
              {"octaves", r.octaves},
              {"sprite_count_min", r.sprite_count_min},
              {"sprite_count_max", r.sprite_count_max},
              {"sprite_area_min", r.sprite_area_min},
              {"sprite_area_max", r.sprite_area_max},
              {"velocity_min", r.velocity_min},
              {"velocity_max", r.velocity_max},
              {"patch_size", r.pair.patch_size},
              {"perturb_range", r.pair.perturb_range},
              {"max_retries", r.pair.max_retries}};
}

DatasetRecipe recipe_from(const json& j) {
  DatasetRecipe r;
  r.preset = j.value("preset", r.preset);
  r.seed = j.value("seed", r.seed);
  r.num_samples = j.value("num_samples", r.num_samples);
  r.pairs_per_clip = j.value("pairs_per_clip", r.pairs_per_clip);
  r.max_frame_gap = j.value("max_frame_gap", r.max_frame_gap);
  r.frame_size = j.value("frame_size", r.frame_size);
  r.clip_length = j.value("clip_length", r.clip_length);
  r.octaves = j.value("octaves", r.octaves);
  r.sprite_count_min = j.value("sprite_count_min", r.sprite_count_min);
  r.sprite_count_max = j.value("sprite_count_max", r.sprite_count_max);
  r.sprite_area_min = j.value("sprite_area_min", r.sprite_area_min);
  r.sprite_area_max = j.value("sprite_area_max", r.sprite_area_max);
  r.velocity_min = j.value("velocity_min", r.velocity_min);
  r.velocity_max = j.value("velocity_max", r.velocity_max);
  r.pair.patch_size = j.value("patch_size", r.pair.patch_size);
  r.pair.perturb_range = j.value("perturb_range", r.pair.perturb_range);
  r.pair.max_retries = j.value("max_retries", r.pair.max_retries);
  return r;
}

std::string sample_id(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw Error(ErrorKind::IoError, "cannot open " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoError, "malformed JSON in " + p.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + p.string());
  os << text;
}

}  // namespace

void DatasetRecipe::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::ConfigInvalid, "dataset: " + m); };
  if (num_samples < 1) fail("num_samples must be >= 1");
  if (pairs_per_clip < 1) fail("pairs_per_clip must be >= 1");
  if (max_frame_gap < 0 || max_frame_gap > 5) fail("max_frame_gap must be in [0, 5]");
  if (clip_length < 10) fail("clip_length must be >= 10");
  if (sprite_count_min < 0 || sprite_count_max > 4 || sprite_count_min > sprite_count_max) fail("bad sprite count range");
  if (sprite_area_min < 0 || sprite_area_max > 0.6 || sprite_area_min > sprite_area_max) fail("bad sprite area range");
  if (velocity_min < 0 || velocity_max > 25 || velocity_min > velocity_max) fail("bad velocity range");
  const int margin = static_cast<int>(std::ceil(pair.perturb_range));
  if (frame_size < pair.patch_size + 2 * margin) fail("frame_size too small for patch plus perturbation margin");
}

DatasetRecipe DatasetRecipe::desk_static() { return DatasetRecipe{}; }

DatasetRecipe DatasetRecipe::desk_dynamic() {
  DatasetRecipe r;
  r.sprite_count_min = 1;
  r.sprite_count_max = 2;
  r.sprite_area_min = 0.10;
  r.sprite_area_max = 0.40;
  r.velocity_min = 1.0;
  r.velocity_max = 3.0;
  return r;
}

DatasetRecipe DatasetRecipe::full_static() {
  DatasetRecipe r;
  r.preset = "full";
  r.frame_size = 256;
  r.clip_length = 20;
  r.octaves = 5;
  r.pair = PairConfig{128, 32.0, 16};
  return r;
}

DatasetRecipe DatasetRecipe::full_dynamic() {
  DatasetRecipe r = full_static();
  r.sprite_count_min = 1;
  r.sprite_count_max = 4;
  r.sprite_area_min = 0.05;
  r.sprite_area_max = 0.5;
  r.velocity_min = 0.5;
  r.velocity_max = 5.0;
  return r;
}

Dataset build_dataset(const DatasetRecipe& recipe) {
  recipe.validate();
  Dataset ds;
  ds.recipe = recipe;
  ds.samples.reserve(recipe.num_samples);
  for (std::uint64_t clip = 0; static_cast<int>(ds.samples.size()) < recipe.num_samples; ++clip) {
    Rng rng(mix_seed(recipe.seed, clip));
    SceneConfig scene;
    scene.frame_size = recipe.frame_size;
    scene.length = recipe.clip_length;
    scene.octaves = recipe.octaves;
    scene.sprite_count = static_cast<int>(rng.uniform_int(recipe.sprite_count_min, recipe.sprite_count_max));
    const double patch_to_frame = static_cast<double>(recipe.pair.patch_size * recipe.pair.patch_size) /
                                  (static_cast<double>(recipe.frame_size) * recipe.frame_size);
    scene.sprite_area =
        scene.sprite_count > 0 ? rng.uniform(recipe.sprite_area_min, recipe.sprite_area_max) * patch_to_frame : 0.0;
    scene.sprite_velocity = rng.uniform(recipe.velocity_min, recipe.velocity_max);
    const Scene sc(rng.next_u64(), scene);

    for (int p = 0; p < recipe.pairs_per_clip && static_cast<int>(ds.samples.size()) < recipe.num_samples; ++p) {
      const int j = static_cast<int>(rng.uniform_int(0, scene.length - 1));
      const int lo = std::max(0, j - recipe.max_frame_gap);
      const int hi = std::min(scene.length - 1, j + recipe.max_frame_gap);
      const int k = static_cast<int>(rng.uniform_int(lo, hi));
      GrayImage fj, fk;
      DynamicsMask mj, mk;
      sc.render(j, fj, mj);
      sc.render(k, fk, mk);
      ds.samples.push_back(generate_pair(fj, fk, mj, mk, rng.next_u64(), recipe.pair));
    }
  }
  return ds;
}

std::string recipe_to_json(const DatasetRecipe& r) { return recipe_json(r).dump(2); }

DatasetRecipe recipe_from_json(const std::string& text) {
  try {
    return recipe_from(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("bad recipe JSON: ") + e.what());
  }
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "samples", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  json index = json::array();
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const TrainingSample& s = ds.samples[i];
    const std::string id = sample_id(i);
    const fs::path sd = dir / "samples" / id;
    fs::create_directories(sd, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + sd.string());
    imaging::write_png(sd / "patch_a.png", s.patch_a);
    imaging::write_png(sd / "patch_b.png", s.patch_b);
    imaging::write_png(sd / "mask_a.png", s.mask_a);
    imaging::write_png(sd / "mask_b.png", s.mask_b);
    const auto h = s.gt_homography();
    json gt{{"displacement", s.gt_displacement.d},
            {"homography", h.data()},
            {"dynamic_area_ratio", s.dynamic_area_ratio},
            {"crop", {s.crop_x, s.crop_y}}};
    write_text(sd / "gt.json", gt.dump(2));
    index.push_back({{"id", id}, {"path", "samples/" + id}, {"dynamic_area_ratio", s.dynamic_area_ratio}});
  }
  json manifest{{"schema_version", kSchemaVersion},
                {"seed", ds.recipe.seed},
                {"preset", ds.recipe.preset},
                {"recipe", recipe_json(ds.recipe)},
                {"num_samples", ds.samples.size()},
                {"samples", index}};
  write_text(dir / "manifest.json", manifest.dump(2));
}

namespace {

Dataset read_dataset_unchecked(const std::filesystem::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  if (manifest.value("schema_version", 0) != kSchemaVersion) {
    throw Error(ErrorKind::IoError, "unsupported dataset schema in " + dir.string());
  }
  Dataset ds;
  ds.recipe = recipe_from(manifest.at("recipe"));
  for (const auto& entry : manifest.at("samples")) {
    const auto sd = dir / entry.at("path").get<std::string>();
    TrainingSample s;
    s.patch_a = imaging::read_gray_png(sd / "patch_a.png");
    s.patch_b = imaging::read_gray_png(sd / "patch_b.png");
    s.mask_a = imaging::read_gray_png(sd / "mask_a.png");
    s.mask_b = imaging::read_gray_png(sd / "mask_b.png");
    const json gt = read_json(sd / "gt.json");
    const auto d = gt.at("displacement").get<std::vector<double>>();
    if (d.size() != 8) throw Error(ErrorKind::IoError, "gt displacement must have 8 entries in " + sd.string());
    std::copy(d.begin(), d.end(), s.gt_displacement.d.begin());
    s.dynamic_area_ratio = gt.at("dynamic_area_ratio").get<double>();
    if (gt.contains("crop")) {
      s.crop_x = gt["crop"][0].get<int>();
      s.crop_y = gt["crop"][1].get<int>();
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& dir) {
  try {
    return read_dataset_unchecked(dir);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoError, "malformed dataset in " + dir.string() + ": " + e.what());
  }
}

}  // namespace hmgdyn::datasynth
