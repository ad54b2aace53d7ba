#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hmgdyn/dataset.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/train.hpp"

namespace py = pybind11;
using namespace py::literals;

using hmgdyn::geometry::CornerDisplacement;
using hmgdyn::geometry::Homography;
using hmgdyn::geometry::PatchFrame;
using hmgdyn::imaging::GrayImage;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as (H, W) float32 arrays with values in [0, 1].
GrayImage to_image(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D image array");
  GrayImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

FloatArray from_image(const GrayImage& img) {
  FloatArray a({img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

Homography to_h(const DoubleArray& a) {
  if (a.size() != 9) throw py::value_error("homography must have 9 entries");
  std::array<double, 9> m;
  std::copy(a.data(), a.data() + 9, m.begin());
  return Homography(m);
}

DoubleArray from_h(const Homography& h) {
  DoubleArray a({3, 3});
  std::copy(h.data().begin(), h.data().end(), a.mutable_data());
  return a;
}

CornerDisplacement to_d(const DoubleArray& a) {
  if (a.size() != 8) throw py::value_error("displacement must have 8 entries");
  CornerDisplacement d;
  std::copy(a.data(), a.data() + 8, d.d.begin());
  return d;
}

DoubleArray from_d(const CornerDisplacement& d) {
  DoubleArray a(8);
  std::copy(d.d.begin(), d.d.end(), a.mutable_data());
  return a;
}

py::dict sample_dict(const hmgdyn::datasynth::TrainingSample& s) {
  return py::dict("patch_a"_a = from_image(s.patch_a), "patch_b"_a = from_image(s.patch_b),
                  "mask_a"_a = from_image(s.mask_a), "mask_b"_a = from_image(s.mask_b),
                  "gt_displacement"_a = from_d(s.gt_displacement), "gt_homography"_a = from_h(s.gt_homography()),
                  "dynamic_area_ratio"_a = s.dynamic_area_ratio);
}

hmgdyn::datasynth::TrainingSample sample_from(const py::dict& d) {
  hmgdyn::datasynth::TrainingSample s;
  s.patch_a = to_image(d["patch_a"].cast<FloatArray>());
  s.patch_b = to_image(d["patch_b"].cast<FloatArray>());
  s.mask_a = d.contains("mask_a") ? to_image(d["mask_a"].cast<FloatArray>()) : GrayImage(s.patch_a.width, s.patch_a.height);
  s.mask_b = d.contains("mask_b") ? to_image(d["mask_b"].cast<FloatArray>()) : GrayImage(s.patch_a.width, s.patch_a.height);
  s.gt_displacement = to_d(d["gt_displacement"].cast<DoubleArray>());
  s.dynamic_area_ratio = d.contains("dynamic_area_ratio") ? d["dynamic_area_ratio"].cast<double>() : s.mask_a.mean();
  return s;
}

py::dict report_dict(const hmgdyn::train::MetricsReport& r) {
  py::list slices;
  for (const auto& s : r.slices) {
    slices.append(py::dict("ratio_threshold"_a = s.ratio_threshold, "n"_a = s.n, "mean_ec"_a = s.mean_ec,
                           "median_ec"_a = s.median_ec));
  }
  return py::dict("errors"_a = r.errors, "mean_ec"_a = r.mean_ec, "median_ec"_a = r.median_ec,
                  "thresholds"_a = r.thresholds, "cdf"_a = r.cdf, "slices"_a = slices);
}

class PyModel {
 public:
  explicit PyModel(hmgdyn::train::LoadedModel lm) : lm_(std::move(lm)) {}

  py::dict estimate(const FloatArray& moving, const FloatArray& reference) {
    const auto r = lm_.model.estimate(to_image(moving), to_image(reference));
    py::list scales;
    for (const auto& s : r.scales) {
      py::dict d("level"_a = s.level, "displacement"_a = from_d(s.displacement), "residual"_a = from_h(s.residual),
                 "cascaded"_a = from_h(s.cascaded));
      if (s.mask1) {
        d["mask1"] = from_image(*s.mask1);
        d["mask2"] = from_image(*s.mask2);
      }
      scales.append(d);
    }
    return py::dict("homography"_a = from_h(r.homography), "scales"_a = scales, "fallbacks"_a = r.fallbacks);
  }

  int input_size() const { return lm_.model.config().input_size; }
  int n_scales() const { return lm_.model.config().n_scales; }
  bool mask_enabled() const { return lm_.model.config().mask_enabled; }
  long iteration() const { return lm_.iteration; }
  hmgdyn::models::Mhn& model() { return lm_.model; }

 private:
  hmgdyn::train::LoadedModel lm_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-scale homography estimation for dynamic scenes";

  static py::exception<hmgdyn::Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const hmgdyn::Error& e) {
      py::set_error(error, e.what());
    }
  });

  // geometry
  m.def(
      "apply",
      [](const DoubleArray& h, double x, double y) {
        const auto p = hmgdyn::geometry::apply(to_h(h), {x, y});
        return py::make_tuple(p.x, p.y);
      },
      "h"_a, "x"_a, "y"_a);
  m.def(
      "displacement_to_homography",
      [](const DoubleArray& d, int width, int height) {
        return from_h(hmgdyn::geometry::displacement_to_homography(to_d(d), PatchFrame(width, height)));
      },
      "d"_a, "width"_a, "height"_a);
  m.def(
      "homography_to_displacement",
      [](const DoubleArray& h, int width, int height) {
        return from_d(hmgdyn::geometry::homography_to_displacement(to_h(h), PatchFrame(width, height)));
      },
      "h"_a, "width"_a, "height"_a);
  m.def("invert", [](const DoubleArray& h) { return from_h(hmgdyn::geometry::invert(to_h(h))); }, "h"_a);
  m.def(
      "compose_across_scale",
      [](const DoubleArray& fine, const DoubleArray& coarse) {
        return from_h(hmgdyn::geometry::compose_across_scale(to_h(fine), to_h(coarse)));
      },
      "h_fine"_a, "h_coarse"_a);
  m.def(
      "mean_corner_error",
      [](const DoubleArray& est, const DoubleArray& gt, int width, int height) {
        return hmgdyn::geometry::mean_corner_error(to_h(est), to_h(gt), PatchFrame(width, height));
      },
      "h_est"_a, "h_gt"_a, "width"_a, "height"_a);

  // imaging
  m.def(
      "warp",
      [](const FloatArray& img, const DoubleArray& h, int out_w, int out_h) {
        const GrayImage g = to_image(img);
        return from_image(hmgdyn::imaging::warp(g, to_h(h), out_w > 0 ? out_w : g.width, out_h > 0 ? out_h : g.height));
      },
      "img"_a, "h"_a, "out_w"_a = 0, "out_h"_a = 0);
  m.def("downscale_half", [](const FloatArray& img) { return from_image(hmgdyn::imaging::downscale_half(to_image(img))); });
  m.def(
      "build_pyramid",
      [](const FloatArray& img, int n_levels) {
        py::list out;
        for (const auto& l : hmgdyn::imaging::build_pyramid(to_image(img), n_levels).levels) out.append(from_image(l));
        return out;
      },
      "img"_a, "n_levels"_a);
  m.def(
      "anaglyph",
      [](const FloatArray& reference, const FloatArray& warped) {
        const auto rgb = hmgdyn::imaging::anaglyph(to_image(reference), to_image(warped));
        FloatArray a({rgb.height, rgb.width, 3});
        std::copy(rgb.data.begin(), rgb.data.end(), a.mutable_data());
        return a;
      },
      "reference"_a, "warped"_a);
  m.def("read_gray_png", [](const std::filesystem::path& p) { return from_image(hmgdyn::imaging::read_gray_png(p)); });
  m.def("write_png", [](const std::filesystem::path& p, const FloatArray& img) {
    hmgdyn::imaging::write_png(p, to_image(img));
  });

  // datasynth
  m.def(
      "synth_dynamic_clip",
      [](std::uint64_t seed, int frame_size, int length, int octaves, int sprite_count, double sprite_area,
         double sprite_velocity) {
        hmgdyn::datasynth::SceneConfig c;
        c.frame_size = frame_size;
        c.length = length;
        c.octaves = octaves;
        c.sprite_count = sprite_count;
        c.sprite_area = sprite_area;
        c.sprite_velocity = sprite_velocity;
        const auto clip = hmgdyn::datasynth::synth_dynamic_clip(seed, c);
        py::list frames, masks;
        for (const auto& f : clip.frames) frames.append(from_image(f));
        for (const auto& f : clip.masks) masks.append(from_image(f));
        return py::make_tuple(frames, masks);
      },
      "seed"_a, "frame_size"_a = 256, "length"_a = 20, "octaves"_a = 5, "sprite_count"_a = 0, "sprite_area"_a = 0.0,
      "sprite_velocity"_a = 0.0);
  m.def(
      "generate_pair",
      [](const FloatArray& fj, const FloatArray& fk, const FloatArray& mj, const FloatArray& mk, std::uint64_t seed,
         int patch_size, double perturb_range) {
        hmgdyn::datasynth::PairConfig pc;
        pc.patch_size = patch_size;
        pc.perturb_range = perturb_range;
        return sample_dict(
            hmgdyn::datasynth::generate_pair(to_image(fj), to_image(fk), to_image(mj), to_image(mk), seed, pc));
      },
      "frame_j"_a, "frame_k"_a, "mask_j"_a, "mask_k"_a, "seed"_a, "patch_size"_a = 128, "perturb_range"_a = 32.0);
  m.def(
      "extract_static_clips",
      [](const std::vector<FloatArray>& frames) {
        std::vector<GrayImage> fs;
        for (const auto& f : frames) fs.push_back(to_image(f));
        py::list out;
        for (const auto& c : hmgdyn::datasynth::extract_static_clips(fs)) {
          out.append(py::dict("first"_a = c.first, "last"_a = c.last, "length"_a = c.length()));
        }
        return out;
      },
      "frames"_a);
  m.def(
      "block_matching_flow",
      [](const FloatArray& a, const FloatArray& b, int block, int radius) {
        const auto f = hmgdyn::datasynth::block_matching_flow(to_image(a), to_image(b), block, radius);
        FloatArray u({f.height, f.width}), v({f.height, f.width});
        std::copy(f.u.begin(), f.u.end(), u.mutable_data());
        std::copy(f.v.begin(), f.v.end(), v.mutable_data());
        return py::make_tuple(u, v);
      },
      "frame_a"_a, "frame_b"_a, "block"_a = 8, "radius"_a = 8);
  m.def(
      "synth_dataset",
      [](const std::filesystem::path& out, const std::string& preset, bool dynamic, int num_samples,
         std::uint64_t seed) {
        using hmgdyn::datasynth::DatasetRecipe;
        DatasetRecipe r = preset == "full" ? (dynamic ? DatasetRecipe::full_dynamic() : DatasetRecipe::full_static())
                                           : (dynamic ? DatasetRecipe::desk_dynamic() : DatasetRecipe::desk_static());
        r.num_samples = num_samples;
        r.seed = seed;
        hmgdyn::datasynth::write_dataset(out, hmgdyn::datasynth::build_dataset(r));
      },
      "out"_a, "preset"_a = "desk", "dynamic"_a = false, "num_samples"_a = 100, "seed"_a = 1);
  m.def(
      "read_dataset",
      [](const std::filesystem::path& dir) {
        py::list out;
        for (const auto& s : hmgdyn::datasynth::read_dataset(dir).samples) out.append(sample_dict(s));
        return out;
      },
      "dir"_a);

  // losses
  m.def(
      "homography_loss",
      [](const std::vector<DoubleArray>& est, const std::vector<DoubleArray>& gt) {
        std::vector<CornerDisplacement> e, g;
        for (const auto& a : est) e.push_back(to_d(a));
        for (const auto& a : gt) g.push_back(to_d(a));
        return hmgdyn::train::homography_loss(e, g);
      },
      "est"_a, "gt"_a);
  m.def(
      "mask_loss",
      [](const std::vector<FloatArray>& pred, const std::vector<FloatArray>& gt) {
        std::vector<GrayImage> p, g;
        for (const auto& a : pred) p.push_back(to_image(a));
        for (const auto& a : gt) g.push_back(to_image(a));
        return hmgdyn::train::mask_loss(p, g);
      },
      "pred"_a, "gt"_a);
  m.def(
      "total_loss",
      [](const std::vector<double>& lf, const std::vector<double>& ld, double sigma_f, double sigma_d) {
        return hmgdyn::train::total_loss(lf, ld, {sigma_f, sigma_d});
      },
      "l_f"_a, "l_d"_a, "sigma_f"_a, "sigma_d"_a);

  // models and evaluation
  py::class_<PyModel>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& p) { return PyModel(hmgdyn::train::load_model(p)); }, "path"_a)
      .def("estimate", &PyModel::estimate, "moving"_a, "reference"_a)
      .def_property_readonly("input_size", &PyModel::input_size)
      .def_property_readonly("n_scales", &PyModel::n_scales)
      .def_property_readonly("mask_enabled", &PyModel::mask_enabled)
      .def_property_readonly("iteration", &PyModel::iteration);

  m.def(
      "evaluate",
      [](const std::vector<py::dict>& samples, const std::string& estimator, PyModel* model) {
        hmgdyn::datasynth::Dataset ds;
        for (const auto& d : samples) ds.samples.push_back(sample_from(d));
        hmgdyn::train::Estimator est;
        if (estimator == "identity") {
          est = hmgdyn::train::identity_estimator();
        } else if (estimator == "oracle") {
          est = hmgdyn::train::oracle_estimator();
        } else if (estimator == "ransac") {
          est = hmgdyn::train::ransac_estimator({});
        } else if (estimator == "model") {
          if (!model) throw py::value_error("estimator 'model' needs a Model");
          est = hmgdyn::train::model_estimator(model->model());
        } else {
          throw py::value_error("unknown estimator " + estimator);
        }
        const auto thresholds = hmgdyn::train::default_thresholds();
        const auto ratios = hmgdyn::train::default_ratio_thresholds();
        return report_dict(hmgdyn::train::evaluate(est, ds, thresholds, ratios));
      },
      "samples"_a, "estimator"_a = "identity", "model"_a = nullptr);
}
