#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hmgdyn/error.hpp"
#include "hmgdyn/train.hpp"
#include "json.hpp"

namespace hmgdyn::train {

using nlohmann::json;
using nn::Shape;
using nn::Tensor;

void PhasePlan::validate() const {
  if (phases.empty()) throw Error(ErrorKind::ConfigInvalid, "phase plan is empty");
  for (const Phase& p : phases) {
    if (p.iterations <= 0) throw Error(ErrorKind::ConfigInvalid, "phase iterations must be > 0");
    p.weights.validate();
  }
}

long PhasePlan::total_iterations() const {
  long n = 0;
  for (const Phase& p : phases) n += p.iterations;
  return n;
}

int PhasePlan::phase_at(long iteration) const {
  long end = 0;
  for (size_t i = 0; i < phases.size(); ++i) {
    end += phases[i].iterations;
    if (iteration <= end) return static_cast<int>(i);
  }
  return static_cast<int>(phases.size()) - 1;
}

PhasePlan PhasePlan::desk() { return PhasePlan{{{3000, {1.0, 0.0}}, {2000, {1.0, 10.0}}, {2000, {1.0, 0.0}}}}; }

PhasePlan PhasePlan::full() {
  return PhasePlan{{{2000000, {1.0, 0.0}}, {1000000, {1.0, 10.0}}, {1000000, {1.0, 0.0}}}};
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error(ErrorKind::ConfigInvalid, "batch size must be >= 2 for batch normalization");
  if (checkpoint_every < 1) throw Error(ErrorKind::ConfigInvalid, "checkpoint cadence must be >= 1");
  schedule.validate();
  plan.validate();
  model_config().validate();
}

models::MhnConfig TrainConfig::model_config() const { return models::MhnConfig::make(preset, mask_enabled, n_scales); }

std::string TrainConfig::to_json() const {
  json phases = json::array();
  for (const Phase& p : plan.phases) {
    phases.push_back({{"iterations", p.iterations}, {"sigma_f", p.weights.sigma_f}, {"sigma_d", p.weights.sigma_d}});
  }
  return json{{"preset", models::preset_name(preset)},
              {"model", mask_enabled ? "mhn_m" : "mhn"},
              {"n_scales", model_config().n_scales},
              {"batch_size", batch_size},
              {"seed", seed},
              {"learning_rate", schedule.initial_rate},
              {"decay_step", schedule.decay_step},
              {"decay_rate", schedule.decay_rate},
              {"phases", phases},
              {"checkpoint_every", checkpoint_every}}
      .dump();
}

TrainConfig desk_train_config(bool mask_enabled) {
  TrainConfig c;
  c.preset = models::Preset::Desk;
  c.mask_enabled = mask_enabled;
  c.batch_size = 16;
  c.schedule.initial_rate = 1e-3;
  c.plan = PhasePlan::desk();
  return c;
}

TrainConfig full_train_config(bool mask_enabled) {
  TrainConfig c;
  c.preset = models::Preset::Full;
  c.mask_enabled = mask_enabled;
  c.batch_size = 32;
  c.schedule = nn::LearningSchedule{};
  c.plan = PhasePlan::full();
  c.checkpoint_every = 10000;
  c.log_every = 1000;
  return c;
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646000000ULL;
constexpr std::uint64_t kDropoutStream = 0x44524f5000000000ULL;

// Epoch permutations keyed by epoch index; the two most recent are cached
// since a batch can straddle an epoch boundary.
class Sampler {
 public:
  Sampler(std::uint64_t seed, size_t n) : seed_(seed), n_(n) {}

  size_t at(long position) {
    const long epoch = position / static_cast<long>(n_);
    return perm(epoch)[position % static_cast<long>(n_)];
  }

 private:
  const std::vector<size_t>& perm(long epoch) {
    for (auto& [e, p] : cache_) {
      if (e == epoch) return p;
    }
    std::vector<size_t> p(n_);
    std::iota(p.begin(), p.end(), size_t{0});
    Rng rng(mix_seed(seed_ ^ kShuffleStream, static_cast<std::uint64_t>(epoch)));
    for (size_t i = n_; i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(p[i - 1], p[j]);
    }
    if (cache_.size() == 2) cache_.erase(cache_.begin());
    cache_.emplace_back(epoch, std::move(p));
    return cache_.back().second;
  }

  std::uint64_t seed_;
  size_t n_;
  std::vector<std::pair<long, std::vector<size_t>>> cache_;
};

GrayImage downscale_to(const GrayImage& img, int level) {
  GrayImage out = img;
  for (int i = 0; i < level; ++i) out = imaging::downscale_half(out);
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& ds, models::Mhn& model, long start_iteration,
                  const LogFn& log) {
  cfg.validate();
  if (ds.samples.empty()) throw Error(ErrorKind::DatasetEmpty, "training dataset has no samples");
#if defined(__GLIBC__)
  // Every step allocates and frees the same large activation buffers; keep
  // them on the heap instead of paying for mmap/munmap and page faults.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const models::MhnConfig& mc = model.config();
  const int size = mc.input_size;
  for (const TrainingSample& s : ds.samples) {
    if (s.patch_a.width != size || s.patch_a.height != size) {
      throw Error(ErrorKind::ShapeMismatch, "dataset patches are " + std::to_string(s.patch_a.width) +
                                                " px, model expects " + std::to_string(size));
    }
  }
  const long total = cfg.plan.total_iterations();
  if (start_iteration < 0 || start_iteration > total) {
    throw Error(ErrorKind::ConfigInvalid, "start iteration " + std::to_string(start_iteration) + " outside plan of " +
                                              std::to_string(total));
  }

  const int levels = mc.n_scales;
  const int batch = cfg.batch_size;
  auto params = model.parameters();
  Sampler sampler(cfg.seed, ds.samples.size());

  TrainResult result;
  result.final_iteration = start_iteration;
  std::vector<LossRecord> pending;
  const auto csv = cfg.out_dir.empty() ? std::filesystem::path{} : cfg.out_dir / "losses.csv";
  bool csv_started = start_iteration > 0 && !csv.empty() && std::filesystem::exists(csv);
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

  auto flush = [&](long iteration) {
    if (cfg.out_dir.empty()) return;
    write_losses_csv(csv, pending, levels, csv_started);
    csv_started = true;
    pending.clear();
    save_model(cfg.out_dir / "checkpoint.bin", model, iteration, cfg.to_json());
  };

  for (long it = start_iteration + 1; it <= total; ++it) {
    const int phase = cfg.plan.phase_at(it);
    const LossWeights w = cfg.plan.phases[phase].weights;
    const bool use_masks = mc.mask_enabled && w.sigma_d > 0.0;

    std::vector<const TrainingSample*> samples(batch);
    std::vector<models::PairView> views(batch);
    std::vector<Homography> gt(batch);
    for (int b = 0; b < batch; ++b) {
      samples[b] = &ds.samples[sampler.at((it - 1) * batch + b)];
      views[b] = {&samples[b]->patch_b, &samples[b]->patch_a};
      gt[b] = samples[b]->gt_homography();
    }

    LossRecord rec;
    rec.iteration = it;
    rec.phase = phase;
    rec.weights = w;
    rec.rate = cfg.schedule.rate_at(it);
    rec.l_f.assign(levels, 0.0);
    rec.l_d.assign(levels, 0.0);

    for (auto* p : params) p->zero_grad();

    models::ScaleHook hook = [&](models::ScaleStep& step) {
      const int k = step.level;
      const int s = size >> k;
      const auto frame = geometry::PatchFrame::square(s);
      std::vector<CornerDisplacement> target(batch);
      for (int b = 0; b < batch; ++b) {
        const Homography residual = geometry::to_coarser(gt[b], k) * geometry::invert(step.pre_alignment[b]);
        target[b] = geometry::homography_to_displacement(residual, frame);
      }
      std::vector<nn::Graph<float>::Seed> seeds;
      Tensor<float> gd;
      rec.l_f[k] = displacement_mse(step.graph.value(step.output.displacement), target, &gd);
      for (float& v : gd.data) v = static_cast<float>(v * w.sigma_f);
      seeds.push_back({step.output.displacement, std::move(gd)});

      if (use_masks) {
        Tensor<float> gtm(Shape{batch, 2, s, s});
        for (int b = 0; b < batch; ++b) {
          const GrayImage m1 = imaging::warp(downscale_to(samples[b]->mask_b, k), step.pre_alignment[b]);
          const GrayImage m2 = downscale_to(samples[b]->mask_a, k);
          std::copy(m1.data.begin(), m1.data.end(), gtm.plane(b, 0));
          std::copy(m2.data.begin(), m2.data.end(), gtm.plane(b, 1));
        }
        Tensor<float> gm;
        rec.l_d[k] = mask_bce(step.graph.value(step.output.masks), gtm, &gm);
        for (float& v : gm.data) v = static_cast<float>(v * w.sigma_d);
        seeds.push_back({step.output.mask_logits, std::move(gm)});
      }
      step.graph.backward(seeds);
    };

    Rng dropout_rng(mix_seed(cfg.seed ^ kDropoutStream, static_cast<std::uint64_t>(it)));
    const auto est = model.forward_batch(views, nn::Mode::Train, dropout_rng, hook);
    for (const auto& e : est) result.fallbacks += e.fallbacks;

    rec.total = total_loss(rec.l_f, rec.l_d, w);
    if (!std::isfinite(rec.total)) {
      throw Error(ErrorKind::NonFinite, "loss became non-finite at iteration " + std::to_string(it));
    }
    nn::adam_step<float>(params, cfg.schedule, it);

    result.losses.push_back(rec);
    pending.push_back(rec);
    result.final_iteration = it;

    if (log && (it % cfg.log_every == 0 || it == total)) {
      char buf[160];
      double lf = 0.0, ld = 0.0;
      for (int k = 0; k < levels; ++k) {
        lf += rec.l_f[k];
        ld += rec.l_d[k];
      }
      std::snprintf(buf, sizeof(buf), "iter %ld/%ld phase %d loss %.4f l_f %.4f l_d %.4f lr %.3g", it, total, phase + 1,
                    rec.total, lf, ld, rec.rate);
      log(buf);
    }
    if (it % cfg.checkpoint_every == 0 || it == total) flush(it);
  }
  if (!pending.empty() || (start_iteration == total && !cfg.out_dir.empty())) flush(result.final_iteration);
  return result;
}

void write_losses_csv(const std::filesystem::path& path, std::span<const LossRecord> records, int n_scales,
                      bool append) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  if (!append) {
    os << "iteration,phase,sigma_f,sigma_d,total";
    for (int k = 0; k < n_scales; ++k) os << ",l_f" << k;
    for (int k = 0; k < n_scales; ++k) os << ",l_d" << k;
    os << ",learning_rate\n";
  }
  char buf[64];
  for (const LossRecord& r : records) {
    os << r.iteration << ',' << r.phase + 1 << ',' << r.weights.sigma_f << ',' << r.weights.sigma_d;
    std::snprintf(buf, sizeof(buf), ",%.9g", r.total);
    os << buf;
    for (double v : r.l_f) {
      std::snprintf(buf, sizeof(buf), ",%.9g", v);
      os << buf;
    }
    for (double v : r.l_d) {
      std::snprintf(buf, sizeof(buf), ",%.9g", v);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.9g\n", r.rate);
    os << buf;
  }
}

void save_model(const std::filesystem::path& path, const models::Mhn& model, long iteration,
                const std::string& train_json) {
  nn::Checkpoint ck;
  ck.iteration = iteration;
  json cfg{{"model", json::parse(model.config().to_json())}, {"train", json::parse(train_json)}};
  ck.config_json = cfg.dump(2);
  model.save_tensors(ck.tensors);
  // Write then rename so an interrupted save leaves the old file intact.
  auto tmp = path;
  tmp += ".tmp";
  nn::write_checkpoint(tmp, ck);
  std::filesystem::rename(tmp, path);
}

LoadedModel load_model(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::read_checkpoint(path);
  json cfg;
  try {
    cfg = json::parse(ck.config_json);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoError, "checkpoint config is not JSON: " + std::string(e.what()));
  }
  if (!cfg.contains("model")) throw Error(ErrorKind::IoError, "checkpoint has no model config");
  LoadedModel lm{models::Mhn(models::MhnConfig::from_json(cfg["model"].dump()), 0), ck.iteration,
                 cfg.value("train", json::object()).dump()};
  lm.model.load_tensors(ck);
  return lm;
}

}  // namespace hmgdyn::train
