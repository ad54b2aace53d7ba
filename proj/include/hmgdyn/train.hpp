#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hmgdyn/dataset.hpp"
#include "hmgdyn/models.hpp"
#include "hmgdyn/nn/optim.hpp"

namespace hmgdyn::train {

using datasynth::Dataset;
using datasynth::TrainingSample;
using geometry::CornerDisplacement;
using geometry::Homography;
using imaging::GrayImage;

// ---------------------------------------------------------------------------
// Losses

struct LossWeights {
  double sigma_f = 1.0;
  double sigma_d = 0.0;

  void validate() const;
};

// Sum over scales of the mean squared difference of the 8 components.
double homography_loss(std::span<const CornerDisplacement> est, std::span<const CornerDisplacement> gt);

// Binary cross entropy with predictions clamped to [1e-7, 1 - 1e-7], averaged
// over pixels and over every mask in the list.
double mask_loss(std::span<const GrayImage> pred, std::span<const GrayImage> gt);

// sum_k sigma_f * l_f[k] + sigma_d * l_d[k]
double total_loss(std::span<const double> l_f, std::span<const double> l_d, const LossWeights& w);

// Batched forms used by the training loop. pred is (B, 8, 1, 1); the mean is
// over the batch and the 8 components. grad (optional) receives d loss / d pred.
double displacement_mse(const nn::Tensor<float>& pred, std::span<const CornerDisplacement> gt, nn::Tensor<float>* grad);

// probs and gt are (B, C, H, W). grad_logits (optional) receives the gradient
// with respect to the logits that produced probs; zero where the clamp is active.
double mask_bce(const nn::Tensor<float>& probs, const nn::Tensor<float>& gt, nn::Tensor<float>* grad_logits);

// ---------------------------------------------------------------------------
// Training

struct Phase {
  long iterations = 0;
  LossWeights weights;
};

struct PhasePlan {
  std::vector<Phase> phases;

  void validate() const;
  long total_iterations() const;
  // Zero-based phase index for a one-based global iteration.
  int phase_at(long iteration) const;

  // sigma_d = 0, 10, 0 in the three phases.
  static PhasePlan desk();  // 3000 / 2000 / 2000
  static PhasePlan full();  // 2e6 / 1e6 / 1e6
};

struct TrainConfig {
  models::Preset preset = models::Preset::Desk;
  bool mask_enabled = false;
  int n_scales = 0;  // 0: preset default
  int batch_size = 16;
  std::uint64_t seed = 1;
  nn::LearningSchedule schedule;
  PhasePlan plan = PhasePlan::desk();
  long checkpoint_every = 1000;
  long log_every = 100;  // progress lines on the log callback
  std::filesystem::path out_dir;  // empty: no files written

  void validate() const;
  models::MhnConfig model_config() const;
  std::string to_json() const;
};

// Desk defaults: batch 16, learning rate 1e-3 (see README).
TrainConfig desk_train_config(bool mask_enabled);
TrainConfig full_train_config(bool mask_enabled);

struct LossRecord {
  long iteration = 0;
  int phase = 0;
  LossWeights weights;
  double total = 0.0;
  std::vector<double> l_f;  // index = pyramid level
  std::vector<double> l_d;
  double rate = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> losses;  // records of this invocation only
  long final_iteration = 0;
  long fallbacks = 0;
};

using LogFn = std::function<void(const std::string&)>;

// Runs iterations start_iteration+1 .. plan.total_iterations(). The batch at
// iteration i is fixed by (seed, i), so a resumed run sees the same batches.
// With out_dir set, appends to losses.csv and writes checkpoint.bin.
TrainResult train(const TrainConfig& cfg, const Dataset& ds, models::Mhn& model, long start_iteration = 0,
                  const LogFn& log = {});

// Checkpoint payload: {"model": ..., "train": ...} config plus named tensors.
void save_model(const std::filesystem::path& path, const models::Mhn& model, long iteration,
                const std::string& train_json = "{}");
struct LoadedModel {
  models::Mhn model;
  long iteration = 0;
  std::string train_json;
};
LoadedModel load_model(const std::filesystem::path& path);

void write_losses_csv(const std::filesystem::path& path, std::span<const LossRecord> records, int n_scales,
                      bool append);

// ---------------------------------------------------------------------------
// Evaluation

// Returns one homography per sample mapping patch_b onto patch_a.
using Estimator = std::function<std::vector<Homography>(std::span<const TrainingSample>)>;

Estimator model_estimator(models::Mhn& model, int batch_size = 32);
Estimator identity_estimator();
Estimator oracle_estimator();

struct RansacConfig {
  int iterations = 500;
  double inlier_tol = 1.0;
  int block = 8;
  int radius = 12;
  std::uint64_t seed = 7;
};
Estimator ransac_estimator(const RansacConfig& cfg);

// Grid correspondences from block matching, 4-point RANSAC, least-squares refit
// on the best consensus set. Maps i1 coordinates onto i2.
Homography ransac_baseline(const GrayImage& i1, const GrayImage& i2, int iters, double inlier_tol, Rng& rng,
                           int block = 8, int radius = 12);

// The RANSAC core over precomputed matches. Matches are sorted canonically
// first, so any permutation of the same list gives the same result.
Homography ransac_from_matches(std::vector<datasynth::BlockMatch> matches, int iters, double inlier_tol, Rng& rng);

// Normalized DLT over all given correspondences.
Homography fit_homography_lsq(std::span<const geometry::Point2> src, std::span<const geometry::Point2> dst);

struct Slice {
  double ratio_threshold = 0.0;
  long n = 0;
  double mean_ec = 0.0;
  double median_ec = 0.0;
};

struct MetricsReport {
  std::vector<double> errors;  // per sample, dataset order
  double mean_ec = 0.0;
  double median_ec = 0.0;
  std::vector<double> thresholds;
  std::vector<double> cdf;  // fraction with e_c <= threshold
  std::vector<Slice> slices;
};

// 0.1 .. 20 px, log-spaced.
std::vector<double> default_thresholds(int count = 41);
std::vector<double> default_ratio_thresholds();

double median(std::vector<double> v);
std::vector<double> cdf_at(std::span<const double> errors, std::span<const double> thresholds);

// Slices keep samples with dynamic_area_ratio <= threshold, so the slice at 0
// is exactly the static subset.
MetricsReport evaluate(const Estimator& est, const Dataset& ds, std::span<const double> thresholds,
                       std::span<const double> ratio_thresholds);
MetricsReport report_from_errors(std::vector<double> errors, std::span<const double> ratios,
                                 std::span<const double> thresholds, std::span<const double> ratio_thresholds);

struct NamedReport {
  std::string name;
  MetricsReport report;
};

// metrics.json, cdf.csv, slices.csv for the first report; the rest become
// extra columns in cdf.csv, entries under "baselines" and slices_<name>.csv.
void write_reports(const std::filesystem::path& dir, std::span<const NamedReport> reports);

}  // namespace hmgdyn::train
