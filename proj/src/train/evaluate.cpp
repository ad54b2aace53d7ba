#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hmgdyn/error.hpp"
#include "hmgdyn/train.hpp"
#include "json.hpp"

namespace hmgdyn::train {

using nlohmann::json;

Estimator model_estimator(models::Mhn& model, int batch_size) {
  return [&model, batch_size](std::span<const TrainingSample> samples) {
    std::vector<Homography> out;
    out.reserve(samples.size());
    Rng rng(0);
    for (size_t start = 0; start < samples.size(); start += batch_size) {
      const size_t end = std::min(samples.size(), start + static_cast<size_t>(batch_size));
      std::vector<models::PairView> views;
      for (size_t i = start; i < end; ++i) views.push_back({&samples[i].patch_b, &samples[i].patch_a});
      for (const auto& r : model.forward_batch(views, nn::Mode::Infer, rng)) out.push_back(r.homography);
    }
    return out;
  };
}

Estimator identity_estimator() {
  return [](std::span<const TrainingSample> samples) { return std::vector<Homography>(samples.size()); };
}

Estimator oracle_estimator() {
  return [](std::span<const TrainingSample> samples) {
    std::vector<Homography> out;
    for (const auto& s : samples) out.push_back(s.gt_homography());
    return out;
  };
}

Estimator ransac_estimator(const RansacConfig& cfg) {
  return [cfg](std::span<const TrainingSample> samples) {
    std::vector<Homography> out;
    for (size_t i = 0; i < samples.size(); ++i) {
      Rng rng(mix_seed(cfg.seed, i));
      try {
        out.push_back(ransac_baseline(samples[i].patch_b, samples[i].patch_a, cfg.iterations, cfg.inlier_tol, rng,
                                      cfg.block, cfg.radius));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientCorrespondences) throw;
        out.emplace_back();
      }
    }
    return out;
  };
}

std::vector<double> default_thresholds(int count) {
  if (count < 2) throw Error(ErrorKind::ConfigInvalid, "need at least two thresholds");
  std::vector<double> t(count);
  const double lo = std::log(0.1), hi = std::log(20.0);
  for (int i = 0; i < count; ++i) t[i] = std::exp(lo + (hi - lo) * i / (count - 1));
  t.front() = 0.1;
  t.back() = 20.0;
  return t;
}

std::vector<double> default_ratio_thresholds() { return {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0}; }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> cdf_at(std::span<const double> errors, std::span<const double> thresholds) {
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  for (double t : thresholds) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back(sorted.empty() ? 0.0 : static_cast<double>(n) / sorted.size());
  }
  return out;
}

namespace {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

}  // namespace

MetricsReport report_from_errors(std::vector<double> errors, std::span<const double> ratios,
                                 std::span<const double> thresholds, std::span<const double> ratio_thresholds) {
  if (errors.empty()) throw Error(ErrorKind::DatasetEmpty, "no samples to evaluate");
  if (ratios.size() != errors.size()) throw Error(ErrorKind::SizeMismatch, "one dynamic-area ratio per error needed");
  MetricsReport r;
  r.errors = std::move(errors);
  r.mean_ec = mean(r.errors);
  r.median_ec = median(r.errors);
  r.thresholds.assign(thresholds.begin(), thresholds.end());
  r.cdf = cdf_at(r.errors, thresholds);
  for (double t : ratio_thresholds) {
    std::vector<double> sub;
    for (size_t i = 0; i < r.errors.size(); ++i) {
      if (ratios[i] <= t) sub.push_back(r.errors[i]);
    }
    r.slices.push_back({t, static_cast<long>(sub.size()), mean(sub), median(sub)});
  }
  return r;
}

MetricsReport evaluate(const Estimator& est, const Dataset& ds, std::span<const double> thresholds,
                       std::span<const double> ratio_thresholds) {
  if (ds.samples.empty()) throw Error(ErrorKind::DatasetEmpty, "evaluation dataset has no samples");
  const std::vector<Homography> hs = est(ds.samples);
  if (hs.size() != ds.samples.size()) throw Error(ErrorKind::SizeMismatch, "estimator returned wrong count");
  std::vector<double> errors, ratios;
  for (size_t i = 0; i < hs.size(); ++i) {
    const TrainingSample& s = ds.samples[i];
    errors.push_back(geometry::mean_corner_error(hs[i], s.gt_homography(), s.frame()));
    ratios.push_back(s.dynamic_area_ratio);
  }
  return report_from_errors(std::move(errors), ratios, thresholds, ratio_thresholds);
}

namespace {

json summary_json(const MetricsReport& r) {
  return json{{"n", r.errors.size()}, {"mean_ec", r.mean_ec}, {"median_ec", r.median_ec}};
}

void write_slices(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  os << "ratio_threshold,n,mean_ec,median_ec\n";
  char buf[128];
  for (const Slice& s : r.slices) {
    std::snprintf(buf, sizeof(buf), "%.6g,%ld,%.9g,%.9g\n", s.ratio_threshold, s.n, s.mean_ec, s.median_ec);
    os << buf;
  }
}

}  // namespace

void write_reports(const std::filesystem::path& dir, std::span<const NamedReport> reports) {
  if (reports.empty()) return;
  std::filesystem::create_directories(dir);
  const MetricsReport& main = reports[0].report;

  json metrics = summary_json(main);
  metrics["estimator"] = reports[0].name;
  json slices = json::array();
  for (const Slice& s : main.slices) {
    slices.push_back({{"ratio_threshold", s.ratio_threshold}, {"n", s.n}, {"mean_ec", s.mean_ec}, {"median_ec", s.median_ec}});
  }
  metrics["slices"] = slices;
  json baselines = json::object();
  for (size_t i = 1; i < reports.size(); ++i) baselines[reports[i].name] = summary_json(reports[i].report);
  metrics["baselines"] = baselines;
  {
    std::ofstream os(dir / "metrics.json");
    if (!os) throw Error(ErrorKind::IoError, "cannot write metrics.json in " + dir.string());
    os << metrics.dump(2) << "\n";
  }

  std::ofstream cdf(dir / "cdf.csv");
  if (!cdf) throw Error(ErrorKind::IoError, "cannot write cdf.csv in " + dir.string());
  cdf << "threshold,fraction";
  for (size_t i = 1; i < reports.size(); ++i) cdf << ",fraction_" << reports[i].name;
  cdf << "\n";
  char buf[64];
  for (size_t t = 0; t < main.thresholds.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.6g", main.thresholds[t]);
    cdf << buf;
    for (const NamedReport& nr : reports) {
      const double f = t < nr.report.cdf.size() ? nr.report.cdf[t] : 0.0;
      std::snprintf(buf, sizeof(buf), ",%.6f", f);
      cdf << buf;
    }
    cdf << "\n";
  }

  write_slices(dir / "slices.csv", main);
  for (size_t i = 1; i < reports.size(); ++i) write_slices(dir / ("slices_" + reports[i].name + ".csv"), reports[i].report);
}

}  // namespace hmgdyn::train
