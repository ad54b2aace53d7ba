#include <algorithm>
#include <cmath>

#include "hmgdyn/error.hpp"
#include "hmgdyn/train.hpp"

namespace hmgdyn::train {

void LossWeights::validate() const {
  if (!(sigma_f >= 0.0) || !(sigma_d >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "loss weights must be >= 0");
  if (sigma_f == 0.0 && sigma_d == 0.0) throw Error(ErrorKind::ConfigInvalid, "sigma_f and sigma_d are both zero");
}

double homography_loss(std::span<const CornerDisplacement> est, std::span<const CornerDisplacement> gt) {
  if (est.size() != gt.size()) {
    throw Error(ErrorKind::ShapeMismatch, "homography_loss: " + std::to_string(est.size()) + " estimated scales vs " +
                                              std::to_string(gt.size()) + " ground truth");
  }
  double total = 0.0;
  for (size_t k = 0; k < est.size(); ++k) {
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double e = est[k].d[i] - gt[k].d[i];
      s += e * e;
    }
    total += s / 8.0;
  }
  return total;
}

namespace {

constexpr double kClamp = 1e-7;

double bce(double p, double g) {
  const double q = std::clamp(p, kClamp, 1.0 - kClamp);
  return -(g * std::log(q) + (1.0 - g) * std::log(1.0 - q));
}

}  // namespace

double mask_loss(std::span<const GrayImage> pred, std::span<const GrayImage> gt) {
  if (pred.size() != gt.size() || pred.empty()) throw Error(ErrorKind::ShapeMismatch, "mask_loss: mask count mismatch");
  double total = 0.0;
  for (size_t m = 0; m < pred.size(); ++m) {
    if (!pred[m].same_size(gt[m])) throw Error(ErrorKind::ShapeMismatch, "mask_loss: mask size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < pred[m].data.size(); ++i) s += bce(pred[m].data[i], gt[m].data[i]);
    total += s / static_cast<double>(pred[m].data.size());
  }
  return total / static_cast<double>(pred.size());
}

double total_loss(std::span<const double> l_f, std::span<const double> l_d, const LossWeights& w) {
  if (!l_d.empty() && l_d.size() != l_f.size()) throw Error(ErrorKind::ShapeMismatch, "total_loss: scale count mismatch");
  double t = 0.0;
  for (size_t k = 0; k < l_f.size(); ++k) {
    t += w.sigma_f * l_f[k];
    if (!l_d.empty()) t += w.sigma_d * l_d[k];
  }
  return t;
}

double displacement_mse(const nn::Tensor<float>& pred, std::span<const CornerDisplacement> gt, nn::Tensor<float>* grad) {
  const int batch = pred.shape.n;
  if (pred.shape.c != 8 || pred.shape.plane() != 1 || static_cast<int>(gt.size()) != batch) {
    throw Error(ErrorKind::ShapeMismatch, "displacement_mse: prediction " + pred.shape.str() + " vs " +
                                              std::to_string(gt.size()) + " targets");
  }
  const double norm = 1.0 / (8.0 * batch);
  if (grad) *grad = nn::Tensor<float>(pred.shape);
  double s = 0.0;
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < 8; ++i) {
      const double e = pred.at(b, i, 0, 0) - gt[b].d[i];
      s += e * e;
      if (grad) grad->at(b, i, 0, 0) = static_cast<float>(2.0 * e * norm);
    }
  }
  return s * norm;
}

double mask_bce(const nn::Tensor<float>& probs, const nn::Tensor<float>& gt, nn::Tensor<float>* grad_logits) {
  if (!(probs.shape == gt.shape) || probs.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "mask_bce: " + probs.shape.str() + " vs " + gt.shape.str());
  }
  const double norm = 1.0 / static_cast<double>(probs.size());
  if (grad_logits) *grad_logits = nn::Tensor<float>(probs.shape);
  double s = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = probs.data[i];
    const double g = gt.data[i];
    s += bce(p, g);
    if (grad_logits && p > kClamp && p < 1.0 - kClamp) grad_logits->data[i] = static_cast<float>((p - g) * norm);
  }
  return s * norm;
}

}  // namespace hmgdyn::train
