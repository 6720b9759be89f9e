#pragma once

#include <functional>
#include <vector>

#include "odm/data/dataset.hpp"
#include "odm/image.hpp"

namespace odm::eval {

// Constants of the multi-scale similarity computation. The stability
// constants and scale weights follow the standard parameterization
// (C1=(0.01*MAX)^2, C2=(0.03*MAX)^2, 11x11 sigma-1.5 window, the usual
// five-scale weights); all of it stays configurable.
struct MetricsConfig {
  double max_value = 1.0;  // MAX: 1.0 for normalized images, 255 for 8-bit
  double c1_k = 0.01;
  double c2_k = 0.03;
  int window = 11;
  double sigma = 1.5;
  int scales = 5;  // K
  // The published five-scale weights sum to 1.0001; they are normalized here
  // so the sum-to-one invariant holds exactly.
  std::vector<double> scale_weights = {0.0448 / 1.0001, 0.2856 / 1.0001, 0.3001 / 1.0001,
                                       0.2363 / 1.0001, 0.1333 / 1.0001};
  double downsample_sigma = 1.0;  // blur of the dyadic downsample chain
  int downsample_radius = 2;

  double c1() const { return (c1_k * max_value) * (c1_k * max_value); }
  double c2() const { return (c2_k * max_value) * (c2_k * max_value); }
  void validate() const;  // throws ConfigInvalid

  // Standard weights truncated to k scales and renormalized; window shrunk
  // when the smallest scale could not fit the default 11x11.
  static MetricsConfig for_scales(int k, int image_side, double max_value = 1.0);
};

// 10*log10(MAX^2/MSE); returns +infinity when the images are identical.
double psnr(const Image& a, const Image& b, double max_value = 1.0);

// Mean over sliding Gaussian windows (fully-valid positions only) of the
// luminance/contrast/structure product; channels averaged; NOT clamped, may
// be negative. Throws WindowTooLarge.
double ssim_single_scale(const Image& a, const Image& b, const MetricsConfig& cfg);

// prod_k clamp0(ssim_k)^{w_k} over the Gaussian blur + 2x downsample chain.
// Result in [0,1]. Throws ImageTooSmallForScales.
double ms_ssim(const Image& a, const Image& b, const MetricsConfig& cfg);

// Gaussian blur (replicate borders) followed by 2x subsampling.
Image downsample2x(const Image& im, double sigma, int radius);

// ---------------------------------------------------------------------------
// Effectiveness metrics. Classifiers are batch predictors so both engine
// paths (trainable graph, reference interpreter) and test stubs plug in.

struct Classifier {
  std::function<std::vector<int>(const std::vector<Image>&)> predict;
  std::vector<int> operator()(const std::vector<Image>& images) const { return predict(images); }
};

using TriggerFn = std::function<Image(const Image&)>;

// Percentage of correct argmax predictions. Throws EmptyTestset.
double benign_accuracy(const Classifier& model, const data::Dataset& testset);

// Applies the trigger to every pool sample (true label != target) and returns
// the percentage predicted as the target. Throws EmptyPool.
double attack_success_rate(const Classifier& model, const data::Dataset& benign_testset,
                           const TriggerFn& apply_trigger, int target_label);

double benign_accuracy_change(double ba_backdoor, double ba_normal);

// Stealth summary over image pairs.
struct StealthStats {
  double psnr_mean = 0.0;   // over finite values
  double psnr_min = 0.0;
  int psnr_infinite = 0;    // identical pairs, excluded from the mean
  double msssim_mean = 0.0;
  double msssim_min = 0.0;
  int pairs = 0;
};

StealthStats stealth_stats(const std::vector<Image>& benign,
                           const std::vector<Image>& poisoned, const MetricsConfig& cfg);

}  // namespace odm::eval
