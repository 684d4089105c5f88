#pragma once

// Image quality metrics on [0,1] float images.
//
// PSNR: 10 * log10(1 / MSE), MSE over all pixels and channels.
// SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1,
// windows fully inside the image, averaged over window positions and the
// three channels.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "scenefield/image.hpp"

namespace scenefield {

struct PsnrResult {
  double db = 0.0;
  bool exact_match = false;  // identical inputs; db is +inf
};

inline double mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("image shape mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    sum += d * d;
  }
  return sum / double(a.rgb.size());
}

inline PsnrResult psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {10.0 * std::log10(1.0 / m), false};
}

inline double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("image shape mismatch");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (a.width < kWin || a.height < kWin)
    throw std::invalid_argument("image smaller than the SSIM window");

  double weight[kWin][kWin];
  double wsum = 0.0;
  for (int y = 0; y < kWin; ++y)
    for (int x = 0; x < kWin; ++x) {
      const double dx = x - (kWin - 1) / 2.0, dy = y - (kWin - 1) / 2.0;
      weight[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      wsum += weight[y][x];
    }
  for (auto& row : weight)
    for (double& w : row) w /= wsum;

  double total = 0.0;
  long long count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y0 = 0; y0 + kWin <= a.height; ++y0) {
      for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int y = 0; y < kWin; ++y)
          for (int x = 0; x < kWin; ++x) {
            const double w = weight[y][x];
            const double va = a.at(x0 + x, y0 + y, c);
            const double vb = b.at(x0 + x, y0 + y, c);
            mu_a += w * va;
            mu_b += w * vb;
            aa += w * va * va;
            bb += w * vb * vb;
            ab += w * va * vb;
          }
        const double var_a = aa - mu_a * mu_a;
        const double var_b = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
        const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
        total += num / den;
        ++count;
      }
    }
  }
  return total / double(count);
}

}  // namespace scenefield
