#include "fieldfuse/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "fieldfuse/error.hpp"

namespace fieldfuse {

namespace {

void check_shapes(const Image& a, const Image& b, const char* who) {
  if (!a.same_shape(b)) fail(ErrorCode::kInvalidArgument, std::string(who) + ": image shapes differ");
  if (a.data.empty()) fail(ErrorCode::kInvalidArgument, std::string(who) + ": empty images");
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    taps[static_cast<size_t>(i)] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    sum += taps[static_cast<size_t>(i)];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

/// Valid-mode separable filtering of a single plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h,
                                 const std::array<double, kWindow>& taps) {
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<size_t>(ow) * static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        s += taps[static_cast<size_t>(k)] * plane[static_cast<size_t>(y * w + x + k)];
      }
      rows[static_cast<size_t>(y * ow + x)] = s;
    }
  }
  std::vector<double> out(static_cast<size_t>(ow) * static_cast<size_t>(oh));
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        s += taps[static_cast<size_t>(k)] * rows[static_cast<size_t>((y + k) * ow + x)];
      }
      out[static_cast<size_t>(y * ow + x)] = s;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_shapes(a, b, "psnr");
  double sse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double ssim(const Image& a, const Image& b) {
  check_shapes(a, b, "ssim");
  if (a.width < kWindow || a.height < kWindow) {
    fail(ErrorCode::kInvalidArgument, "ssim: images must be at least 11x11");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const auto taps = gaussian_taps();
  const int w = a.width, h = a.height;
  const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (size_t i = 0; i < n; ++i) {
      const double va = a.data[i * static_cast<size_t>(a.channels) + static_cast<size_t>(c)];
      const double vb = b.data[i * static_cast<size_t>(b.channels) + static_cast<size_t>(c)];
      pa[i] = va;
      pb[i] = vb;
      paa[i] = va * va;
      pbb[i] = vb * vb;
      pab[i] = va * vb;
    }
    const auto mu_a = filter_valid(pa, w, h, taps);
    const auto mu_b = filter_valid(pb, w, h, taps);
    const auto e_aa = filter_valid(paa, w, h, taps);
    const auto e_bb = filter_valid(pbb, w, h, taps);
    const auto e_ab = filter_valid(pab, w, h, taps);
    double sum = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double var_a = e_aa[i] - ma * ma;
      const double var_b = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / a.channels;
}

}  // namespace fieldfuse
