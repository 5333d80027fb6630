// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/tensor.hpp"

namespace hgs {

/// PSNR in dB for peak value 1.0, capped at 99 when MSE < 1e-10.
template <class T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.defined() && b.defined() && a.shape() == b.shape(), "psnr: shape mismatch");
    double mse = 0;
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = double(pa[i]) - double(pb[i]);
        mse += d * d;
    }
    mse /= double(a.numel());
    if (mse < 1e-10) return 99.0;
    return -10.0 * std::log10(mse);
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, L=1.
/// Images are [H,W,C]; channels are averaged. Window statistics are taken
/// over the valid interior (no padding).
template <class T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.defined() && b.defined() && a.shape() == b.shape() && a.rank() == 3,
          "ssim: [H,W,C] inputs with equal shapes required");
    const int64_t h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
    const int win = 11, half = win / 2;
    check(h >= win && w >= win, "ssim: image must be at least 11x11, got ", h, "x", w);
    double kernel[win];
    double ksum = 0;
    for (int i = 0; i < win; ++i) {
        double x = double(i - half);
        kernel[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
        ksum += kernel[i];
    }
    for (int i = 0; i < win; ++i) kernel[i] /= ksum;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    double total = 0;
    int64_t windows = 0;
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t cy = half; cy < h - half; ++cy)
            for (int64_t cx = half; cx < w - half; ++cx) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int ky = 0; ky < win; ++ky)
                    for (int kx = 0; kx < win; ++kx) {
                        double wgt = kernel[ky] * kernel[kx];
                        double va = a.ptr()[((cy + ky - half) * w + (cx + kx - half)) * c + ch];
                        double vb = b.ptr()[((cy + ky - half) * w + (cx + kx - half)) * c + ch];
                        mx += wgt * va;
                        my += wgt * vb;
                        sxx += wgt * va * va;
                        syy += wgt * vb * vb;
                        sxy += wgt * va * vb;
                    }
                double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
                double num = (2 * mx * my + c1) * (2 * cov + c2);
                double den = (mx * mx + my * my + c1) * (vx + vy + c2);
                total += num / den;
                ++windows;
            }
    return total / double(windows);
}

} // namespace hgs
