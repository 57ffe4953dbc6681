#pragma once

#include "smokeforge/image.hpp"

#include <cstddef>
#include <span>

namespace smokeforge::metrics
{
    using image::Frame;

    // 10 log10(1 / MSE) over all pixels and channels; +infinity when the
    // frames are identical.
    double psnr(const Frame &a, const Frame &b);

    struct PsnrSummary
    {
        double mean = 0.0; // over finite frames only
        std::size_t finite_frames = 0;
        std::size_t infinite_frames = 0;
    };

    PsnrSummary psnr_sequence(std::span<const Frame> a, std::span<const Frame> b);

    constexpr int kSsimWindow = 11;
    constexpr double kSsimSigma = 1.5;

    // Gaussian-windowed SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 1) over
    // every fully contained window, averaged over windows and channels.
    double ssim(const Frame &a, const Frame &b);
} // namespace smokeforge::metrics
