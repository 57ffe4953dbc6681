#pragma once

#include "smokeforge/image.hpp"

#include <cstddef>
#include <optional>
#include <vector>

// Analytic smoke/haze image model: mask smoothing, coarse extraction, haze
// compositing, dark-channel atmospheric light, clean-smoke recovery, the
// decay weight for generated frames and the frequency loss.
namespace smokeforge::haze
{
    using image::Frame;
    using image::MaskFrame;

    constexpr double kDefaultMaskSigma = 2.0;
    constexpr int kDefaultDarkPatch = 15;
    constexpr double kDefaultTopFraction = 0.001;
    constexpr double kDefaultDenomFloor = 0.02;
    constexpr double kDefaultFrequencyLambda = 0.001;

    // Separable Gaussian blur (radius ceil(4 sigma)), half-sample symmetric
    // borders.
    MaskFrame smooth_mask(const MaskFrame &mask, double sigma = kDefaultMaskSigma);

    // S~ = mask * I, mask broadcast over channels.
    Frame extract_coarse(const MaskFrame &mask, const Frame &frame);

    // I~ = I_clean (1 - S~) + A S~, clamped to [0,1]. A has one entry per
    // channel of clean_bg (or a single entry used for all); smoke may have
    // one channel (broadcast) or match clean_bg.
    Frame composite_haze(const Frame &clean_bg, const Frame &smoke, const std::vector<double> &A);

    // Same model with the A S~ term given per pixel (premultiplied smoke
    // radiance): I~ = I_clean (1 - S~) + radiance, clamped to [0,1].
    Frame composite_premultiplied(const Frame &clean_bg, const Frame &smoke, const Frame &radiance);

    // Per-pixel min over channels, then min over a patch x patch window
    // (borders clamped).
    MaskFrame dark_channel(const Frame &frame, int patch = kDefaultDarkPatch);

    // Per-channel max of the frame over the brightest top_fraction of the
    // dark channel (at least one pixel; ties broken by pixel index).
    std::vector<double> estimate_atmospheric_light(const Frame &frame, int patch = kDefaultDarkPatch,
                                                   double top_fraction = kDefaultTopFraction);

    struct ExtractionReport
    {
        std::size_t total_pixels = 0;
        // Pixels with |I_clean - A| < floor on at least one channel.
        std::size_t floor_pixels = 0;
        double floor_fraction() const
        {
            return total_pixels ? static_cast<double>(floor_pixels) / static_cast<double>(total_pixels) : 0.0;
        }
    };

    struct Extraction
    {
        Frame smoke;
        ExtractionReport report;
        // 1 where the floor fallback was used.
        MaskFrame floor_mask;
    };

    // S = 1 - (I - A) / (I_clean - A), clamped to [0,1]. Channels whose
    // denominator is under denom_floor take the fallback value (the coarse
    // extraction), or 0 without one.
    Extraction extract_clean_smoke(const Frame &frame, const Frame &recovered_bg, const std::vector<double> &A,
                                   const std::optional<Frame> &fallback = std::nullopt,
                                   double denom_floor = kDefaultDenomFloor);

    struct WeightSchedule
    {
        double w_min = 0.0;
        double k = 0.02;
        int t0 = 0;

        void validate() const;
    };

    // w_t = w_min + (1 - w_min) exp(-k (t - t0)); t >= t0.
    double decay_weight(const WeightSchedule &schedule, int t);

    enum class PhaseDifference
    {
        Raw,     // |phase - phase'| of principal values
        Wrapped, // shortest angular distance
    };

    struct FrequencyLossOptions
    {
        int warmup = 0;
        double lambda = kDefaultFrequencyLambda;
        PhaseDifference phase = PhaseDifference::Raw;
    };

    // Unweighted term: mean |amp - amp'| + mean |phase - phase'| over every
    // 2D DFT bin of every channel.
    double frequency_distance(const Frame &pred, const Frame &target, PhaseDifference phase = PhaseDifference::Raw);

    // lambda * min(1, iter / warmup) * frequency_distance; warmup 0 means
    // full weight.
    double frequency_loss(const Frame &pred, const Frame &target, int iter, const FrequencyLossOptions &options = {});
} // namespace smokeforge::haze
