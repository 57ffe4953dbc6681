#include "smokeforge/haze.hpp"

#include "smokeforge/error.hpp"

#include <fftw3.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>

namespace smokeforge::haze
{
    namespace
    {
        void require_same_size(const Frame &a, const Frame &b, const char *what)
        {
            a.validate();
            b.validate();
            if (a.width != b.width || a.height != b.height)
            {
                throw ArgumentError(std::string("dimension mismatch: ") + what);
            }
        }

        double channel_value(const std::vector<double> &A, int c)
        {
            return A.size() == 1 ? A[0] : A[static_cast<std::size_t>(c)];
        }

        void check_light(const std::vector<double> &A, int channels)
        {
            if (A.size() != 1 && A.size() != static_cast<std::size_t>(channels))
            {
                const std::string want = channels == 1 ? "1 value" : "1 or " + std::to_string(channels) + " values";
                throw ArgumentError(fmt::format("atmospheric light has {} values, the image has {} channel(s): expected {}",
                                                A.size(), channels, want));
            }
            for (double a : A)
            {
                if (!(a >= 0.0 && a <= 1.0))
                {
                    throw ArgumentError("atmospheric light must lie in [0,1]");
                }
            }
        }

        // Half-sample symmetric index: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
        int reflect(int i, int n)
        {
            const int period = 2 * n;
            int m = i % period;
            if (m < 0)
                m += period;
            return m < n ? m : period - 1 - m;
        }

        std::vector<double> gaussian_kernel(double sigma)
        {
            const int radius = static_cast<int>(std::ceil(4.0 * sigma));
            std::vector<double> k(2 * radius + 1);
            for (int i = -radius; i <= radius; ++i)
                k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
            const double sum = std::accumulate(k.begin(), k.end(), 0.0);
            for (double &v : k)
                v /= sum;
            return k;
        }

        // Both principal-value angle conventions need exact zeros where the
        // transform is real; round-off of either sign would flip -pi/+pi.
        double phase_of(std::complex<double> z, double tol)
        {
            double re = z.real();
            double im = z.imag();
            if (std::abs(re) <= tol)
                re = 0.0;
            if (std::abs(im) <= tol)
                im = 0.0;
            return std::atan2(im, re);
        }

        std::mutex fftw_planner_mutex;

        // Full complex 2D DFT of one real channel, row-major (height x width).
        std::vector<std::complex<double>> dft2(const Frame &f, int channel)
        {
            const int w = f.width;
            const int h = f.height;
            const std::size_t n = static_cast<std::size_t>(w) * h;
            fftw_complex *in = fftw_alloc_complex(n);
            fftw_complex *out = fftw_alloc_complex(n);
            if (!in || !out)
            {
                fftw_free(in);
                fftw_free(out);
                throw std::bad_alloc();
            }
            fftw_plan plan;
            {
                std::lock_guard lock(fftw_planner_mutex);
                plan = fftw_plan_dft_2d(h, w, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
            }
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    in[i][0] = f.at(x, y, channel);
                    in[i][1] = 0.0;
                }
            fftw_execute(plan);
            std::vector<std::complex<double>> result(n);
            for (std::size_t i = 0; i < n; ++i)
                result[i] = {out[i][0], out[i][1]};
            {
                std::lock_guard lock(fftw_planner_mutex);
                fftw_destroy_plan(plan);
            }
            fftw_free(in);
            fftw_free(out);
            return result;
        }

        double zero_tolerance(const Frame &f, int channel)
        {
            double s = 0.0;
            for (std::size_t p = 0; p < f.pixel_count(); ++p)
                s += std::abs(f.pixels[p * f.channels + channel]);
            return 1e-12 * std::max(1.0, s);
        }
    } // namespace

    MaskFrame smooth_mask(const MaskFrame &mask, double sigma)
    {
        mask.validate();
        if (!(sigma > 0.0) || !std::isfinite(sigma))
        {
            throw ArgumentError("smoothing sigma must be positive");
        }
        const std::vector<double> k = gaussian_kernel(sigma);
        const int r = static_cast<int>(k.size() / 2);
        const int w = mask.width;
        const int h = mask.height;
        MaskFrame tmp(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
            {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d)
                    acc += k[d + r] * mask.at(reflect(x + d, w), y);
                tmp.at(x, y) = acc;
            }
        MaskFrame out(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
            {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d)
                    acc += k[d + r] * tmp.at(x, reflect(y + d, h));
                out.at(x, y) = std::clamp(acc, 0.0, 1.0);
            }
        return out;
    }

    Frame extract_coarse(const MaskFrame &mask, const Frame &frame)
    {
        mask.validate();
        frame.validate();
        if (mask.width != frame.width || mask.height != frame.height)
        {
            throw ArgumentError("dimension mismatch: mask vs frame");
        }
        Frame out = frame;
        for (int y = 0; y < frame.height; ++y)
            for (int x = 0; x < frame.width; ++x)
                for (int c = 0; c < frame.channels; ++c)
                    out.at(x, y, c) = mask.at(x, y) * frame.at(x, y, c);
        return out;
    }

    Frame composite_premultiplied(const Frame &clean_bg, const Frame &smoke, const Frame &radiance)
    {
        require_same_size(clean_bg, smoke, "background vs smoke");
        require_same_size(clean_bg, radiance, "background vs smoke radiance");
        if ((smoke.channels != 1 && smoke.channels != clean_bg.channels) ||
            (radiance.channels != 1 && radiance.channels != clean_bg.channels))
        {
            throw ArgumentError("dimension mismatch: smoke channels");
        }
        Frame out = clean_bg;
        for (int y = 0; y < clean_bg.height; ++y)
            for (int x = 0; x < clean_bg.width; ++x)
                for (int c = 0; c < clean_bg.channels; ++c)
                {
                    const double s = smoke.at(x, y, smoke.channels == 1 ? 0 : c);
                    const double l = radiance.at(x, y, radiance.channels == 1 ? 0 : c);
                    out.at(x, y, c) = std::clamp(clean_bg.at(x, y, c) * (1.0 - s) + l, 0.0, 1.0);
                }
        return out;
    }

    Frame composite_haze(const Frame &clean_bg, const Frame &smoke, const std::vector<double> &A)
    {
        require_same_size(clean_bg, smoke, "background vs smoke");
        if (smoke.channels != 1 && smoke.channels != clean_bg.channels)
        {
            throw ArgumentError("dimension mismatch: smoke channels");
        }
        check_light(A, clean_bg.channels);
        Frame radiance(clean_bg.width, clean_bg.height, clean_bg.channels);
        for (int y = 0; y < clean_bg.height; ++y)
            for (int x = 0; x < clean_bg.width; ++x)
                for (int c = 0; c < clean_bg.channels; ++c)
                    radiance.at(x, y, c) = channel_value(A, c) * smoke.at(x, y, smoke.channels == 1 ? 0 : c);
        return composite_premultiplied(clean_bg, smoke, radiance);
    }

    MaskFrame dark_channel(const Frame &frame, int patch)
    {
        frame.validate();
        if (patch < 1 || patch % 2 == 0)
        {
            throw ArgumentError("dark-channel patch must be a positive odd integer");
        }
        const int w = frame.width;
        const int h = frame.height;
        const int r = patch / 2;
        MaskFrame pixel_min(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
            {
                double m = frame.at(x, y, 0);
                for (int c = 1; c < frame.channels; ++c)
                    m = std::min(m, frame.at(x, y, c));
                pixel_min.at(x, y) = m;
            }
        // The square min filter is separable.
        MaskFrame rows(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
            {
                double m = pixel_min.at(x, y);
                for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx)
                    m = std::min(m, pixel_min.at(xx, y));
                rows.at(x, y) = m;
            }
        MaskFrame out(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
            {
                double m = rows.at(x, y);
                for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
                    m = std::min(m, rows.at(x, yy));
                out.at(x, y) = m;
            }
        return out;
    }

    std::vector<double> estimate_atmospheric_light(const Frame &frame, int patch, double top_fraction)
    {
        if (!(top_fraction > 0.0 && top_fraction <= 1.0))
        {
            throw ArgumentError("top_fraction must lie in (0,1]");
        }
        const MaskFrame dark = dark_channel(frame, patch);
        const std::size_t n = dark.values.size();
        const auto count = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n))), 1, n);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto brighter = [&](std::size_t a, std::size_t b) {
            if (dark.values[a] != dark.values[b])
                return dark.values[a] > dark.values[b];
            return a < b;
        };
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count - 1), order.end(),
                         brighter);
        std::vector<double> A(static_cast<std::size_t>(frame.channels), 0.0);
        for (std::size_t i = 0; i < count; ++i)
        {
            const std::size_t p = order[i];
            for (int c = 0; c < frame.channels; ++c)
                A[c] = std::max(A[c], frame.pixels[p * frame.channels + c]);
        }
        return A;
    }

    Extraction extract_clean_smoke(const Frame &frame, const Frame &recovered_bg, const std::vector<double> &A,
                                   const std::optional<Frame> &fallback, double denom_floor)
    {
        require_same_size(frame, recovered_bg, "frame vs recovered background");
        if (frame.channels != recovered_bg.channels)
        {
            throw ArgumentError("dimension mismatch: frame vs recovered background channels");
        }
        if (fallback && !fallback->same_shape(frame))
        {
            throw ArgumentError("dimension mismatch: fallback frame");
        }
        if (!(denom_floor >= 0.0))
        {
            throw ArgumentError("denominator floor must be non-negative");
        }
        check_light(A, frame.channels);
        Extraction result{Frame(frame.width, frame.height, frame.channels), {}, MaskFrame(frame.width, frame.height)};
        result.report.total_pixels = frame.pixel_count();
        for (int y = 0; y < frame.height; ++y)
            for (int x = 0; x < frame.width; ++x)
            {
                bool floored = false;
                for (int c = 0; c < frame.channels; ++c)
                {
                    const double a = channel_value(A, c);
                    const double denom = recovered_bg.at(x, y, c) - a;
                    double s;
                    if (std::abs(denom) < denom_floor || denom == 0.0)
                    {
                        floored = true;
                        s = fallback ? fallback->at(x, y, c) : 0.0;
                    }
                    else
                    {
                        s = 1.0 - (frame.at(x, y, c) - a) / denom;
                    }
                    result.smoke.at(x, y, c) = std::clamp(s, 0.0, 1.0);
                }
                if (floored)
                {
                    ++result.report.floor_pixels;
                    result.floor_mask.at(x, y) = 1.0;
                }
            }
        return result;
    }

    void WeightSchedule::validate() const
    {
        if (!(w_min >= 0.0 && w_min <= 1.0))
        {
            throw ArgumentError("w_min must lie in [0,1]");
        }
        if (!(k >= 0.0) || !std::isfinite(k))
        {
            throw ArgumentError("decay rate k must be non-negative");
        }
    }

    double decay_weight(const WeightSchedule &schedule, int t)
    {
        schedule.validate();
        if (t < schedule.t0)
        {
            throw ArgumentError("decay_weight needs t >= t0");
        }
        return schedule.w_min + (1.0 - schedule.w_min) * std::exp(-schedule.k * (t - schedule.t0));
    }

    double frequency_distance(const Frame &pred, const Frame &target, PhaseDifference phase)
    {
        require_same_size(pred, target, "prediction vs target");
        if (pred.channels != target.channels)
        {
            throw ArgumentError("dimension mismatch: prediction vs target channels");
        }
        double amp_sum = 0.0;
        double phase_sum = 0.0;
        std::size_t bins = 0;
        for (int c = 0; c < pred.channels; ++c)
        {
            const auto fp = dft2(pred, c);
            const auto ft = dft2(target, c);
            const double tol_p = zero_tolerance(pred, c);
            const double tol_t = zero_tolerance(target, c);
            for (std::size_t i = 0; i < fp.size(); ++i)
            {
                amp_sum += std::abs(std::abs(fp[i]) - std::abs(ft[i]));
                double d = std::abs(phase_of(fp[i], tol_p) - phase_of(ft[i], tol_t));
                if (phase == PhaseDifference::Wrapped && d > std::numbers::pi)
                    d = 2.0 * std::numbers::pi - d;
                phase_sum += d;
            }
            bins += fp.size();
        }
        return (amp_sum + phase_sum) / static_cast<double>(bins);
    }

    double frequency_loss(const Frame &pred, const Frame &target, int iter, const FrequencyLossOptions &options)
    {
        if (options.warmup < 0 || iter < 0)
        {
            throw ArgumentError("iteration and warm-up must be non-negative");
        }
        const double ramp =
            options.warmup == 0 ? 1.0 : std::min(1.0, static_cast<double>(iter) / static_cast<double>(options.warmup));
        if (ramp == 0.0)
        {
            require_same_size(pred, target, "prediction vs target");
            return 0.0;
        }
        return options.lambda * ramp * frequency_distance(pred, target, options.phase);
    }
} // namespace smokeforge::haze
