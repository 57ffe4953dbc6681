#include "smokeforge/metrics.hpp"

#include "smokeforge/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace smokeforge::metrics
{
    namespace
    {
        void require_same_shape(const Frame &a, const Frame &b)
        {
            a.validate();
            b.validate();
            if (!a.same_shape(b))
            {
                throw ArgumentError("dimension mismatch between frames");
            }
        }
    } // namespace

    double psnr(const Frame &a, const Frame &b)
    {
        require_same_shape(a, b);
        double acc = 0.0;
        for (std::size_t i = 0; i < a.pixels.size(); ++i)
        {
            const double d = a.pixels[i] - b.pixels[i];
            acc += d * d;
        }
        const double mse = acc / static_cast<double>(a.pixels.size());
        if (mse == 0.0)
        {
            return std::numeric_limits<double>::infinity();
        }
        return -10.0 * std::log10(mse);
    }

    PsnrSummary psnr_sequence(std::span<const Frame> a, std::span<const Frame> b)
    {
        if (a.size() != b.size())
        {
            throw ArgumentError("frame sequences differ in length");
        }
        PsnrSummary s;
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            const double v = psnr(a[i], b[i]);
            if (std::isinf(v))
            {
                ++s.infinite_frames;
                continue;
            }
            sum += v;
            ++s.finite_frames;
        }
        s.mean = s.finite_frames ? sum / static_cast<double>(s.finite_frames) : 0.0;
        return s;
    }

    double ssim(const Frame &a, const Frame &b)
    {
        require_same_shape(a, b);
        constexpr int win = kSsimWindow;
        constexpr int r = win / 2;
        if (a.width < win || a.height < win)
        {
            throw ArgumentError("SSIM needs frames of at least 11x11 pixels");
        }
        std::vector<double> g(win);
        double gsum = 0.0;
        for (int i = 0; i < win; ++i)
        {
            g[i] = std::exp(-0.5 * (i - r) * (i - r) / (kSsimSigma * kSsimSigma));
            gsum += g[i];
        }
        for (double &v : g)
            v /= gsum;

        constexpr double c1 = 0.01 * 0.01;
        constexpr double c2 = 0.03 * 0.03;
        double total = 0.0;
        std::size_t windows = 0;
        for (int c = 0; c < a.channels; ++c)
            for (int y0 = 0; y0 + win <= a.height; ++y0)
                for (int x0 = 0; x0 + win <= a.width; ++x0)
                {
                    double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                    for (int dy = 0; dy < win; ++dy)
                        for (int dx = 0; dx < win; ++dx)
                        {
                            const double wgt = g[dx] * g[dy];
                            const double va = a.at(x0 + dx, y0 + dy, c);
                            const double vb = b.at(x0 + dx, y0 + dy, c);
                            ma += wgt * va;
                            mb += wgt * vb;
                            saa += wgt * va * va;
                            sbb += wgt * vb * vb;
                            sab += wgt * va * vb;
                        }
                    const double var_a = saa - ma * ma;
                    const double var_b = sbb - mb * mb;
                    const double cov = sab - ma * mb;
                    total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                             ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                    ++windows;
                }
        return total / static_cast<double>(windows);
    }
} // namespace smokeforge::metrics
