#include "smokeforge/render.hpp"

#include "smokeforge/error.hpp"
#include "smokeforge/haze.hpp"
#include "smokeforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace smokeforge::render
{
    void RenderSettings::validate() const
    {
        if (samples_per_ray < 2)
        {
            throw ArgumentError("samples per ray must be at least 2");
        }
        if (!(absorption > 0.0) || !std::isfinite(absorption))
        {
            throw ArgumentError("absorption must be positive");
        }
        if (!(emission >= 0.0) || !std::isfinite(emission))
        {
            throw ArgumentError("emission must be non-negative");
        }
        if (!(background >= 0.0 && background <= 1.0))
        {
            throw ArgumentError("background must lie in [0,1]");
        }
    }

    namespace
    {
        // Slab test; false when the ray misses the box.
        bool clip_ray(const Box &box, const Vec3 &origin, const Vec3 &dir, double &t0, double &t1)
        {
            t0 = 0.0;
            t1 = std::numeric_limits<double>::infinity();
            for (int a = 0; a < 3; ++a)
            {
                if (dir[a] == 0.0)
                {
                    if (origin[a] < box.min[a] || origin[a] > box.max[a])
                        return false;
                    continue;
                }
                double lo = (box.min[a] - origin[a]) / dir[a];
                double hi = (box.max[a] - origin[a]) / dir[a];
                if (lo > hi)
                    std::swap(lo, hi);
                t0 = std::max(t0, lo);
                t1 = std::min(t1, hi);
            }
            return t1 > t0;
        }

        // (1 - e^-x) / x, stable near 0.
        double one_minus_exp_over(double x) { return x > 1e-12 ? -std::expm1(-x) / x : 1.0 - 0.5 * x; }
    } // namespace

    RenderResult render_density(const ScalarGrid &grid, const camera::CameraPose &pose,
                                const camera::Intrinsics &intrinsics, const RenderSettings &settings)
    {
        settings.validate();
        intrinsics.validate();
        pose.validate(1e-6);
        if (pose.convention != camera::Convention::Splat)
        {
            throw ArgumentError("render_density expects a splat-convention pose");
        }
        if (grid.values().empty())
        {
            throw ArgumentError("cannot render an empty grid");
        }
        const int w = intrinsics.width;
        const int h = intrinsics.height;
        RenderResult out{Frame(w, h, 1), Frame(w, h, 1)};
        const Box &box = grid.spec().bbox;
        const double kappa = settings.absorption;
        const double emission = settings.emission;
        const int n = settings.samples_per_ray;

        parallel::for_each_chunk(static_cast<std::size_t>(h), [&](std::size_t row) {
            const int y = static_cast<int>(row);
            for (int x = 0; x < w; ++x)
            {
                const Vec3 d_cam((x + 0.5 - intrinsics.cx) / intrinsics.focal,
                                 -(y + 0.5 - intrinsics.cy) / intrinsics.focal, -1.0);
                const Vec3 dir = (pose.rotation * d_cam).normalized();
                double transmittance = 1.0;
                double radiance = 0.0;
                double t0 = 0.0;
                double t1 = 0.0;
                if (clip_ray(box, pose.translation, dir, t0, t1))
                {
                    const double dt = (t1 - t0) / n;
                    for (int i = 0; i < n; ++i)
                    {
                        const Vec3 p = pose.translation + (t0 + (i + 0.5) * dt) * dir;
                        const double rho = std::max(0.0, grid.sample(p));
                        if (rho == 0.0)
                            continue;
                        // Exact segment integral for constant density.
                        const double tau = kappa * rho * dt;
                        radiance += transmittance * emission * rho * dt * one_minus_exp_over(tau);
                        transmittance *= std::exp(-tau);
                    }
                }
                out.color.at(x, y) = std::clamp(radiance + transmittance * settings.background, 0.0, 1.0);
                out.alpha.at(x, y) = 1.0 - transmittance;
            }
        });
        return out;
    }

    View front_view(const GridSpec &spec, int width, int height, double fov_x_deg)
    {
        View v;
        v.intrinsics = camera::Intrinsics::from_fov(width, height, fov_x_deg);
        const Vec3 c = spec.bbox.center();
        const Vec3 e = spec.bbox.extent();
        const double half_w = 0.5 * e.x() / (0.5 * width / v.intrinsics.focal);
        const double half_h = 0.5 * e.y() / (0.5 * height / v.intrinsics.focal);
        const double dist = 1.05 * std::max(half_w, half_h) + 0.5 * e.z();
        v.pose.rotation = camera::Mat3::Identity();
        v.pose.translation = c + Vec3(0, 0, dist);
        v.pose.convention = camera::Convention::Splat;
        return v;
    }

    Frame density_slice(const ScalarGrid &grid, int k, double scale)
    {
        const auto [nx, ny, nz] = grid.spec().res;
        if (k < 0 || k >= nz)
        {
            throw ArgumentError("slice index outside the grid");
        }
        Frame f(nx, ny, 1);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                f.at(i, ny - 1 - j) = std::clamp(scale * grid.at(i, j, k), 0.0, 1.0);
        return f;
    }

    Frame composite_onto_background(const Frame &render, const Frame &alpha, const Frame &background)
    {
        return haze::composite_premultiplied(background, alpha, render);
    }
} // namespace smokeforge::render
