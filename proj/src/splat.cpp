#include "smokeforge/splat.hpp"

#include "smokeforge/error.hpp"
#include "smokeforge/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace smokeforge::splat
{
    Mat3 quat_to_rotmat(const Eigen::Vector4d &q)
    {
        const double n = q.norm();
        if (!(n > 0.0) || !std::isfinite(n))
        {
            throw ArgumentError("cannot build a rotation from a zero or non-finite quaternion");
        }
        const double w = q[0] / n;
        const double x = q[1] / n;
        const double y = q[2] / n;
        const double z = q[3] / n;
        Mat3 r;
        r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), //
            2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x), //
            2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
        return r;
    }

    GaussianKernelParams GaussianKernelParams::from_visual(const asset::VisualParticle &p)
    {
        const Mat3 r = quat_to_rotmat(p.rotation.cast<double>());
        const Vec3 s = p.scale.cast<double>();
        GaussianKernelParams k;
        k.center = p.position.cast<double>();
        k.covariance = r * s.cwiseProduct(s).asDiagonal() * r.transpose();
        return k;
    }

    GaussianKernelParams GaussianKernelParams::axis_aligned(const Vec3 &center, const Vec3 &scale)
    {
        GaussianKernelParams k;
        k.center = center;
        k.covariance = scale.cwiseProduct(scale).asDiagonal();
        return k;
    }

    PreparedKernel::PreparedKernel(const GaussianKernelParams &params, double truncation_sigmas)
        : center(params.center), radius_sq(truncation_sigmas * truncation_sigmas)
    {
        const Mat3 &cov = params.covariance;
        if (!cov.allFinite() || !center.allFinite())
        {
            throw ArgumentError("kernel has non-finite center or covariance");
        }
        const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        {
            throw ArgumentError("kernel covariance is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (cov + cov.transpose()));
        const Vec3 lambda = eig.eigenvalues();
        if (!(lambda.minCoeff() > 0.0))
        {
            throw ArgumentError("kernel covariance is not positive definite");
        }
        if (lambda.maxCoeff() / lambda.minCoeff() > kMaxConditionNumber)
        {
            throw ArgumentError("kernel covariance is singular (condition number above 1e12)");
        }
        const Mat3 &v = eig.eigenvectors();
        precision = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
        precision = 0.5 * (precision + precision.transpose()).eval();
        half_extent = truncation_sigmas * cov.diagonal().cwiseSqrt();
    }

    double PreparedKernel::mahalanobis_sq(const Vec3 &x) const
    {
        const Vec3 d = x - center;
        return d.dot(precision * d);
    }

    double PreparedKernel::eval(const Vec3 &x) const
    {
        const double m = mahalanobis_sq(x);
        return m > radius_sq ? 0.0 : std::exp(-0.5 * m);
    }

    double kernel_eval(const GaussianKernelParams &params, const Vec3 &x)
    {
        const PreparedKernel k(params, std::numeric_limits<double>::infinity());
        return std::exp(-0.5 * k.mahalanobis_sq(x));
    }

    namespace
    {
        struct IndexRange
        {
            int lo[3];
            int hi[3]; // inclusive
            bool empty() const { return lo[0] > hi[0] || lo[1] > hi[1] || lo[2] > hi[2]; }
        };

        IndexRange support_range(const GridSpec &spec, const Lattice &lattice, const PreparedKernel &k)
        {
            const Vec3 lo = spec.to_index_space(k.center - k.half_extent);
            const Vec3 hi = spec.to_index_space(k.center + k.half_extent);
            IndexRange r{};
            for (int a = 0; a < 3; ++a)
            {
                const double l = std::ceil(lo[a] - lattice.origin[a]);
                const double h = std::floor(hi[a] - lattice.origin[a]);
                r.lo[a] = static_cast<int>(std::clamp(l, 0.0, static_cast<double>(lattice.dims[a])));
                r.hi[a] = static_cast<int>(std::clamp(h, -1.0, static_cast<double>(lattice.dims[a] - 1)));
            }
            return r;
        }

        // Calls hit(kernel_index, linear_index, phi) for every lattice point in
        // each kernel's truncated support. Slabs along z run in parallel and
        // within a slab kernels are visited in ascending index order, so the
        // accumulation order per point never depends on the thread count.
        template <typename Hit>
        void for_each_support_point(const GridSpec &spec, const Lattice &lattice,
                                    const std::vector<PreparedKernel> &kernels, Hit &&hit)
        {
            std::vector<IndexRange> ranges;
            ranges.reserve(kernels.size());
            for (const auto &k : kernels)
            {
                ranges.push_back(support_range(spec, lattice, k));
            }
            const Vec3 h = spec.cell_size();
            parallel::for_each_chunk(static_cast<std::size_t>(lattice.dims[2]), [&](std::size_t slab) {
                const int kz = static_cast<int>(slab);
                for (std::size_t n = 0; n < kernels.size(); ++n)
                {
                    const IndexRange &r = ranges[n];
                    if (r.empty() || kz < r.lo[2] || kz > r.hi[2])
                    {
                        continue;
                    }
                    const PreparedKernel &kernel = kernels[n];
                    for (int j = r.lo[1]; j <= r.hi[1]; ++j)
                    {
                        for (int i = r.lo[0]; i <= r.hi[0]; ++i)
                        {
                            const Vec3 x = spec.bbox.min + lattice.position(i, j, kz).cwiseProduct(h);
                            const double phi = kernel.eval(x);
                            if (phi > 0.0)
                            {
                                hit(n, lattice.index(i, j, kz), phi);
                            }
                        }
                    }
                }
            });
        }
    } // namespace

    ScalarGrid splat_density(std::span<const asset::VisualParticle> particles, const GridSpec &grid,
                             const SplatOptions &options)
    {
        ScalarGrid out(grid);
        std::vector<PreparedKernel> kernels;
        std::vector<double> weights;
        kernels.reserve(particles.size());
        for (const auto &p : particles)
        {
            kernels.emplace_back(GaussianKernelParams::from_visual(p), options.truncation_sigmas);
            weights.push_back(static_cast<double>(p.opacity));
        }
        auto &values = out.values();
        for_each_support_point(grid, out.lattice(), kernels, [&](std::size_t n, std::size_t idx, double phi) {
            values[idx] += weights[n] * phi;
        });
        return out;
    }

    StaggeredVectorGrid splat_velocity(std::span<const asset::PhysicalParticle> particles, const Vec3 &kernel_scale,
                                       const GridSpec &grid, const SplatOptions &options)
    {
        if (!((kernel_scale.array() > 0.0).all()))
        {
            throw ArgumentError("velocity kernel scale must be positive");
        }
        StaggeredVectorGrid out(grid);
        std::vector<PreparedKernel> kernels;
        kernels.reserve(particles.size());
        for (const auto &p : particles)
        {
            kernels.emplace_back(GaussianKernelParams::axis_aligned(p.position.cast<double>(), kernel_scale),
                                 options.truncation_sigmas);
        }
        for (int axis = 0; axis < 3; ++axis)
        {
            const Lattice &lattice = out.lattice(axis);
            std::vector<double> numerator(lattice.size(), 0.0);
            std::vector<double> mass(lattice.size(), 0.0);
            for_each_support_point(grid, lattice, kernels, [&](std::size_t n, std::size_t idx, double phi) {
                numerator[idx] += phi * static_cast<double>(particles[n].velocity[axis]);
                mass[idx] += phi;
            });
            auto &comp = out.component(axis);
            for (std::size_t idx = 0; idx < comp.size(); ++idx)
            {
                comp[idx] = numerator[idx] / (mass[idx] + kVelocityEpsilon);
            }
        }
        return out;
    }

    Vec3 velocity_at(std::span<const asset::PhysicalParticle> particles, const Vec3 &kernel_scale, const Vec3 &x)
    {
        Vec3 numerator = Vec3::Zero();
        double mass = 0.0;
        for (const auto &p : particles)
        {
            const double phi = kernel_eval(GaussianKernelParams::axis_aligned(p.position.cast<double>(), kernel_scale), x);
            numerator += phi * p.velocity.cast<double>();
            mass += phi;
        }
        return numerator / (mass + kVelocityEpsilon);
    }

    double velocity_kernel_mass(std::span<const asset::PhysicalParticle> particles, const Vec3 &kernel_scale,
                                const Vec3 &x)
    {
        double mass = 0.0;
        for (const auto &p : particles)
        {
            mass += kernel_eval(GaussianKernelParams::axis_aligned(p.position.cast<double>(), kernel_scale), x);
        }
        return mass;
    }

    Box restrict_bbox(std::span<const asset::VisualParticle> particles, double padding_sigmas)
    {
        if (particles.empty())
        {
            throw ArgumentError("cannot bound an empty particle list");
        }
        Box box;
        box.min = Vec3::Constant(std::numeric_limits<double>::infinity());
        box.max = Vec3::Constant(-std::numeric_limits<double>::infinity());
        for (const auto &p : particles)
        {
            const Vec3 c = p.position.cast<double>();
            const double pad = padding_sigmas * static_cast<double>(p.scale.maxCoeff());
            box.min = box.min.cwiseMin(c - Vec3::Constant(pad));
            box.max = box.max.cwiseMax(c + Vec3::Constant(pad));
        }
        return box;
    }

    Vec3 default_kernel_scale(const GridSpec &grid)
    {
        return 1.5 * grid.cell_size();
    }
} // namespace smokeforge::splat
