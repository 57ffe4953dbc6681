#pragma once

#include "smokeforge/asset.hpp"
#include "smokeforge/grid.hpp"

#include <Eigen/Core>

#include <span>

// Particle -> grid transfer: anisotropic Gaussian kernels, the
// opacity-weighted density sum and the kernel-normalised velocity average.
namespace smokeforge::splat
{
    using Mat3 = Eigen::Matrix3d;

    // Denominator regulariser of the normalised velocity average.
    inline constexpr double kVelocityEpsilon = 1e-8;
    // Covariances with a larger eigenvalue ratio are rejected as singular.
    inline constexpr double kMaxConditionNumber = 1e12;

    // Rotation matrix of a quaternion (w, x, y, z). The input is
    // renormalised; a zero quaternion throws ArgumentError.
    Mat3 quat_to_rotmat(const Eigen::Vector4d &q);

    struct GaussianKernelParams
    {
        Vec3 center = Vec3::Zero();
        Mat3 covariance = Mat3::Identity();

        // Sigma = R(r) diag(s^2) R(r)^T.
        static GaussianKernelParams from_visual(const asset::VisualParticle &p);
        // Axis-aligned kernel with per-axis standard deviation `scale`.
        static GaussianKernelParams axis_aligned(const Vec3 &center, const Vec3 &scale);
    };

    // A kernel with its precision matrix and support box precomputed.
    struct PreparedKernel
    {
        Vec3 center = Vec3::Zero();
        Mat3 precision = Mat3::Identity();
        Vec3 half_extent = Vec3::Zero(); // world-space half size of the truncated support
        double radius_sq = 0.0;          // truncation radius^2 in Mahalanobis units

        // Throws ArgumentError for asymmetric, non-positive-definite or
        // ill-conditioned covariances.
        PreparedKernel(const GaussianKernelParams &params, double truncation_sigmas);

        double mahalanobis_sq(const Vec3 &x) const;
        // exp(-m/2), or 0 beyond the truncation radius.
        double eval(const Vec3 &x) const;
    };

    // exp(-1/2 (x-p)^T Sigma^-1 (x-p)), untruncated.
    double kernel_eval(const GaussianKernelParams &params, const Vec3 &x);

    struct SplatOptions
    {
        // Kernels are cut off beyond this Mahalanobis radius. At 6 the
        // dropped tail is below exp(-18) ~ 1.5e-8 per particle.
        double truncation_sigmas = 6.0;
    };

    // rho(x) = sum_i o_i phi_i(x) at every cell center.
    ScalarGrid splat_density(std::span<const asset::VisualParticle> particles, const GridSpec &grid,
                             const SplatOptions &options = {});

    // V(x) = sum_i phi'_i(x) u_i / (sum_i phi'_i(x) + eps) on every MAC face,
    // where phi' is axis-aligned with standard deviation `kernel_scale`.
    StaggeredVectorGrid splat_velocity(std::span<const asset::PhysicalParticle> particles, const Vec3 &kernel_scale,
                                       const GridSpec &grid, const SplatOptions &options = {});

    // The same normalised average evaluated at a single point, untruncated.
    Vec3 velocity_at(std::span<const asset::PhysicalParticle> particles, const Vec3 &kernel_scale, const Vec3 &x);

    // Sum of untruncated phi' weights at x.
    double velocity_kernel_mass(std::span<const asset::PhysicalParticle> particles, const Vec3 &kernel_scale,
                                const Vec3 &x);

    // Box holding every center +/- padding_sigmas * max(scale).
    // Throws ArgumentError on an empty list.
    Box restrict_bbox(std::span<const asset::VisualParticle> particles, double padding_sigmas);

    // Velocity kernel width default: 1.5 cells per axis.
    Vec3 default_kernel_scale(const GridSpec &grid);
} // namespace smokeforge::splat
