#pragma once

#include "smokeforge/asset.hpp"
#include "smokeforge/grid.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <vector>

// Untruncated brute-force density splat: every particle against every cell,
// covariance built through Eigen's quaternion class and a dense inverse.
namespace smokeforge::testing
{
    inline double oracle_kernel(const asset::VisualParticle &p, const Eigen::Vector3d &x)
    {
        const Eigen::Quaterniond q(p.rotation[0], p.rotation[1], p.rotation[2], p.rotation[3]);
        const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
        const Eigen::Vector3d s = p.scale.cast<double>();
        const Eigen::Matrix3d cov = r * Eigen::Matrix3d(s.array().square().matrix().asDiagonal()) * r.transpose();
        const Eigen::Vector3d d = x - p.position.cast<double>();
        return std::exp(-0.5 * d.dot(cov.inverse() * d));
    }

    inline std::vector<double> oracle_density(const std::vector<asset::VisualParticle> &particles,
                                              const GridSpec &spec)
    {
        std::vector<double> out(spec.cell_count(), 0.0);
        const Eigen::Vector3d h = spec.bbox.extent().cwiseQuotient(Eigen::Vector3d(spec.res[0], spec.res[1], spec.res[2]));
        std::size_t idx = 0;
        for (int k = 0; k < spec.res[2]; ++k)
            for (int j = 0; j < spec.res[1]; ++j)
                for (int i = 0; i < spec.res[0]; ++i, ++idx)
                {
                    const Eigen::Vector3d x = spec.bbox.min + Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5).cwiseProduct(h);
                    double sum = 0.0;
                    for (const auto &p : particles)
                        sum += static_cast<double>(p.opacity) * oracle_kernel(p, x);
                    out[idx] = sum;
                }
        return out;
    }
} // namespace smokeforge::testing
