#pragma once

#include "smokeforge/grid.hpp"

#include <algorithm>
#include <cmath>

// First-order semi-Lagrangian advection of a cell-centered scalar under a
// spatially uniform velocity, written without the library's sampling code.
namespace smokeforge::testing
{
    inline ScalarGrid semi_lagrangian_uniform(const ScalarGrid &field, const Vec3 &velocity, double dt)
    {
        const GridSpec &spec = field.spec();
        const Vec3 h = spec.cell_size();
        const auto [nx, ny, nz] = spec.res;
        ScalarGrid out(spec);
        const auto value = [&](int i, int j, int k) {
            i = std::clamp(i, 0, nx - 1);
            j = std::clamp(j, 0, ny - 1);
            k = std::clamp(k, 0, nz - 1);
            return field.at(i, j, k);
        };
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i)
                {
                    // Departure point in cell-center coordinates.
                    double x = i - dt * velocity.x() / h.x();
                    double y = j - dt * velocity.y() / h.y();
                    double z = k - dt * velocity.z() / h.z();
                    x = std::clamp(x, 0.0, nx - 1.0);
                    y = std::clamp(y, 0.0, ny - 1.0);
                    z = std::clamp(z, 0.0, nz - 1.0);
                    const int i0 = static_cast<int>(std::floor(x));
                    const int j0 = static_cast<int>(std::floor(y));
                    const int k0 = static_cast<int>(std::floor(z));
                    const double fx = x - i0;
                    const double fy = y - j0;
                    const double fz = z - k0;
                    double acc = 0.0;
                    for (int dk = 0; dk < 2; ++dk)
                        for (int dj = 0; dj < 2; ++dj)
                            for (int di = 0; di < 2; ++di)
                            {
                                const double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
                                acc += w * value(i0 + di, j0 + dj, k0 + dk);
                            }
                    out.at(i, j, k) = acc;
                }
        return out;
    }
} // namespace smokeforge::testing
