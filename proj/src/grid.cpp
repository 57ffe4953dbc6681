#include "smokeforge/grid.hpp"

#include "smokeforge/error.hpp"

#include <algorithm>
#include <cmath>

namespace smokeforge
{
    void GridSpec::validate() const
    {
        for (int a = 0; a < 3; ++a)
        {
            if (res[a] <= 0)
            {
                throw ArgumentError("grid resolution must be positive");
            }
            if (!(bbox.max[a] > bbox.min[a]) || !std::isfinite(bbox.min[a]) || !std::isfinite(bbox.max[a]))
            {
                throw ArgumentError("grid bbox must satisfy max > min on every axis");
            }
        }
    }

    Vec3 GridSpec::cell_size() const
    {
        return bbox.extent().cwiseQuotient(Vec3(res[0], res[1], res[2]));
    }

    std::size_t GridSpec::cell_count() const
    {
        return static_cast<std::size_t>(res[0]) * res[1] * res[2];
    }

    Vec3 GridSpec::to_index_space(const Vec3 &world) const
    {
        return (world - bbox.min).cwiseQuotient(cell_size());
    }

    Vec3 GridSpec::to_world(const Vec3 &index_space) const
    {
        return bbox.min + index_space.cwiseProduct(cell_size());
    }

    Vec3 GridSpec::cell_center(int i, int j, int k) const
    {
        return to_world(Vec3(i + 0.5, j + 0.5, k + 0.5));
    }

    Vec3 GridSpec::face_center(int axis, int i, int j, int k) const
    {
        Vec3 p(i + 0.5, j + 0.5, k + 0.5);
        p[axis] -= 0.5;
        return to_world(p);
    }

    Lattice cell_lattice(const Index3 &res)
    {
        return Lattice{res, Vec3(0.5, 0.5, 0.5)};
    }

    Lattice face_lattice(const Index3 &res, int axis)
    {
        Lattice l{res, Vec3(0.5, 0.5, 0.5)};
        l.dims[axis] += 1;
        l.origin[axis] = 0.0;
        return l;
    }

    Vec3 lattice_world(const GridSpec &spec, const Lattice &lattice, int i, int j, int k)
    {
        return spec.to_world(lattice.position(i, j, k));
    }

    namespace
    {
        struct Corner
        {
            std::array<int, 3> base{};
            std::array<double, 3> frac{};
        };

        Corner locate(const Lattice &lattice, const Vec3 &index_pos)
        {
            Corner c;
            for (int a = 0; a < 3; ++a)
            {
                const int n = lattice.dims[a];
                double p = index_pos[a] - lattice.origin[a];
                p = std::clamp(p, 0.0, static_cast<double>(n - 1));
                int i0 = static_cast<int>(std::floor(p));
                if (i0 >= n - 1)
                {
                    i0 = std::max(n - 2, 0);
                }
                c.base[a] = i0;
                c.frac[a] = n == 1 ? 0.0 : p - i0;
            }
            return c;
        }

        template <bool WithStencil>
        StencilSample interpolate(const Lattice &lattice, const double *data, const Vec3 &index_pos)
        {
            const Corner c = locate(lattice, index_pos);
            const int i1 = std::min(c.base[0] + 1, lattice.dims[0] - 1);
            const int j1 = std::min(c.base[1] + 1, lattice.dims[1] - 1);
            const int k1 = std::min(c.base[2] + 1, lattice.dims[2] - 1);
            const int i0 = c.base[0];
            const int j0 = c.base[1];
            const int k0 = c.base[2];
            const double fx = c.frac[0];
            const double fy = c.frac[1];
            const double fz = c.frac[2];

            const double v000 = data[lattice.index(i0, j0, k0)];
            const double v100 = data[lattice.index(i1, j0, k0)];
            const double v010 = data[lattice.index(i0, j1, k0)];
            const double v110 = data[lattice.index(i1, j1, k0)];
            const double v001 = data[lattice.index(i0, j0, k1)];
            const double v101 = data[lattice.index(i1, j0, k1)];
            const double v011 = data[lattice.index(i0, j1, k1)];
            const double v111 = data[lattice.index(i1, j1, k1)];

            const double x00 = v000 + fx * (v100 - v000);
            const double x10 = v010 + fx * (v110 - v010);
            const double x01 = v001 + fx * (v101 - v001);
            const double x11 = v011 + fx * (v111 - v011);
            const double y0 = x00 + fy * (x10 - x00);
            const double y1 = x01 + fy * (x11 - x01);

            StencilSample s;
            s.value = y0 + fz * (y1 - y0);
            if constexpr (WithStencil)
            {
                s.lo = std::min({v000, v100, v010, v110, v001, v101, v011, v111});
                s.hi = std::max({v000, v100, v010, v110, v001, v101, v011, v111});
            }
            return s;
        }
    } // namespace

    double sample_trilinear(const Lattice &lattice, const double *data, const Vec3 &index_pos)
    {
        return interpolate<false>(lattice, data, index_pos).value;
    }

    StencilSample sample_trilinear_stencil(const Lattice &lattice, const double *data, const Vec3 &index_pos)
    {
        return interpolate<true>(lattice, data, index_pos);
    }

    ScalarGrid::ScalarGrid(const GridSpec &spec, double fill)
        : spec_(spec), lattice_(cell_lattice(spec.res)), values_(spec.cell_count(), fill)
    {
        spec_.validate();
    }

    double ScalarGrid::sample(const Vec3 &world) const
    {
        return sample_trilinear(lattice_, values_.data(), spec_.to_index_space(world));
    }

    double ScalarGrid::sum() const
    {
        double total = 0.0;
        for (double v : values_)
        {
            total += v;
        }
        return total;
    }

    double ScalarGrid::max_value() const
    {
        return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
    }

    StaggeredVectorGrid::StaggeredVectorGrid(const GridSpec &spec) : spec_(spec)
    {
        spec_.validate();
        for (int a = 0; a < 3; ++a)
        {
            lattices_[a] = face_lattice(spec.res, a);
            comps_[a].assign(lattices_[a].size(), 0.0);
        }
    }

    Vec3 StaggeredVectorGrid::sample_index_space(const Vec3 &index_pos) const
    {
        return Vec3(sample_trilinear(lattices_[0], comps_[0].data(), index_pos),
                    sample_trilinear(lattices_[1], comps_[1].data(), index_pos),
                    sample_trilinear(lattices_[2], comps_[2].data(), index_pos));
    }

    Vec3 StaggeredVectorGrid::sample(const Vec3 &world) const
    {
        return sample_index_space(spec_.to_index_space(world));
    }

    double StaggeredVectorGrid::divergence(int i, int j, int k) const
    {
        const Vec3 h = spec_.cell_size();
        return (at(0, i + 1, j, k) - at(0, i, j, k)) / h[0] + (at(1, i, j + 1, k) - at(1, i, j, k)) / h[1] +
               (at(2, i, j, k + 1) - at(2, i, j, k)) / h[2];
    }

    double StaggeredVectorGrid::max_abs() const
    {
        double m = 0.0;
        for (const auto &c : comps_)
        {
            for (double v : c)
            {
                m = std::max(m, std::abs(v));
            }
        }
        return m;
    }
} // namespace smokeforge
