#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <vector>

namespace smokeforge
{
    using Vec3 = Eigen::Vector3d;
    using Index3 = std::array<int, 3>;

    // Axis-aligned world-space box.
    struct Box
    {
        Vec3 min = Vec3::Zero();
        Vec3 max = Vec3::Ones();

        Vec3 extent() const { return max - min; }
        Vec3 center() const { return 0.5 * (min + max); }
        bool contains(const Vec3 &p) const
        {
            return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
        }
        bool operator==(const Box &other) const { return min == other.min && max == other.max; }
    };

    // Resolution plus world box. Cell (i,j,k) spans
    // [min + (i,j,k)*h, min + (i+1,j+1,k+1)*h] with h = extent / res.
    struct GridSpec
    {
        Index3 res{1, 1, 1};
        Box bbox;

        // Throws ArgumentError unless res > 0 and max > min component-wise.
        void validate() const;

        Vec3 cell_size() const;
        std::size_t cell_count() const;

        // World position -> continuous index space (cell i covers [i, i+1)).
        Vec3 to_index_space(const Vec3 &world) const;
        Vec3 to_world(const Vec3 &index_space) const;

        Vec3 cell_center(int i, int j, int k) const;
        Vec3 face_center(int axis, int i, int j, int k) const;

        bool operator==(const GridSpec &other) const { return res == other.res && bbox == other.bbox; }
    };

    // Regular lattice of samples in index space: sample (0,0,0) sits at
    // `origin` and neighbours are one unit apart. Cell centers have origin
    // (0.5,0.5,0.5); x-faces have origin (0,0.5,0.5) and so on.
    struct Lattice
    {
        Index3 dims{1, 1, 1};
        Vec3 origin = Vec3::Zero();

        std::size_t size() const
        {
            return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
        }
        std::size_t index(int i, int j, int k) const
        {
            return static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                        static_cast<std::size_t>(dims[1]) * k);
        }
        Vec3 position(int i, int j, int k) const { return origin + Vec3(i, j, k); }
        bool operator==(const Lattice &other) const { return dims == other.dims && origin == other.origin; }
    };

    Lattice cell_lattice(const Index3 &res);
    Lattice face_lattice(const Index3 &res, int axis);

    struct StencilSample
    {
        double value = 0.0;
        double lo = 0.0; // min over the 8 interpolation nodes
        double hi = 0.0; // max over the 8 interpolation nodes
    };

    // Trilinear interpolation at an index-space point; coordinates are
    // clamped to the lattice hull (constant extrapolation).
    double sample_trilinear(const Lattice &lattice, const double *data, const Vec3 &index_pos);
    StencilSample sample_trilinear_stencil(const Lattice &lattice, const double *data, const Vec3 &index_pos);

    // Cell-centered scalar field.
    class ScalarGrid
    {
    public:
        ScalarGrid() = default;
        explicit ScalarGrid(const GridSpec &spec, double fill = 0.0);

        const GridSpec &spec() const { return spec_; }
        const Lattice &lattice() const { return lattice_; }

        double &at(int i, int j, int k) { return values_[lattice_.index(i, j, k)]; }
        double at(int i, int j, int k) const { return values_[lattice_.index(i, j, k)]; }

        std::vector<double> &values() { return values_; }
        const std::vector<double> &values() const { return values_; }

        // Trilinear sample at a world position.
        double sample(const Vec3 &world) const;

        double sum() const;
        double max_value() const;
        bool operator==(const ScalarGrid &other) const = default;

    private:
        GridSpec spec_;
        Lattice lattice_;
        std::vector<double> values_;
    };

    // MAC layout: component a lives on the faces normal to axis a, with
    // (nx+1,ny,nz), (nx,ny+1,nz), (nx,ny,nz+1) samples.
    class StaggeredVectorGrid
    {
    public:
        StaggeredVectorGrid() = default;
        explicit StaggeredVectorGrid(const GridSpec &spec);

        const GridSpec &spec() const { return spec_; }
        const Lattice &lattice(int axis) const { return lattices_[axis]; }

        double &at(int axis, int i, int j, int k) { return comps_[axis][lattices_[axis].index(i, j, k)]; }
        double at(int axis, int i, int j, int k) const { return comps_[axis][lattices_[axis].index(i, j, k)]; }

        std::vector<double> &component(int axis) { return comps_[axis]; }
        const std::vector<double> &component(int axis) const { return comps_[axis]; }

        // Velocity at a world position (per-component trilinear).
        Vec3 sample(const Vec3 &world) const;
        // Velocity at an index-space position, in world units.
        Vec3 sample_index_space(const Vec3 &index_pos) const;

        // (u[i+1]-u[i])/hx + ... for cell (i,j,k).
        double divergence(int i, int j, int k) const;
        double max_abs() const;
        bool operator==(const StaggeredVectorGrid &other) const = default;

    private:
        GridSpec spec_;
        std::array<Lattice, 3> lattices_{};
        std::array<std::vector<double>, 3> comps_{};
    };

    // Lattice point -> world position.
    Vec3 lattice_world(const GridSpec &spec, const Lattice &lattice, int i, int j, int k);
} // namespace smokeforge
