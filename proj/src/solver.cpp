#include "smokeforge/solver.hpp"

#include "smokeforge/error.hpp"
#include "smokeforge/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace smokeforge::solver
{
    void WindForce::validate() const
    {
        if (!force.allFinite())
        {
            throw ArgumentError("wind force must be finite");
        }
        if (const auto *s = std::get_if<SphereRegion>(&region))
        {
            if (!(s->radius > 0.0) || !s->center.allFinite())
            {
                throw ArgumentError("wind sphere radius must be positive");
            }
        }
    }

    void SphereObstacle::validate() const
    {
        if (!(radius > 0.0) || !center.allFinite())
        {
            throw ArgumentError("obstacle radius must be positive");
        }
    }

    void SimConfig::validate() const
    {
        if (!(dt > 0.0) || !std::isfinite(dt))
        {
            throw ArgumentError("dt must be positive");
        }
        if (!(projection_tol > 0.0))
        {
            throw ArgumentError("projection_tol must be positive");
        }
        if (projection_max_iters <= 0)
        {
            throw ArgumentError("projection_max_iters must be positive");
        }
        if (!std::isfinite(buoyancy_coeff))
        {
            throw ArgumentError("buoyancy coefficient must be finite");
        }
        if (kernel_scale && !(kernel_scale->array() > 0.0).all())
        {
            throw ArgumentError("kernel_scale must be positive");
        }
        for (int a = 0; a < 3; ++a)
        {
            if (resolution[a] <= 0)
            {
                throw ArgumentError("resolution must be positive");
            }
        }
        if (!(padding_sigmas >= 0.0))
        {
            throw ArgumentError("padding_sigmas must be non-negative");
        }
        for (const auto &w : wind)
        {
            w.validate();
        }
        for (const auto &o : obstacles)
        {
            o.validate();
        }
    }

    bool SolidMask::any() const
    {
        return std::any_of(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; }) ||
               std::any_of(faces.begin(), faces.end(), [](const auto &f) {
                   return std::any_of(f.begin(), f.end(), [](std::uint8_t c) { return c != 0; });
               });
    }

    bool SolidMask::cell(int i, int j, int k) const
    {
        return cells[static_cast<std::size_t>(i) + static_cast<std::size_t>(res[0]) * (j + static_cast<std::size_t>(res[1]) * k)] != 0;
    }

    SolidMask build_solids(const GridSpec &spec, std::span<const SphereObstacle> obstacles)
    {
        SolidMask mask;
        mask.res = spec.res;
        const Lattice cells = cell_lattice(spec.res);
        mask.cells.assign(cells.size(), 0);
        for (int a = 0; a < 3; ++a)
        {
            mask.faces[a].assign(face_lattice(spec.res, a).size(), 0);
        }
        if (obstacles.empty())
        {
            return mask;
        }
        const auto inside = [&](const Vec3 &p) {
            return std::any_of(obstacles.begin(), obstacles.end(), [&](const SphereObstacle &o) { return o.contains(p); });
        };
        const auto [nx, ny, nz] = spec.res;
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i)
                {
                    if (inside(spec.cell_center(i, j, k)))
                    {
                        mask.cells[cells.index(i, j, k)] = 1;
                    }
                }
        for (int a = 0; a < 3; ++a)
        {
            const Lattice fl = face_lattice(spec.res, a);
            for (int k = 0; k < fl.dims[2]; ++k)
                for (int j = 0; j < fl.dims[1]; ++j)
                    for (int i = 0; i < fl.dims[0]; ++i)
                    {
                        Index3 lo{i, j, k};
                        Index3 hi{i, j, k};
                        lo[a] -= 1;
                        bool solid = inside(spec.face_center(a, i, j, k));
                        if (!solid && lo[a] >= 0)
                        {
                            solid = mask.cells[cells.index(lo[0], lo[1], lo[2])] != 0;
                        }
                        if (!solid && hi[a] < spec.res[a])
                        {
                            solid = mask.cells[cells.index(hi[0], hi[1], hi[2])] != 0;
                        }
                        mask.faces[a][fl.index(i, j, k)] = solid ? 1 : 0;
                    }
        }
        return mask;
    }

    namespace
    {
        std::size_t slab_count(const Lattice &lattice)
        {
            return static_cast<std::size_t>(lattice.dims[2]);
        }

        void maccormack_lattice(const GridSpec &spec, const Lattice &lattice, const double *src, double *dst,
                                const StaggeredVectorGrid &velocity, double dt)
        {
            const Vec3 inv_h = spec.cell_size().cwiseInverse();
            const std::size_t n = lattice.size();
            std::vector<double> forward(n);
            std::vector<double> lo(n);
            std::vector<double> hi(n);

            parallel::for_each_chunk(slab_count(lattice), [&](std::size_t slab) {
                const int k = static_cast<int>(slab);
                for (int j = 0; j < lattice.dims[1]; ++j)
                    for (int i = 0; i < lattice.dims[0]; ++i)
                    {
                        const Vec3 q = lattice.position(i, j, k);
                        const Vec3 v = velocity.sample_index_space(q).cwiseProduct(inv_h);
                        const StencilSample s = sample_trilinear_stencil(lattice, src, q - dt * v);
                        const std::size_t idx = lattice.index(i, j, k);
                        forward[idx] = s.value;
                        lo[idx] = s.lo;
                        hi[idx] = s.hi;
                    }
            });

            parallel::for_each_chunk(slab_count(lattice), [&](std::size_t slab) {
                const int k = static_cast<int>(slab);
                for (int j = 0; j < lattice.dims[1]; ++j)
                    for (int i = 0; i < lattice.dims[0]; ++i)
                    {
                        const Vec3 q = lattice.position(i, j, k);
                        const Vec3 v = velocity.sample_index_space(q).cwiseProduct(inv_h);
                        const double back = sample_trilinear(lattice, forward.data(), q + dt * v);
                        const std::size_t idx = lattice.index(i, j, k);
                        const double corrected = forward[idx] + 0.5 * (src[idx] - back);
                        dst[idx] = std::clamp(corrected, lo[idx], hi[idx]);
                    }
            });
        }

        void warn_on_cfl(const StaggeredVectorGrid &velocity, double dt, double limit)
        {
            const double cfl = cfl_number(velocity, dt);
            if (cfl > limit)
            {
                spdlog::warn("advection CFL number {:.3f} exceeds {:.3f}; MacCormack accuracy degrades", cfl, limit);
            }
        }

        void check_shared_box(const GridSpec &a, const GridSpec &b)
        {
            if (!(a == b))
            {
                throw ArgumentError("field and velocity must share grid resolution and bbox");
            }
        }
    } // namespace

    double cfl_number(const StaggeredVectorGrid &velocity, double dt)
    {
        return dt * velocity.max_abs() / velocity.spec().cell_size().minCoeff();
    }

    ScalarGrid advect_maccormack(const ScalarGrid &field, const StaggeredVectorGrid &velocity, double dt)
    {
        check_shared_box(field.spec(), velocity.spec());
        warn_on_cfl(velocity, dt, 1.0);
        ScalarGrid out(field.spec());
        maccormack_lattice(field.spec(), field.lattice(), field.values().data(), out.values().data(), velocity, dt);
        return out;
    }

    StaggeredVectorGrid advect_maccormack(const StaggeredVectorGrid &field, const StaggeredVectorGrid &velocity,
                                          double dt)
    {
        check_shared_box(field.spec(), velocity.spec());
        warn_on_cfl(velocity, dt, 1.0);
        StaggeredVectorGrid out(field.spec());
        for (int a = 0; a < 3; ++a)
        {
            maccormack_lattice(field.spec(), field.lattice(a), field.component(a).data(), out.component(a).data(),
                               velocity, dt);
        }
        return out;
    }

    StaggeredVectorGrid add_buoyancy(const StaggeredVectorGrid &velocity, const ScalarGrid &density,
                                     double buoyancy_coeff, double dt)
    {
        check_shared_box(velocity.spec(), density.spec());
        StaggeredVectorGrid out = velocity;
        if (buoyancy_coeff == 0.0)
        {
            return out;
        }
        const auto [nx, ny, nz] = velocity.spec().res;
        const double gain = dt * buoyancy_coeff;
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j <= ny; ++j)
                for (int i = 0; i < nx; ++i)
                {
                    double rho = 0.0;
                    if (j == 0)
                        rho = density.at(i, 0, k);
                    else if (j == ny)
                        rho = density.at(i, ny - 1, k);
                    else
                        rho = 0.5 * (density.at(i, j - 1, k) + density.at(i, j, k));
                    out.at(1, i, j, k) += gain * rho;
                }
        return out;
    }

    StaggeredVectorGrid add_wind(const StaggeredVectorGrid &velocity, const WindForce &wind, double dt)
    {
        wind.validate();
        StaggeredVectorGrid out = velocity;
        const GridSpec &spec = velocity.spec();
        const auto *sphere = std::get_if<SphereRegion>(&wind.region);
        for (int a = 0; a < 3; ++a)
        {
            const double delta = dt * wind.force[a];
            if (delta == 0.0)
            {
                continue;
            }
            const Lattice &l = out.lattice(a);
            auto &comp = out.component(a);
            for (int k = 0; k < l.dims[2]; ++k)
                for (int j = 0; j < l.dims[1]; ++j)
                    for (int i = 0; i < l.dims[0]; ++i)
                    {
                        if (sphere)
                        {
                            const Vec3 p = spec.face_center(a, i, j, k);
                            if ((p - sphere->center).squaredNorm() > sphere->radius * sphere->radius)
                            {
                                continue;
                            }
                        }
                        comp[l.index(i, j, k)] += delta;
                    }
        }
        return out;
    }

    StaggeredVectorGrid apply_solids(const StaggeredVectorGrid &velocity, const SolidMask &solids)
    {
        StaggeredVectorGrid out = velocity;
        for (int a = 0; a < 3; ++a)
        {
            auto &comp = out.component(a);
            const auto &flags = solids.faces[a];
            for (std::size_t idx = 0; idx < comp.size(); ++idx)
            {
                if (flags[idx])
                {
                    comp[idx] = 0.0;
                }
            }
        }
        return out;
    }

    StaggeredVectorGrid apply_obstacle(const StaggeredVectorGrid &velocity, const SphereObstacle &obstacle)
    {
        obstacle.validate();
        const std::array<SphereObstacle, 1> one{obstacle};
        return apply_solids(velocity, build_solids(velocity.spec(), one));
    }

    namespace
    {
        // Matrix-free 7-point Laplacian restricted to fluid cells. Bit b of
        // open[c] marks face b (x-, x+, y-, y+, z-, z+) as carrying flux. An
        // open face on the domain wall couples to a zero ghost pressure.
        class PoissonOperator
        {
        public:
            PoissonOperator(const GridSpec &spec, const SolidMask &solids, BoundaryMode boundary)
                : res_(spec.res), lattice_(cell_lattice(spec.res)), open_(lattice_.size(), 0),
                  diag_(lattice_.size(), 0.0)
            {
                const Vec3 h = spec.cell_size();
                for (int a = 0; a < 3; ++a)
                {
                    inv_h2_[a] = 1.0 / (h[a] * h[a]);
                    face_lattices_[a] = face_lattice(spec.res, a);
                }
                const auto [nx, ny, nz] = res_;
                for (int k = 0; k < nz; ++k)
                    for (int j = 0; j < ny; ++j)
                        for (int i = 0; i < nx; ++i)
                        {
                            const std::size_t c = lattice_.index(i, j, k);
                            if (solids.cells[c])
                            {
                                continue;
                            }
                            std::uint8_t bits = 0;
                            double diag = 0.0;
                            for (int a = 0; a < 3; ++a)
                            {
                                for (int side = 0; side < 2; ++side)
                                {
                                    Index3 f{i, j, k};
                                    f[a] += side;
                                    const bool on_wall = f[a] == 0 || f[a] == res_[a];
                                    const bool solid = solids.faces[a][face_lattices_[a].index(f[0], f[1], f[2])] != 0;
                                    if (solid || (on_wall && boundary == BoundaryMode::Closed))
                                    {
                                        continue;
                                    }
                                    bits |= static_cast<std::uint8_t>(1u << (2 * a + side));
                                    diag += inv_h2_[a];
                                }
                            }
                            open_[c] = bits;
                            diag_[c] = diag;
                        }
            }

            const Lattice &lattice() const { return lattice_; }
            bool active(std::size_t c) const { return diag_[c] > 0.0; }
            double diag(std::size_t c) const { return diag_[c]; }
            bool face_open(std::size_t c, int a, int side) const { return (open_[c] >> (2 * a + side)) & 1u; }

            // y = A x on one z slab.
            void apply_slab(int k, const std::vector<double> &x, std::vector<double> &y) const
            {
                const auto [nx, ny, nz] = res_;
                const std::size_t stride[3] = {1, static_cast<std::size_t>(nx),
                                               static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)};
                for (int j = 0; j < ny; ++j)
                    for (int i = 0; i < nx; ++i)
                    {
                        const std::size_t c = lattice_.index(i, j, k);
                        if (!active(c))
                        {
                            y[c] = 0.0;
                            continue;
                        }
                        const Index3 ijk{i, j, k};
                        const double xc = x[c];
                        double acc = 0.0;
                        for (int a = 0; a < 3; ++a)
                        {
                            if (face_open(c, a, 0))
                            {
                                const double nb = ijk[a] > 0 ? x[c - stride[a]] : 0.0;
                                acc += (xc - nb) * inv_h2_[a];
                            }
                            if (face_open(c, a, 1))
                            {
                                const double nb = ijk[a] + 1 < res_[a] ? x[c + stride[a]] : 0.0;
                                acc += (xc - nb) * inv_h2_[a];
                            }
                        }
                        y[c] = acc;
                    }
            }

            // Singular when no fluid cell touches an open wall.
            bool singular() const
            {
                const auto [nx, ny, nz] = res_;
                for (int k = 0; k < nz; ++k)
                    for (int j = 0; j < ny; ++j)
                        for (int i = 0; i < nx; ++i)
                        {
                            const std::size_t c = lattice_.index(i, j, k);
                            if (!active(c))
                                continue;
                            const Index3 ijk{i, j, k};
                            for (int a = 0; a < 3; ++a)
                            {
                                if ((ijk[a] == 0 && face_open(c, a, 0)) || (ijk[a] == res_[a] - 1 && face_open(c, a, 1)))
                                {
                                    return false;
                                }
                            }
                        }
                return true;
            }

        private:
            Index3 res_;
            Lattice lattice_;
            std::array<Lattice, 3> face_lattices_{};
            std::vector<std::uint8_t> open_;
            std::vector<double> diag_;
            double inv_h2_[3] = {1.0, 1.0, 1.0};
        };

        StaggeredVectorGrid enforce_walls(const StaggeredVectorGrid &velocity, const SolidMask &solids,
                                          BoundaryMode boundary)
        {
            StaggeredVectorGrid out = apply_solids(velocity, solids);
            if (boundary == BoundaryMode::Closed)
            {
                const Index3 res = velocity.spec().res;
                for (int a = 0; a < 3; ++a)
                {
                    const Lattice &l = out.lattice(a);
                    for (int k = 0; k < l.dims[2]; ++k)
                        for (int j = 0; j < l.dims[1]; ++j)
                            for (int i = 0; i < l.dims[0]; ++i)
                            {
                                const Index3 f{i, j, k};
                                if (f[a] == 0 || f[a] == res[a])
                                {
                                    out.at(a, i, j, k) = 0.0;
                                }
                            }
                }
            }
            return out;
        }

        void compute_divergence(const StaggeredVectorGrid &v, const PoissonOperator &op, std::vector<double> &div)
        {
            const Lattice &l = op.lattice();
            parallel::for_each_chunk(static_cast<std::size_t>(l.dims[2]), [&](std::size_t slab) {
                const int k = static_cast<int>(slab);
                for (int j = 0; j < l.dims[1]; ++j)
                    for (int i = 0; i < l.dims[0]; ++i)
                    {
                        const std::size_t c = l.index(i, j, k);
                        // A is -laplacian, so A p = -div.
                        div[c] = op.active(c) ? -v.divergence(i, j, k) : 0.0;
                    }
            });
        }

        double max_abs_active(const std::vector<double> &x, const PoissonOperator &op)
        {
            const Lattice &l = op.lattice();
            const std::size_t slab = static_cast<std::size_t>(l.dims[0]) * l.dims[1];
            return parallel::max_chunks(static_cast<std::size_t>(l.dims[2]), [&](std::size_t s) {
                double m = 0.0;
                for (std::size_t c = s * slab; c < (s + 1) * slab; ++c)
                {
                    if (op.active(c))
                        m = std::max(m, std::abs(x[c]));
                }
                return m;
            });
        }

        double dot(const std::vector<double> &a, const std::vector<double> &b, std::size_t slabs, std::size_t slab)
        {
            return parallel::sum_chunks(slabs, [&](std::size_t s) {
                double acc = 0.0;
                for (std::size_t c = s * slab; c < (s + 1) * slab; ++c)
                {
                    acc += a[c] * b[c];
                }
                return acc;
            });
        }

        void remove_mean(std::vector<double> &x, const PoissonOperator &op)
        {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t c = 0; c < x.size(); ++c)
            {
                if (op.active(c))
                {
                    sum += x[c];
                    ++count;
                }
            }
            if (count == 0)
                return;
            const double mean = sum / static_cast<double>(count);
            for (std::size_t c = 0; c < x.size(); ++c)
            {
                if (op.active(c))
                    x[c] -= mean;
            }
        }

        // Jacobi-preconditioned CG on A p = b, starting from p (in/out).
        // Returns iterations used; stops when max |b - A p| <= target.
        int conjugate_gradient(const PoissonOperator &op, const std::vector<double> &b, std::vector<double> &p,
                               double target, int max_iters, bool singular)
        {
            const Lattice &l = op.lattice();
            const std::size_t slabs = static_cast<std::size_t>(l.dims[2]);
            const std::size_t slab = static_cast<std::size_t>(l.dims[0]) * l.dims[1];
            const std::size_t n = l.size();

            std::vector<double> r(n, 0.0);
            std::vector<double> z(n, 0.0);
            std::vector<double> d(n, 0.0);
            std::vector<double> q(n, 0.0);

            parallel::for_each_chunk(slabs, [&](std::size_t s) { op.apply_slab(static_cast<int>(s), p, q); });
            for (std::size_t c = 0; c < n; ++c)
            {
                r[c] = op.active(c) ? b[c] - q[c] : 0.0;
            }
            if (singular)
            {
                remove_mean(r, op);
            }
            if (max_abs_active(r, op) <= target)
            {
                return 0;
            }
            const auto precondition = [&](std::size_t s) {
                for (std::size_t c = s * slab; c < (s + 1) * slab; ++c)
                {
                    z[c] = op.active(c) ? r[c] / op.diag(c) : 0.0;
                }
            };
            parallel::for_each_chunk(slabs, precondition);
            d = z;
            double rz = dot(r, z, slabs, slab);

            int it = 0;
            while (it < max_iters)
            {
                ++it;
                parallel::for_each_chunk(slabs, [&](std::size_t s) { op.apply_slab(static_cast<int>(s), d, q); });
                const double dq = dot(d, q, slabs, slab);
                if (!(dq > 0.0))
                {
                    break;
                }
                const double alpha = rz / dq;
                parallel::for_each_chunk(slabs, [&](std::size_t s) {
                    for (std::size_t c = s * slab; c < (s + 1) * slab; ++c)
                    {
                        p[c] += alpha * d[c];
                        r[c] -= alpha * q[c];
                    }
                });
                if (max_abs_active(r, op) <= target)
                {
                    break;
                }
                parallel::for_each_chunk(slabs, precondition);
                const double rz_next = dot(r, z, slabs, slab);
                const double beta = rz_next / rz;
                rz = rz_next;
                parallel::for_each_chunk(slabs, [&](std::size_t s) {
                    for (std::size_t c = s * slab; c < (s + 1) * slab; ++c)
                    {
                        d[c] = z[c] + beta * d[c];
                    }
                });
            }
            return it;
        }

        StaggeredVectorGrid subtract_gradient(const StaggeredVectorGrid &velocity, const PoissonOperator &op,
                                              const std::vector<double> &p)
        {
            StaggeredVectorGrid out = velocity;
            const GridSpec &spec = velocity.spec();
            const Vec3 h = spec.cell_size();
            const Lattice &cells = op.lattice();
            const Index3 res = spec.res;
            for (int a = 0; a < 3; ++a)
            {
                const Lattice &l = out.lattice(a);
                auto &comp = out.component(a);
                parallel::for_each_chunk(static_cast<std::size_t>(l.dims[2]), [&](std::size_t slab) {
                    const int k = static_cast<int>(slab);
                    for (int j = 0; j < l.dims[1]; ++j)
                        for (int i = 0; i < l.dims[0]; ++i)
                        {
                            Index3 hi{i, j, k};
                            Index3 lo{i, j, k};
                            lo[a] -= 1;
                            // A face carries flux iff it is open as seen from an
                            // adjacent active cell.
                            bool open = false;
                            double p_lo = 0.0;
                            double p_hi = 0.0;
                            if (lo[a] >= 0)
                            {
                                const std::size_t c = cells.index(lo[0], lo[1], lo[2]);
                                if (op.active(c) && op.face_open(c, a, 1))
                                {
                                    open = true;
                                    p_lo = p[c];
                                }
                            }
                            if (hi[a] < res[a])
                            {
                                const std::size_t c = cells.index(hi[0], hi[1], hi[2]);
                                if (op.active(c) && op.face_open(c, a, 0))
                                {
                                    open = true;
                                    p_hi = p[c];
                                }
                            }
                            if (open)
                            {
                                comp[l.index(i, j, k)] -= (p_hi - p_lo) / h[a];
                            }
                        }
                });
            }
            return out;
        }
    } // namespace

    ProjectionResult project(const StaggeredVectorGrid &velocity, const SolidMask &solids, double tol, int max_iters,
                             BoundaryMode boundary)
    {
        if (!(tol > 0.0))
        {
            throw ArgumentError("projection tolerance must be positive");
        }
        if (max_iters <= 0)
        {
            throw ArgumentError("projection max_iters must be positive");
        }
        const GridSpec &spec = velocity.spec();
        if (solids.res != spec.res)
        {
            throw ArgumentError("solid mask resolution does not match velocity grid");
        }
        const StaggeredVectorGrid walled = enforce_walls(velocity, solids, boundary);
        const PoissonOperator op(spec, solids, boundary);
        const bool singular = op.singular();
        const std::size_t n = op.lattice().size();

        std::vector<double> div(n, 0.0);
        compute_divergence(walled, op, div);
        if (singular)
        {
            remove_mean(div, op);
        }

        ProjectionResult result{walled, {}};
        if (max_abs_active(div, op) <= tol)
        {
            result.report.max_divergence = max_divergence(walled, solids);
            result.report.converged = result.report.max_divergence <= tol;
            if (result.report.converged)
            {
                return result;
            }
        }

        // CG tracks its residual recursively; aim below tol and re-check the
        // true divergence, restarting from the current iterate if it drifted.
        std::vector<double> pressure(n, 0.0);
        int used = 0;
        double target = 0.5 * tol;
        for (int restart = 0; restart < 32; ++restart)
        {
            used += conjugate_gradient(op, div, pressure, target, max_iters - used, singular);
            result.velocity = subtract_gradient(walled, op, pressure);
            result.report.max_divergence = max_divergence(result.velocity, solids);
            result.report.iterations = used;
            result.report.converged = result.report.max_divergence <= tol;
            if (result.report.converged || used >= max_iters)
            {
                break;
            }
            target *= 0.25;
        }
        return result;
    }

    double max_divergence(const StaggeredVectorGrid &velocity, const SolidMask &solids)
    {
        const GridSpec &spec = velocity.spec();
        const Lattice cells = cell_lattice(spec.res);
        return parallel::max_chunks(static_cast<std::size_t>(spec.res[2]), [&](std::size_t s) {
            const int k = static_cast<int>(s);
            double m = 0.0;
            for (int j = 0; j < spec.res[1]; ++j)
                for (int i = 0; i < spec.res[0]; ++i)
                {
                    const std::size_t c = cells.index(i, j, k);
                    if (solids.cells.size() == cells.size() && solids.cells[c])
                        continue;
                    m = std::max(m, std::abs(velocity.divergence(i, j, k)));
                }
            return m;
        });
    }

    double total_mass(const ScalarGrid &density)
    {
        const Vec3 h = density.spec().cell_size();
        return density.sum() * h.prod();
    }

    StepResult step(const SimState &state, const SimConfig &config)
    {
        config.validate();
        check_shared_box(state.density.spec(), state.velocity.spec());
        const GridSpec &spec = state.velocity.spec();
        const double dt = config.dt;

        StepResult result;
        result.report.cfl = cfl_number(state.velocity, dt);
        if (result.report.cfl > config.cfl_warn)
        {
            spdlog::warn("step {}: CFL number {:.3f} exceeds {:.3f}", state.step_index, result.report.cfl,
                         config.cfl_warn);
        }

        StaggeredVectorGrid velocity(spec);
        {
            StaggeredVectorGrid advected(spec);
            for (int a = 0; a < 3; ++a)
            {
                maccormack_lattice(spec, state.velocity.lattice(a), state.velocity.component(a).data(),
                                   advected.component(a).data(), state.velocity, dt);
            }
            velocity = std::move(advected);
        }
        velocity = add_buoyancy(velocity, state.density, config.buoyancy_coeff, dt);
        for (const auto &w : config.wind)
        {
            velocity = add_wind(velocity, w, dt);
        }
        const SolidMask solids = build_solids(spec, config.obstacles);
        velocity = apply_solids(velocity, solids);

        ProjectionResult projected =
            project(velocity, solids, config.projection_tol, config.projection_max_iters, config.boundary);
        if (!projected.report.converged)
        {
            spdlog::warn("step {}: projection stopped after {} iterations with max divergence {:.3e}",
                         state.step_index, projected.report.iterations, projected.report.max_divergence);
        }
        result.report.projection = projected.report;

        ScalarGrid density(spec);
        maccormack_lattice(spec, state.density.lattice(), state.density.values().data(), density.values().data(),
                           projected.velocity, dt);
        for (double &v : density.values())
        {
            v = std::max(v, 0.0);
        }

        result.state.density = std::move(density);
        result.state.velocity = std::move(projected.velocity);
        result.state.step_index = state.step_index + 1;
        result.state.clock = state.clock + dt;
        result.report.total_mass = total_mass(result.state.density);
        return result;
    }

    std::vector<asset::VisualParticle> advect_particles(std::span<const asset::VisualParticle> particles,
                                                        const StaggeredVectorGrid &velocity, double dt)
    {
        const Box &box = velocity.spec().bbox;
        const auto sample = [&](const Vec3 &x) -> Vec3 { return box.contains(x) ? velocity.sample(x) : Vec3::Zero(); };
        std::vector<asset::VisualParticle> out(particles.begin(), particles.end());
        for (auto &p : out)
        {
            const Vec3 x = p.position.cast<double>();
            const Vec3 mid = x + 0.5 * dt * sample(x);
            p.position = (x + dt * sample(mid)).cast<float>();
        }
        return out;
    }

    GridSpec grid_for_frame(const asset::AssetFrame &frame, const SimConfig &config)
    {
        if (frame.visual.empty())
        {
            throw ArgumentError("frame has no visual particles to bound the simulation grid");
        }
        Box box = splat::restrict_bbox(frame.visual, config.padding_sigmas);
        // A degenerate axis (all centers coplanar, no padding) still needs
        // a positive extent.
        double fallback = 0.0;
        for (const auto &p : frame.visual)
        {
            fallback = std::max(fallback, static_cast<double>(p.scale.maxCoeff()));
        }
        for (int a = 0; a < 3; ++a)
        {
            if (!(box.max[a] > box.min[a]))
            {
                box.min[a] -= fallback;
                box.max[a] += fallback;
            }
        }
        GridSpec spec{config.resolution, box};
        spec.validate();
        return spec;
    }

    SimState init_from_asset(const asset::SmokeAsset &asset, std::size_t frame, const SimConfig &config)
    {
        config.validate();
        const asset::AssetFrame &f = asset.frame(frame);
        const GridSpec spec = grid_for_frame(f, config);
        const Vec3 kernel_scale = config.kernel_scale.value_or(splat::default_kernel_scale(spec));
        SimState state;
        state.density = splat::splat_density(f.visual, spec, config.splat);
        state.velocity = splat::splat_velocity(f.physical, kernel_scale, spec, config.splat);
        return state;
    }
} // namespace smokeforge::solver
