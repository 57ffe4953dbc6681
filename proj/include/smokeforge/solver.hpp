#pragma once

#include "smokeforge/asset.hpp"
#include "smokeforge/grid.hpp"
#include "smokeforge/splat.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

// Incompressible smoke on a MAC grid: MacCormack advection, buoyancy, wind,
// sphere obstacles and a pressure projection solved with preconditioned CG.
namespace smokeforge::solver
{
    struct GlobalRegion
    {
        bool operator==(const GlobalRegion &) const = default;
    };

    struct SphereRegion
    {
        Vec3 center = Vec3::Zero();
        double radius = 1.0;
        bool operator==(const SphereRegion &) const = default;
    };

    // Constant acceleration applied either everywhere or inside a sphere.
    struct WindForce
    {
        Vec3 force = Vec3::Zero();
        std::variant<GlobalRegion, SphereRegion> region = GlobalRegion{};

        void validate() const;
        bool operator==(const WindForce &) const = default;
    };

    // Static no-slip ball.
    struct SphereObstacle
    {
        Vec3 center = Vec3::Zero();
        double radius = 1.0;

        void validate() const;
        bool contains(const Vec3 &p) const { return (p - center).squaredNorm() <= radius * radius; }
        bool operator==(const SphereObstacle &) const = default;
    };

    // Behaviour of the six domain walls.
    enum class BoundaryMode
    {
        Open,   // zero pressure outside the box; flow may leave or enter
        Closed, // no-flux walls
    };

    struct SimConfig
    {
        double dt = 1.0 / 30.0;
        double buoyancy_coeff = 0.0;
        std::vector<WindForce> wind;
        std::vector<SphereObstacle> obstacles;
        double projection_tol = 1e-4;
        int projection_max_iters = 500;
        // Velocity splat kernel width; unset means 1.5 cells per axis.
        std::optional<Vec3> kernel_scale;
        Index3 resolution{128, 128, 128};
        double padding_sigmas = 3.0;
        BoundaryMode boundary = BoundaryMode::Open;
        splat::SplatOptions splat;
        // Advection warns when dt * max|V| / cell exceeds this.
        double cfl_warn = 1.0;

        void validate() const;
    };

    struct SimState
    {
        ScalarGrid density;
        StaggeredVectorGrid velocity;
        std::uint64_t step_index = 0;
        double clock = 0.0;

        bool operator==(const SimState &) const = default;
    };

    struct ProjectionReport
    {
        int iterations = 0;
        double max_divergence = 0.0; // measured on fluid cells after the update
        bool converged = true;
    };

    struct StepReport
    {
        ProjectionReport projection;
        double cfl = 0.0;
        double total_mass = 0.0;
    };

    // Cells whose centers lie inside any obstacle, and faces that are
    // either adjacent to such a cell or have their own center inside an
    // obstacle. Solid faces carry zero velocity.
    struct SolidMask
    {
        Index3 res{1, 1, 1};
        std::vector<std::uint8_t> cells;
        std::array<std::vector<std::uint8_t>, 3> faces;

        bool any() const;
        bool cell(int i, int j, int k) const;
    };

    SolidMask build_solids(const GridSpec &spec, std::span<const SphereObstacle> obstacles);

    // Advection with a MacCormack predictor/corrector; the corrected value is
    // clamped to the extrema of the forward pass's interpolation stencil.
    ScalarGrid advect_maccormack(const ScalarGrid &field, const StaggeredVectorGrid &velocity, double dt);
    StaggeredVectorGrid advect_maccormack(const StaggeredVectorGrid &field, const StaggeredVectorGrid &velocity,
                                          double dt);

    // dt * max|V| / min cell size.
    double cfl_number(const StaggeredVectorGrid &velocity, double dt);

    // v faces += dt * coeff * rho, with rho averaged onto the faces.
    StaggeredVectorGrid add_buoyancy(const StaggeredVectorGrid &velocity, const ScalarGrid &density,
                                     double buoyancy_coeff, double dt);

    StaggeredVectorGrid add_wind(const StaggeredVectorGrid &velocity, const WindForce &wind, double dt);

    // Zeroes every solid face of the obstacle.
    StaggeredVectorGrid apply_obstacle(const StaggeredVectorGrid &velocity, const SphereObstacle &obstacle);
    StaggeredVectorGrid apply_solids(const StaggeredVectorGrid &velocity, const SolidMask &solids);

    struct ProjectionResult
    {
        StaggeredVectorGrid velocity;
        ProjectionReport report;
    };

    // Solves the pressure Poisson equation on fluid cells and subtracts the
    // gradient. Stops once max |div| <= tol on fluid cells or after
    // max_iters CG iterations (report.converged = false, best iterate kept).
    ProjectionResult project(const StaggeredVectorGrid &velocity, const SolidMask &solids, double tol, int max_iters,
                             BoundaryMode boundary = BoundaryMode::Open);

    // Max |div V| over non-solid cells.
    double max_divergence(const StaggeredVectorGrid &velocity, const SolidMask &solids);

    // Sum of density times cell volume.
    double total_mass(const ScalarGrid &density);

    struct StepResult
    {
        SimState state;
        StepReport report;
    };

    // advect V -> buoyancy -> wind -> obstacles -> project -> advect rho ->
    // clamp rho >= 0.
    StepResult step(const SimState &state, const SimConfig &config);

    // RK2 midpoint through the staggered field; particles outside the grid
    // box see zero velocity. Only positions change.
    std::vector<asset::VisualParticle> advect_particles(std::span<const asset::VisualParticle> particles,
                                                        const StaggeredVectorGrid &velocity, double dt);

    // Grid spec covering the visual particles of one frame (1-based).
    GridSpec grid_for_frame(const asset::AssetFrame &frame, const SimConfig &config);

    // Density from visual particles and velocity from physical particles on
    // a shared box.
    SimState init_from_asset(const asset::SmokeAsset &asset, std::size_t frame, const SimConfig &config);
} // namespace smokeforge::solver
