#pragma once

#include "smokeforge/grid.hpp"
#include "smokeforge/solver.hpp"

#include <string>
#include <string_view>

// Wind and obstacle presets. Preset coordinates are grid-index units on a
// 128^3 reference domain and are mapped linearly onto the simulation box.
namespace smokeforge::scenario
{
    enum class Scenario
    {
        None,
        WindGlobal,
        WindLocal,
        Obstacle,
    };

    constexpr double kReferenceExtent = 128.0;
    constexpr double kWindForceX = 0.005;
    constexpr double kLocalWindRadius = 30.0;
    constexpr double kObstacleRadius = 10.0;
    constexpr double kObstacleX = 50.0;
    constexpr double kObstacleY = 70.0;

    // Throws ArgumentError on unknown names.
    Scenario parse_scenario(std::string_view name);
    std::string scenario_name(Scenario s);

    // Reference [0,128]^3 coordinates -> world box.
    struct ReferenceMapping
    {
        Box bbox;

        Vec3 to_world(const Vec3 &ref) const;
        // Lengths (radii) scale with the x extent.
        double length(double ref_length) const;
        // Accelerations scale per axis.
        Vec3 acceleration(const Vec3 &ref_accel) const;
    };

    solver::WindForce global_wind(const ReferenceMapping &m);
    // Sphere of radius 30 at the scene center.
    solver::WindForce local_wind(const ReferenceMapping &m);
    // Ball of radius 10 at (50, 70, z_c).
    solver::SphereObstacle ball(const ReferenceMapping &m);

    // Adds the preset's forces/obstacles to config.
    void apply_scenario(solver::SimConfig &config, Scenario s, const Box &bbox);

    // Built-in scene for runs without an asset: a Gaussian density blob
    // below the obstacle position on the reference domain, at rest.
    struct ReferenceScene
    {
        Vec3 center{50.0, 46.0, 64.0};
        double sigma = 8.0;
        double peak = 1.0;
        double buoyancy = 4.0;
    };

    solver::SimState reference_plume(const Index3 &res, const ReferenceScene &scene = {});
    Box reference_box();
} // namespace smokeforge::scenario
