#include "smokeforge/scenario.hpp"

#include "smokeforge/error.hpp"

#include <cmath>

namespace smokeforge::scenario
{
    Scenario parse_scenario(std::string_view name)
    {
        if (name == "none")
            return Scenario::None;
        if (name == "wind-global")
            return Scenario::WindGlobal;
        if (name == "wind-local")
            return Scenario::WindLocal;
        if (name == "obstacle")
            return Scenario::Obstacle;
        throw ArgumentError("unknown scenario '" + std::string(name) +
                            "' (expected none|wind-global|wind-local|obstacle)");
    }

    std::string scenario_name(Scenario s)
    {
        switch (s)
        {
        case Scenario::None:
            return "none";
        case Scenario::WindGlobal:
            return "wind-global";
        case Scenario::WindLocal:
            return "wind-local";
        case Scenario::Obstacle:
            return "obstacle";
        }
        return "none";
    }

    Vec3 ReferenceMapping::to_world(const Vec3 &ref) const
    {
        return bbox.min + (ref / kReferenceExtent).cwiseProduct(bbox.extent());
    }

    double ReferenceMapping::length(double ref_length) const
    {
        return ref_length * bbox.extent().x() / kReferenceExtent;
    }

    Vec3 ReferenceMapping::acceleration(const Vec3 &ref_accel) const
    {
        return ref_accel.cwiseProduct(bbox.extent()) / kReferenceExtent;
    }

    solver::WindForce global_wind(const ReferenceMapping &m)
    {
        return {m.acceleration(Vec3(kWindForceX, 0, 0)), solver::GlobalRegion{}};
    }

    solver::WindForce local_wind(const ReferenceMapping &m)
    {
        const Vec3 c = m.to_world(Vec3::Constant(0.5 * kReferenceExtent));
        return {m.acceleration(Vec3(kWindForceX, 0, 0)), solver::SphereRegion{c, m.length(kLocalWindRadius)}};
    }

    solver::SphereObstacle ball(const ReferenceMapping &m)
    {
        return {m.to_world(Vec3(kObstacleX, kObstacleY, 0.5 * kReferenceExtent)), m.length(kObstacleRadius)};
    }

    void apply_scenario(solver::SimConfig &config, Scenario s, const Box &bbox)
    {
        const ReferenceMapping m{bbox};
        switch (s)
        {
        case Scenario::None:
            break;
        case Scenario::WindGlobal:
            config.wind.push_back(global_wind(m));
            break;
        case Scenario::WindLocal:
            config.wind.push_back(local_wind(m));
            break;
        case Scenario::Obstacle:
            config.obstacles.push_back(ball(m));
            break;
        }
    }

    Box reference_box() { return Box{Vec3::Zero(), Vec3::Constant(kReferenceExtent)}; }

    solver::SimState reference_plume(const Index3 &res, const ReferenceScene &scene)
    {
        const GridSpec spec{res, reference_box()};
        spec.validate();
        solver::SimState s;
        s.density = ScalarGrid(spec);
        const double inv = 1.0 / (2.0 * scene.sigma * scene.sigma);
        for (int k = 0; k < res[2]; ++k)
            for (int j = 0; j < res[1]; ++j)
                for (int i = 0; i < res[0]; ++i)
                {
                    const double r2 = (spec.cell_center(i, j, k) - scene.center).squaredNorm();
                    s.density.at(i, j, k) = scene.peak * std::exp(-r2 * inv);
                }
        s.velocity = StaggeredVectorGrid(spec);
        return s;
    }
} // namespace smokeforge::scenario
