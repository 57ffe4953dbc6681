#include "smokeforge/error.hpp"
#include "smokeforge/parallel.hpp"
#include "smokeforge/solver.hpp"

#include "../support/generators.hpp"
#include "../support/semi_lagrangian_oracle.hpp"
#include "../support/sim_fixtures.hpp"

#include <doctest.h>
#include <spdlog/spdlog.h>

#include <cmath>

using namespace smokeforge;
using namespace smokeforge::solver;
using testing::cube_grid;

namespace
{
    double max_abs_diff(const std::vector<double> &a, const std::vector<double> &b)
    {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    }

    double max_abs_diff(const StaggeredVectorGrid &a, const StaggeredVectorGrid &b)
    {
        double m = 0.0;
        for (int ax = 0; ax < 3; ++ax)
            m = std::max(m, max_abs_diff(a.component(ax), b.component(ax)));
        return m;
    }

    struct QuietLogs
    {
        QuietLogs() { spdlog::set_level(spdlog::level::err); }
        ~QuietLogs() { spdlog::set_level(spdlog::level::info); }
    };
} // namespace

TEST_CASE("MacCormack preserves constant fields under arbitrary velocity")
{
    QuietLogs quiet;
    std::mt19937 rng(3);
    const GridSpec spec = cube_grid(12, -1, 2);
    const auto vel = testing::random_velocity(spec, rng, 5.0);
    const ScalarGrid c(spec, 0.37);
    const auto out = advect_maccormack(c, vel, 0.1);
    for (double v : out.values())
        CHECK(std::abs(v - 0.37) <= 1e-12);

    const auto uc = testing::uniform_velocity(spec, Vec3(0.3, -2.0, 1.1));
    const auto vout = advect_maccormack(uc, vel, 0.1);
    CHECK(max_abs_diff(vout, uc) <= 1e-12);
}

TEST_CASE("MacCormack with zero velocity is the identity")
{
    std::mt19937 rng(4);
    const GridSpec spec = cube_grid(10, 0, 1);
    ScalarGrid f(spec);
    std::uniform_real_distribution<double> u(0, 1);
    for (double &v : f.values())
        v = u(rng);
    const StaggeredVectorGrid zero(spec);
    const auto out = advect_maccormack(f, zero, 0.5);
    CHECK(max_abs_diff(out.values(), f.values()) <= 1e-12);

    const auto vf = testing::random_velocity(spec, rng);
    CHECK(max_abs_diff(advect_maccormack(vf, zero, 0.5), vf) <= 1e-12);
}

TEST_CASE("MacCormack keeps a translated blob sharper than first-order semi-Lagrangian")
{
    QuietLogs quiet;
    const GridSpec spec = cube_grid(40, 0, 40);
    const Vec3 u(1.0, 0.5, 0.0);
    const auto vel = testing::uniform_velocity(spec, u);
    const double dt = 0.35;
    ScalarGrid mc = testing::gaussian_blob(spec, Vec3(12, 14, 20), 2.0);
    ScalarGrid sl = mc;
    for (int s = 0; s < 50; ++s)
    {
        mc = advect_maccormack(mc, vel, dt);
        sl = testing::semi_lagrangian_uniform(sl, u, dt);
    }
    MESSAGE("peaks: maccormack " << mc.max_value() << ", semi-Lagrangian " << sl.max_value());
    CHECK(mc.max_value() >= sl.max_value());
    // Both moved the blob the same distance.
    const Vec3 c_mc = testing::center_of_mass(mc);
    const Vec3 c_sl = testing::center_of_mass(sl);
    CHECK((c_mc - c_sl).norm() < 0.5);
    CHECK((c_mc - Vec3(12, 14, 20) - 50 * dt * u).norm() < 0.75);
}

TEST_CASE("MacCormack limiter keeps values inside the original range")
{
    QuietLogs quiet;
    std::mt19937 rng(6);
    const GridSpec spec = cube_grid(16, 0, 16);
    ScalarGrid f(spec);
    std::uniform_real_distribution<double> u(0, 1);
    for (double &v : f.values())
        v = u(rng) > 0.7 ? 1.0 : 0.0;
    const auto vel = testing::random_velocity(spec, rng, 2.0);
    const auto out = advect_maccormack(f, vel, 0.4);
    for (double v : out.values())
    {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("advection requires a shared grid")
{
    const ScalarGrid f(cube_grid(4, 0, 1));
    const StaggeredVectorGrid v(cube_grid(4, 0, 2));
    CHECK_THROWS_AS((void)advect_maccormack(f, v, 0.1), ArgumentError);
}

TEST_CASE("buoyancy")
{
    const GridSpec spec = cube_grid(6, 0, 6);
    std::mt19937 rng(1);
    const auto v0 = testing::random_velocity(spec, rng);
    const ScalarGrid ones(spec, 1.0);

    CHECK(add_buoyancy(v0, ones, 0.0, 0.1) == v0);

    const double dt = 0.1;
    const double b = 2.5;
    const auto v1 = add_buoyancy(v0, ones, b, dt);
    for (int k = 0; k < 6; ++k)
        for (int j = 1; j < 6; ++j)
            for (int i = 0; i < 6; ++i)
                CHECK(v1.at(1, i, j, k) - v0.at(1, i, j, k) == doctest::Approx(dt * b).epsilon(1e-12));
    CHECK(v1.component(0) == v0.component(0));
    CHECK(v1.component(2) == v0.component(2));
}

TEST_CASE("negative buoyancy sinks a blob")
{
    QuietLogs quiet;
    const GridSpec spec = cube_grid(24, 0, 24);
    SimState state = testing::blob_state(spec, Vec3(12, 14, 12), 2.5);
    SimConfig cfg;
    cfg.buoyancy_coeff = -1.0;
    cfg.dt = 0.1;
    double prev_y = testing::center_of_mass(state.density).y();
    for (int s = 0; s < 50; ++s)
    {
        state = step(state, cfg).state;
        const double y = testing::center_of_mass(state.density).y();
        CHECK(y < prev_y);
        prev_y = y;
    }
}

TEST_CASE("wind forcing")
{
    const GridSpec spec = cube_grid(16, 0, 128);
    std::mt19937 rng(2);
    const auto v0 = testing::random_velocity(spec, rng);
    const double dt = 1.0 / 30.0;

    WindForce global{Vec3(0.005, 0, 0), GlobalRegion{}};
    const auto g = add_wind(v0, global, dt);
    for (std::size_t i = 0; i < g.component(0).size(); ++i)
        CHECK(g.component(0)[i] - v0.component(0)[i] == doctest::Approx(dt * 0.005).epsilon(1e-9));
    CHECK(g.component(1) == v0.component(1));

    WindForce local{Vec3(0.005, 0, 0), SphereRegion{Vec3(64, 64, 64), 30.0}};
    const auto l = add_wind(v0, local, dt);
    int inside = 0;
    const Lattice &lat = l.lattice(0);
    for (int k = 0; k < lat.dims[2]; ++k)
        for (int j = 0; j < lat.dims[1]; ++j)
            for (int i = 0; i < lat.dims[0]; ++i)
            {
                const double delta = l.at(0, i, j, k) - v0.at(0, i, j, k);
                if ((spec.face_center(0, i, j, k) - Vec3(64, 64, 64)).norm() > 30.0)
                    CHECK(delta == 0.0);
                else
                {
                    CHECK(delta == doctest::Approx(dt * 0.005).epsilon(1e-9));
                    ++inside;
                }
            }
    CHECK(inside > 0);

    CHECK(add_wind(v0, WindForce{}, dt) == v0);
    CHECK_THROWS_AS((void)add_wind(v0, WindForce{Vec3(1, 0, 0), SphereRegion{Vec3::Zero(), -1.0}}, dt), ArgumentError);
}

TEST_CASE("obstacles")
{
    const GridSpec spec = cube_grid(8, 0, 8);
    std::mt19937 rng(5);
    const auto v0 = testing::random_velocity(spec, rng);

    const auto all = apply_obstacle(v0, SphereObstacle{Vec3(4, 4, 4), 100.0});
    CHECK(all.max_abs() == 0.0);

    CHECK(apply_obstacle(v0, SphereObstacle{Vec3(50, 50, 50), 2.0}) == v0);

    const SphereObstacle ball{Vec3(4, 4, 4), 2.0};
    const auto v1 = apply_obstacle(v0, ball);
    for (int a = 0; a < 3; ++a)
    {
        const Lattice &l = v1.lattice(a);
        for (int k = 0; k < l.dims[2]; ++k)
            for (int j = 0; j < l.dims[1]; ++j)
                for (int i = 0; i < l.dims[0]; ++i)
                    if (ball.contains(spec.face_center(a, i, j, k)))
                        CHECK(v1.at(a, i, j, k) == 0.0);
    }
    CHECK_THROWS_AS((void)apply_obstacle(v0, SphereObstacle{Vec3::Zero(), 0.0}), ArgumentError);
}

TEST_CASE("projection leaves divergence-free fields alone")
{
    const GridSpec spec = cube_grid(16, 0, 16);
    const auto u = testing::uniform_velocity(spec, Vec3(0.4, -0.2, 0.9));
    const SolidMask none = build_solids(spec, {});
    const auto r = project(u, none, 1e-4, 500, BoundaryMode::Open);
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 0);
    CHECK(max_abs_diff(r.velocity, u) <= 1e-4);

    // Closed walls: a field that is already zero on the walls and
    // divergence-free (a single interior circulation) is unchanged.
    StaggeredVectorGrid loop(spec);
    loop.at(0, 8, 7, 7) = 1.0;
    loop.at(1, 8, 8, 7) = 1.0;
    loop.at(0, 8, 8, 7) = -1.0;
    loop.at(1, 7, 8, 7) = -1.0;
    REQUIRE(max_divergence(loop, none) == 0.0);
    const auto rc = project(loop, none, 1e-4, 500, BoundaryMode::Closed);
    CHECK(max_abs_diff(rc.velocity, loop) <= 1e-4);
}

TEST_CASE("projection of a random field reaches the divergence tolerance")
{
    std::mt19937 rng(99);
    const GridSpec spec = cube_grid(32, 0, 32);
    const auto v = testing::random_velocity(spec, rng);
    const SolidMask none = build_solids(spec, {});
    for (BoundaryMode mode : {BoundaryMode::Open, BoundaryMode::Closed})
    {
        const auto r = project(v, none, 1e-4, 2000, mode);
        MESSAGE("iterations " << r.report.iterations << " max div " << r.report.max_divergence);
        CHECK(r.report.converged);
        CHECK(max_divergence(r.velocity, none) <= 1e-4);

        const auto twice = project(r.velocity, none, 1e-4, 2000, mode);
        CHECK(max_abs_diff(twice.velocity, r.velocity) <= 1e-4);
    }
}

TEST_CASE("projection with an obstacle keeps solid faces at zero")
{
    std::mt19937 rng(17);
    const GridSpec spec = cube_grid(24, 0, 24);
    const auto v = testing::random_velocity(spec, rng);
    const std::vector<SphereObstacle> balls{{Vec3(12, 12, 12), 5.0}};
    const SolidMask solids = build_solids(spec, balls);
    const auto r = project(v, solids, 1e-4, 2000, BoundaryMode::Open);
    CHECK(r.report.converged);
    CHECK(max_divergence(r.velocity, solids) <= 1e-4);
    for (int a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < solids.faces[a].size(); ++i)
            if (solids.faces[a][i])
                CHECK(r.velocity.component(a)[i] == 0.0);
}

TEST_CASE("projection reports non-convergence and keeps the best iterate")
{
    std::mt19937 rng(19);
    const GridSpec spec = cube_grid(16, 0, 16);
    const auto v = testing::random_velocity(spec, rng);
    const SolidMask none = build_solids(spec, {});
    const double before = max_divergence(v, none);
    const auto r = project(v, none, 1e-10, 3, BoundaryMode::Open);
    CHECK_FALSE(r.report.converged);
    CHECK(r.report.iterations == 3);
    CHECK(r.report.max_divergence < before);
    CHECK_THROWS_AS((void)project(v, none, 0.0, 3), ArgumentError);
}

TEST_CASE("step: empty state is a fixed point")
{
    const GridSpec spec = cube_grid(8, 0, 8);
    SimState s;
    s.density = ScalarGrid(spec);
    s.velocity = StaggeredVectorGrid(spec);
    s.step_index = 4;
    s.clock = 1.0;
    SimConfig cfg;
    const auto next = step(s, cfg).state;
    CHECK(next.density == s.density);
    CHECK(next.velocity == s.velocity);
    CHECK(next.step_index == 5);
    CHECK(next.clock == doctest::Approx(1.0 + cfg.dt));
}

TEST_CASE("step: positive buoyancy raises the plume")
{
    QuietLogs quiet;
    const GridSpec spec = cube_grid(24, 0, 24);
    SimState state = testing::blob_state(spec, Vec3(12, 8, 12), 2.5);
    SimConfig cfg;
    cfg.buoyancy_coeff = 1.0;
    cfg.dt = 0.1;
    double prev_y = testing::center_of_mass(state.density).y();
    for (int s = 0; s < 100; ++s)
    {
        const auto r = step(state, cfg);
        CHECK(r.report.projection.max_divergence <= cfg.projection_tol);
        state = r.state;
        const double y = testing::center_of_mass(state.density).y();
        CHECK(y > prev_y);
        prev_y = y;
        for (double v : state.density.values())
            REQUIRE(v >= 0.0);
    }
}

TEST_CASE("step: global wind pushes the plume along +x with bounded mass drift")
{
    QuietLogs quiet;
    const GridSpec spec = cube_grid(32, 0, 128);
    SimState state = testing::blob_state(spec, Vec3(64, 48, 64), 10.0);
    SimConfig cfg;
    cfg.wind.push_back(WindForce{Vec3(0.005, 0, 0), GlobalRegion{}});
    cfg.buoyancy_coeff = 0.05;
    const double m0 = total_mass(state.density);
    double prev_x = testing::center_of_mass(state.density).x();
    for (int s = 0; s < 100; ++s)
    {
        state = step(state, cfg).state;
        const double x = testing::center_of_mass(state.density).x();
        CHECK(x > prev_x);
        prev_x = x;
    }
    const double drift = std::abs(total_mass(state.density) - m0) / m0;
    MESSAGE("mass drift " << drift);
    CHECK(drift <= 0.02);
}

TEST_CASE("step: obstacle faces are exactly zero after every step")
{
    QuietLogs quiet;
    const GridSpec spec = cube_grid(24, 0, 24);
    SimState state = testing::blob_state(spec, Vec3(12, 6, 12), 2.5);
    SimConfig cfg;
    cfg.buoyancy_coeff = 2.0;
    cfg.dt = 0.1;
    cfg.obstacles.push_back({Vec3(12, 14, 12), 3.0});
    const SolidMask solids = build_solids(spec, cfg.obstacles);
    for (int s = 0; s < 30; ++s)
    {
        state = step(state, cfg).state;
        double m = 0.0;
        for (int a = 0; a < 3; ++a)
            for (std::size_t i = 0; i < solids.faces[a].size(); ++i)
                if (solids.faces[a][i])
                    m = std::max(m, std::abs(state.velocity.component(a)[i]));
        CHECK(m == 0.0);
    }
}

TEST_CASE("step is bitwise deterministic across thread counts")
{
    QuietLogs quiet;
    const GridSpec spec = cube_grid(20, 0, 20);
    SimConfig cfg;
    cfg.buoyancy_coeff = 1.0;
    cfg.dt = 0.1;
    cfg.obstacles.push_back({Vec3(9, 13, 10), 3.0});
    cfg.wind.push_back({Vec3(0.3, 0, 0), SphereRegion{Vec3(10, 10, 10), 5.0}});
    const auto run = [&](std::size_t threads) {
        parallel::set_thread_count(threads);
        SimState s = testing::blob_state(spec, Vec3(10, 6, 10), 2.0);
        for (int i = 0; i < 15; ++i)
            s = step(s, cfg).state;
        return s;
    };
    const SimState a = run(1);
    const SimState b = run(3);
    const SimState c = run(1);
    parallel::set_thread_count(0);
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("advect_particles")
{
    const GridSpec spec = cube_grid(10, 0, 10);
    std::mt19937 rng(8);
    std::vector<asset::VisualParticle> ps;
    for (int i = 0; i < 20; ++i)
        ps.push_back(testing::random_visual(rng, Vec3::Constant(2), Vec3::Constant(8)));

    const auto still = advect_particles(ps, StaggeredVectorGrid(spec), 0.5);
    CHECK(still == ps);

    const Vec3 u0(0.5, -0.25, 1.0);
    const auto moved = advect_particles(ps, testing::uniform_velocity(spec, u0), 0.5);
    for (std::size_t i = 0; i < ps.size(); ++i)
    {
        const Vec3 expect = ps[i].position.cast<double>() + 0.5 * u0;
        CHECK((moved[i].position.cast<double>() - expect).norm() < 1e-6); // f32 storage
        CHECK(moved[i].opacity == ps[i].opacity);
        CHECK(moved[i].scale == ps[i].scale);
        CHECK(moved[i].rotation == ps[i].rotation);
    }

    // Outside the box there is no velocity.
    auto outside = ps;
    outside[0].position = Eigen::Vector3f(20, 20, 20);
    const auto o = advect_particles(outside, testing::uniform_velocity(spec, u0), 0.5);
    CHECK(o[0].position == outside[0].position);
}

TEST_CASE("advect_particles: rigid rotation returns to start with second-order error")
{
    const GridSpec spec = cube_grid(16, -4, 4);
    const double omega = 1.0;
    StaggeredVectorGrid v(spec);
    for (int a = 0; a < 2; ++a)
    {
        const Lattice &l = v.lattice(a);
        for (int k = 0; k < l.dims[2]; ++k)
            for (int j = 0; j < l.dims[1]; ++j)
                for (int i = 0; i < l.dims[0]; ++i)
                {
                    const Vec3 x = lattice_world(spec, l, i, j, k);
                    v.at(a, i, j, k) = a == 0 ? -omega * x.y() : omega * x.x();
                }
    }
    asset::VisualParticle p;
    p.position = Eigen::Vector3f(2.0f, 0.0f, 0.5f);
    const auto revolution_error = [&](int n) {
        const double dt = 2.0 * M_PI / (omega * n);
        // Integrate in double precision through repeated single-particle
        // advection, re-reading the f32 position each step.
        Vec3 x = p.position.cast<double>();
        for (int s = 0; s < n; ++s)
        {
            const Vec3 mid = x + 0.5 * dt * v.sample(x);
            x = x + dt * v.sample(mid);
        }
        std::vector<asset::VisualParticle> one{p};
        for (int s = 0; s < n; ++s)
            one = advect_particles(one, v, dt);
        CHECK((one[0].position.cast<double>() - x).norm() < 1e-4);
        return (x - p.position.cast<double>()).norm();
    };
    const double e1 = revolution_error(100);
    const double e2 = revolution_error(200);
    MESSAGE("revolution errors " << e1 << " " << e2);
    CHECK(e1 < 0.01);
    CHECK(e1 / e2 > 3.5);
    CHECK(e1 / e2 < 4.5);
}

TEST_CASE("init_from_asset")
{
    asset::SmokeAsset a;
    asset::AssetFrame f;
    asset::VisualParticle vp;
    vp.position = Eigen::Vector3f(1, 2, 3);
    vp.scale = Eigen::Vector3f::Constant(0.5f);
    vp.opacity = 0.9f;
    f.visual.push_back(vp);
    a.frames.push_back(f);

    SimConfig cfg;
    cfg.resolution = {9, 9, 9};
    const SimState s = init_from_asset(a, 1, cfg);
    CHECK(s.density.spec() == s.velocity.spec());
    CHECK(s.density.spec().bbox.center().isApprox(Vec3(1, 2, 3)));
    CHECK(s.density.at(4, 4, 4) == s.density.max_value());
    CHECK(s.density.at(4, 4, 4) == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(s.velocity.max_abs() == 0.0);

    CHECK_THROWS_AS((void)init_from_asset(a, 2, cfg), ArgumentError);
    CHECK_THROWS_AS((void)init_from_asset(a, 0, cfg), ArgumentError);
    asset::SmokeAsset empty;
    empty.frames.resize(1);
    CHECK_THROWS_AS((void)init_from_asset(empty, 1, cfg), ArgumentError);
}

TEST_CASE("init_from_asset splats physical velocities on the visual box")
{
    std::mt19937 rng(41);
    auto a = testing::random_asset(rng, 2, 30, 30);
    SimConfig cfg;
    cfg.resolution = {12, 10, 8};
    const SimState s = init_from_asset(a, 2, cfg);
    const Box box = splat::restrict_bbox(a.frame(2).visual, cfg.padding_sigmas);
    CHECK(s.velocity.spec().bbox == box);
    CHECK(s.velocity.max_abs() > 0.0);
    CHECK(s.density.max_value() > 0.0);
}

TEST_CASE("config validation")
{
    SimConfig cfg;
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = SimConfig{};
    cfg.projection_tol = -1;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = SimConfig{};
    cfg.obstacles.push_back({Vec3::Zero(), -2});
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    CHECK_NOTHROW(SimConfig{}.validate());
}
