#include "common.hpp"

#include "smokeforge/asset.hpp"
#include "smokeforge/error.hpp"
#include "smokeforge/grid_io.hpp"
#include "smokeforge/image.hpp"
#include "smokeforge/render.hpp"
#include "smokeforge/scenario.hpp"
#include "smokeforge/solver.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <optional>

namespace smokeforge::cli
{
    namespace
    {
        struct SplatArgs
        {
            std::string asset;
            std::size_t frame = 1;
            std::string res = "128";
            std::string out;
            double padding = 3.0;
            double truncation = 6.0;
        };

        struct SimulateArgs
        {
            std::string asset;
            std::size_t frame = 1;
            std::uint64_t steps = 100;
            std::string scenario = "none";
            std::string res = "64";
            std::string out;
            double dt = 1.0 / 30.0;
            std::optional<double> buoyancy;
            std::string boundary = "open";
            std::uint64_t every = 1;
            bool slices = false;
            double tol = 1e-4;
        };
    } // namespace

    void add_sim_commands(CLI::App &app)
    {
        auto sa = std::make_shared<SplatArgs>();
        auto *splat_cmd = app.add_subcommand("splat", "Splat one asset frame to density and velocity grids");
        splat_cmd->add_option("--asset", sa->asset, "WSA file")->required();
        splat_cmd->add_option("--frame", sa->frame, "Frame (1-based)");
        splat_cmd->add_option("--res", sa->res, "n or nx,ny,nz");
        splat_cmd->add_option("--out", sa->out, "Grid dump (.wsg)")->required();
        splat_cmd->add_option("--padding", sa->padding, "Box padding in kernel sigmas");
        splat_cmd->add_option("--truncation", sa->truncation, "Kernel cutoff in sigmas");
        splat_cmd->callback([sa] {
            solver::SimConfig cfg;
            cfg.resolution = parse_res(sa->res);
            cfg.padding_sigmas = sa->padding;
            cfg.splat.truncation_sigmas = sa->truncation;
            const asset::SmokeAsset a = asset::load_asset(sa->asset);
            const solver::SimState s = solver::init_from_asset(a, sa->frame, cfg);
            grid_io::save_grids(sa->out, {s.density, s.velocity, 0, 0.0});
            const Box &b = s.density.spec().bbox;
            print_json({{"res", s.density.spec().res},
                        {"bbox_min", {b.min.x(), b.min.y(), b.min.z()}},
                        {"bbox_max", {b.max.x(), b.max.y(), b.max.z()}},
                        {"mass", solver::total_mass(s.density)},
                        {"max_speed", s.velocity.max_abs()}});
        });

        auto ma = std::make_shared<SimulateArgs>();
        auto *sim = app.add_subcommand("simulate", "Run the grid solver and write per-step grid dumps");
        sim->add_option("--asset", ma->asset, "WSA file; without it the built-in reference plume is used");
        sim->add_option("--frame", ma->frame, "Asset frame to start from (1-based)");
        sim->add_option("--steps", ma->steps, "Steps to run")->check(CLI::Range(std::uint64_t{1}, std::uint64_t{10000000}));
        sim->add_option("--scenario", ma->scenario, "none|wind-global|wind-local|obstacle");
        sim->add_option("--res", ma->res, "n or nx,ny,nz");
        sim->add_option("--out", ma->out, "Output directory")->required();
        sim->add_option("--dt", ma->dt, "Time step")->check(CLI::PositiveNumber);
        sim->add_option("--buoyancy", ma->buoyancy, "Buoyancy coefficient (reference plume default 4)");
        sim->add_option("--boundary", ma->boundary, "open|closed");
        sim->add_option("--every", ma->every, "Dump every k-th step")->check(CLI::PositiveNumber);
        sim->add_flag("--slices", ma->slices, "Also write a mid-plane density PNG per dump");
        sim->add_option("--tol", ma->tol, "Projection tolerance on max |div|")->check(CLI::PositiveNumber);
        sim->callback([ma] {
            solver::SimConfig cfg;
            cfg.resolution = parse_res(ma->res);
            cfg.dt = ma->dt;
            cfg.projection_tol = ma->tol;
            if (ma->boundary == "closed")
                cfg.boundary = solver::BoundaryMode::Closed;
            else if (ma->boundary != "open")
                throw ArgumentError(fmt::format("unknown boundary '{}' (open|closed)", ma->boundary));
            const scenario::Scenario preset = scenario::parse_scenario(ma->scenario);

            solver::SimState state;
            if (!ma->asset.empty())
            {
                cfg.buoyancy_coeff = ma->buoyancy.value_or(0.0);
                const asset::SmokeAsset a = asset::load_asset(ma->asset);
                state = solver::init_from_asset(a, ma->frame, cfg);
            }
            else
            {
                cfg.buoyancy_coeff = ma->buoyancy.value_or(scenario::ReferenceScene{}.buoyancy);
                state = scenario::reference_plume(cfg.resolution);
            }
            scenario::apply_scenario(cfg, preset, state.density.spec().bbox);
            cfg.validate();

            const std::filesystem::path out(ma->out);
            std::filesystem::create_directories(out);
            const auto dump = [&](const solver::SimState &s) {
                const std::string stem = fmt::format("step_{:05d}", s.step_index);
                grid_io::save_grids(out / (stem + ".wsg"), {s.density, s.velocity, s.step_index, s.clock});
                if (ma->slices)
                    image::write_image(out / (stem + ".png"),
                                       render::density_slice(s.density, s.density.spec().res[2] / 2));
            };
            dump(state);
            const double mass0 = solver::total_mass(state.density);
            double worst_div = 0.0;
            int unconverged = 0;
            for (std::uint64_t n = 0; n < ma->steps; ++n)
            {
                solver::StepResult r = solver::step(state, cfg);
                state = std::move(r.state);
                worst_div = std::max(worst_div, r.report.projection.max_divergence);
                unconverged += !r.report.projection.converged;
                if (state.step_index % ma->every == 0 || n + 1 == ma->steps)
                    dump(state);
            }
            const double mass1 = solver::total_mass(state.density);
            print_json({{"scenario", scenario::scenario_name(preset)},
                        {"steps", ma->steps},
                        {"res", state.density.spec().res},
                        {"mass_initial", mass0},
                        {"mass_final", mass1},
                        {"mass_drift", mass0 > 0 ? std::abs(mass1 - mass0) / mass0 : 0.0},
                        {"max_divergence", worst_div},
                        {"unconverged_projections", unconverged}});
        });
    }
} // namespace smokeforge::cli
