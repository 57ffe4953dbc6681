#include "common.hpp"

#include "smokeforge/error.hpp"
#include "smokeforge/grid_io.hpp"
#include "smokeforge/image.hpp"
#include "smokeforge/render.hpp"
#include "smokeforge/scenario.hpp"
#include "smokeforge/server.hpp"
#include "smokeforge/service.hpp"

#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>
#include <fmt/format.h>

#include <csignal>
#include <iostream>

namespace smokeforge::cli
{
    namespace
    {
        struct ServeArgs
        {
            std::string asset, res = "64", scenario = "none", log, address = "127.0.0.1";
            std::size_t frame = 1;
            std::optional<std::uint16_t> port;
            double rate = 30.0;
            std::size_t queue = 8;
            std::optional<double> buoyancy;
            bool run = false;
        };

        struct ReplayArgs
        {
            std::string log, asset, out, slice;
        };
    } // namespace

    void add_service_commands(CLI::App &app)
    {
        auto sa = std::make_shared<ServeArgs>();
        auto *serve = app.add_subcommand("serve", "Interactive simulation service over line-delimited JSON on TCP");
        serve->add_option("--asset", sa->asset, "WSA file; without it the reference plume is served");
        serve->add_option("--frame", sa->frame, "Initial asset frame (1-based)");
        serve->add_option("--port", sa->port, "TCP port (default SMOKEFORGE_PORT or 7878; 0 picks one)");
        serve->add_option("--address", sa->address, "Listen address");
        serve->add_option("--res", sa->res, "Grid resolution");
        serve->add_option("--scenario", sa->scenario, "Initial preset: none|wind-global|wind-local|obstacle");
        serve->add_option("--buoyancy", sa->buoyancy, "Buoyancy coefficient");
        serve->add_option("--rate", sa->rate, "Steps per second while running")->check(CLI::PositiveNumber);
        serve->add_option("--queue", sa->queue, "Frames buffered per slow client before dropping")->check(CLI::PositiveNumber);
        serve->add_option("--log", sa->log, "Write the JSONL command log here");
        serve->add_flag("--run", sa->run, "Start running instead of paused");
        serve->callback([sa] {
            solver::SimConfig cfg;
            cfg.resolution = parse_res(sa->res);
            service::SessionSource source;
            source.frame = sa->frame;
            if (!sa->asset.empty())
            {
                source.asset = std::make_shared<asset::SmokeAsset>(asset::load_asset(sa->asset));
                source.asset_path = std::filesystem::absolute(sa->asset).string();
                cfg.buoyancy_coeff = sa->buoyancy.value_or(0.0);
            }
            else
                cfg.buoyancy_coeff = sa->buoyancy.value_or(scenario::ReferenceScene{}.buoyancy);
            const Box bbox = source.asset ? solver::grid_for_frame(source.asset->frame(sa->frame), cfg).bbox
                                          : scenario::reference_box();
            scenario::apply_scenario(cfg, scenario::parse_scenario(sa->scenario), bbox);

            service::Session session(source, cfg);
            if (sa->run)
                session.apply(service::Resume{});
            service::ServerOptions opts;
            opts.address = sa->address;
            opts.port = sa->port.value_or(service::default_port());
            opts.step_rate = sa->rate;
            opts.frame_queue = sa->queue;
            if (!sa->log.empty())
                opts.log_path = sa->log;
            service::Server server(std::move(session), opts);
            const std::uint16_t port = server.start();
            std::cout << json{{"listening", sa->address}, {"port", port}}.dump() << std::endl;

            boost::asio::io_context io;
            boost::asio::signal_set signals(io, SIGINT, SIGTERM);
            signals.async_wait([](const boost::system::error_code &, int) {});
            io.run();
            server.stop();
            const service::ServerStats s = server.stats();
            std::cout << json{{"frames_published", s.frames_published},
                              {"frames_dropped", s.frames_dropped},
                              {"commands_applied", s.commands_applied},
                              {"commands_rejected", s.commands_rejected}}
                             .dump()
                      << std::endl;
        });

        auto ra = std::make_shared<ReplayArgs>();
        auto *replay = app.add_subcommand("replay", "Re-run a session from its JSONL command log");
        replay->add_option("log", ra->log, "Command log")->required();
        replay->add_option("--asset", ra->asset, "Use this asset instead of the path recorded in the log");
        replay->add_option("--out", ra->out, "Write the final grids (.wsg)");
        replay->add_option("--slice", ra->slice, "Write the final mid-plane density slice image");
        replay->callback([ra] {
            const service::ReplayLog log = service::read_log(ra->log);
            std::shared_ptr<const asset::SmokeAsset> a;
            const std::string path = ra->asset.empty() ? log.asset_path : ra->asset;
            if (!path.empty())
                a = std::make_shared<asset::SmokeAsset>(asset::load_asset(path));
            service::ReplayLog adjusted = log;
            adjusted.asset_path = path;
            const service::Session s = service::replay(adjusted, a);
            const solver::SimState &st = s.state();
            if (!ra->out.empty())
                grid_io::save_grids(ra->out, {st.density, st.velocity, st.step_index, st.clock});
            if (!ra->slice.empty())
                image::write_image(ra->slice, render::density_slice(st.density, st.density.spec().res[2] / 2));
            print_json({{"commands", log.entries.size()},
                        {"steps_taken", s.steps_taken()},
                        {"step_index", st.step_index},
                        {"clock", st.clock},
                        {"total_mass", solver::total_mass(st.density)}});
        });
    }
} // namespace smokeforge::cli
