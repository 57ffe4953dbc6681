#include "common.hpp"

#include "smokeforge/error.hpp"
#include "smokeforge/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace smokeforge::cli
{
    namespace
    {
        std::vector<std::string> split(const std::string &text)
        {
            std::vector<std::string> parts;
            std::stringstream ss(text);
            std::string part;
            while (std::getline(ss, part, ','))
                parts.push_back(part);
            return parts;
        }

        double to_double(const std::string &s)
        {
            std::size_t used = 0;
            double v = 0;
            try
            {
                v = std::stod(s, &used);
            }
            catch (const std::exception &)
            {
                used = 0;
            }
            if (used == 0 || used != s.size())
                throw ArgumentError(fmt::format("'{}' is not a number", s));
            return v;
        }
    } // namespace

    std::vector<double> parse_list(const std::string &text)
    {
        std::vector<double> out;
        for (const auto &p : split(text))
            out.push_back(to_double(p));
        return out;
    }

    Vec3 parse_vec3(const std::string &text)
    {
        const auto v = parse_list(text);
        if (v.size() != 3)
            throw ArgumentError(fmt::format("expected x,y,z but got '{}'", text));
        return Vec3(v[0], v[1], v[2]);
    }

    Index3 parse_res(const std::string &text)
    {
        const auto v = parse_list(text);
        if (v.size() != 1 && v.size() != 3)
            throw ArgumentError(fmt::format("expected n or nx,ny,nz but got '{}'", text));
        Index3 r;
        for (int a = 0; a < 3; ++a)
        {
            const double x = v.size() == 1 ? v[0] : v[a];
            if (x < 1 || x != std::floor(x) || x > 4096)
                throw ArgumentError(fmt::format("bad resolution '{}'", text));
            r[a] = static_cast<int>(x);
        }
        return r;
    }

    void print_json(const json &j) { std::cout << j.dump(2) << std::endl; }
} // namespace smokeforge::cli

int main(int argc, char **argv)
{
    using namespace smokeforge;
    CLI::App app{"smokeforge: particle smoke assets, grid simulation, haze compositing and rendering"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    bool verbose = false;
    app.add_option("--threads", threads, "Worker threads (0 = hardware default)");
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.parse_complete_callback([&] {
        parallel::set_thread_count(threads);
        spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
    });

    cli::add_asset_commands(app);
    cli::add_sim_commands(app);
    cli::add_haze_commands(app);
    cli::add_pose_commands(app);
    cli::add_render_commands(app);
    cli::add_service_commands(app);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        return app.exit(e);
    }
    catch (const Error &e)
    {
        std::fprintf(stderr, "smokeforge: %s\n", e.what());
        return 1;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "smokeforge: internal error: %s\n", e.what());
        return 3;
    }
    return 0;
}
