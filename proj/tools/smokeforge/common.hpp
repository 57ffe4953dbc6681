#pragma once

#include "smokeforge/grid.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <string>

namespace smokeforge::cli
{
    using nlohmann::json;

    // "x,y,z" -> vector; throws ArgumentError.
    Vec3 parse_vec3(const std::string &text);
    // "n" or "nx,ny,nz".
    Index3 parse_res(const std::string &text);
    // Comma-separated doubles.
    std::vector<double> parse_list(const std::string &text);

    void print_json(const json &j);

    void add_asset_commands(CLI::App &app);
    void add_sim_commands(CLI::App &app);
    void add_haze_commands(CLI::App &app);
    void add_pose_commands(CLI::App &app);
    void add_render_commands(CLI::App &app);
    void add_service_commands(CLI::App &app);
} // namespace smokeforge::cli
