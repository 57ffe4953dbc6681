#pragma once

#include "smokeforge/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

// Grid dumps: one JSON header line
//   {"magic":"WSG1","res":[nx,ny,nz],"bbox_min":[..],"bbox_max":[..],
//    "step":n,"clock":c,"velocity":true|false}
// followed by little-endian f32 arrays: density (nx*ny*nz, x fastest), then
// u, v, w in MAC layout when "velocity" is true.
namespace smokeforge::grid_io
{
    struct GridDump
    {
        ScalarGrid density;
        std::optional<StaggeredVectorGrid> velocity;
        std::uint64_t step = 0;
        double clock = 0.0;
    };

    void save_grids(const std::filesystem::path &path, const GridDump &dump);
    GridDump load_grids(const std::filesystem::path &path);
} // namespace smokeforge::grid_io
