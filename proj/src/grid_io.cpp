#include "smokeforge/grid_io.hpp"

#include "smokeforge/binary_io.hpp"
#include "smokeforge/error.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace smokeforge::grid_io
{
    namespace
    {
        constexpr const char *kMagic = "WSG1";

        nlohmann::ordered_json vec_json(const Vec3 &v) { return nlohmann::ordered_json::array({v.x(), v.y(), v.z()}); }

        Vec3 json_vec(const nlohmann::json &j, const char *key)
        {
            const auto &a = j.at(key);
            if (!a.is_array() || a.size() != 3)
            {
                throw FormatError(std::string("grid header field '") + key + "' must be a 3-array");
            }
            return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
        }
    } // namespace

    void save_grids(const std::filesystem::path &path, const GridDump &dump)
    {
        const GridSpec &spec = dump.density.spec();
        if (dump.velocity && !(dump.velocity->spec() == spec))
        {
            throw ArgumentError("density and velocity grids must share resolution and bbox");
        }
        std::ofstream out(path, std::ios::binary);
        if (!out)
        {
            throw IoError("cannot open '" + path.string() + "' for writing");
        }
        nlohmann::ordered_json h;
        h["magic"] = kMagic;
        h["res"] = spec.res;
        h["bbox_min"] = vec_json(spec.bbox.min);
        h["bbox_max"] = vec_json(spec.bbox.max);
        h["step"] = dump.step;
        h["clock"] = dump.clock;
        h["velocity"] = dump.velocity.has_value();
        out << h.dump() << '\n';
        binary::write_f32_span(out, dump.density.values());
        if (dump.velocity)
        {
            for (int a = 0; a < 3; ++a)
                binary::write_f32_span(out, dump.velocity->component(a));
        }
        if (!out)
        {
            throw IoError("failed writing '" + path.string() + "'");
        }
    }

    GridDump load_grids(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw IoError("cannot open '" + path.string() + "'");
        }
        std::string line;
        if (!std::getline(in, line))
        {
            throw FormatError("missing grid header");
        }
        nlohmann::json h;
        try
        {
            h = nlohmann::json::parse(line);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("grid header is not valid JSON: ") + e.what());
        }
        GridDump dump;
        GridSpec spec;
        try
        {
            if (h.at("magic") != kMagic)
            {
                throw FormatError("format version mismatch: expected WSG1");
            }
            spec.res = h.at("res").get<Index3>();
            spec.bbox.min = json_vec(h, "bbox_min");
            spec.bbox.max = json_vec(h, "bbox_max");
            dump.step = h.value("step", std::uint64_t{0});
            dump.clock = h.value("clock", 0.0);
            spec.validate();
            const bool has_velocity = h.value("velocity", false);
            std::uintmax_t floats = spec.cell_count();
            if (has_velocity)
            {
                for (int a = 0; a < 3; ++a)
                    floats += face_lattice(spec.res, a).size();
            }
            const std::uintmax_t expected = line.size() + 1 + 4 * floats;
            if (std::filesystem::file_size(path) < expected)
            {
                throw FormatError("truncated grid data");
            }
            dump.density = ScalarGrid(spec);
            binary::read_f32_span(in, dump.density.values(), "density");
            if (has_velocity)
            {
                StaggeredVectorGrid v(spec);
                for (int a = 0; a < 3; ++a)
                    binary::read_f32_span(in, v.component(a), "velocity component");
                dump.velocity = std::move(v);
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("bad grid header: ") + e.what());
        }
        catch (const ArgumentError &e)
        {
            throw FormatError(std::string("bad grid header: ") + e.what());
        }
        if (in.peek() != std::char_traits<char>::eof())
        {
            throw FormatError("trailing bytes after grid data");
        }
        return dump;
    }
} // namespace smokeforge::grid_io
