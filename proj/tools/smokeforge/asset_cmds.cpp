#include "common.hpp"

#include "smokeforge/asset.hpp"
#include "smokeforge/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace smokeforge::cli
{
    namespace
    {
        using Points = std::vector<Eigen::Vector3d>;

        bool has_ext(const std::filesystem::path &p, const char *ext) { return p.extension() == ext; }

        Points read_points(const std::filesystem::path &path, std::size_t frame)
        {
            Points pts;
            if (has_ext(path, ".wsa"))
            {
                const asset::SmokeAsset a = asset::load_asset(path);
                for (const auto &v : a.frame(frame).visual)
                    pts.push_back(v.position.cast<double>());
                return pts;
            }
            std::ifstream in(path);
            if (!in)
                throw IoError(fmt::format("cannot open {}", path.string()));
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line))
            {
                ++line_no;
                const auto hash = line.find('#');
                if (hash != std::string::npos)
                    line.resize(hash);
                std::istringstream ss(line);
                double x, y, z;
                if (!(ss >> x))
                    continue;
                if (!(ss >> y >> z) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
                    throw FormatError(fmt::format("{}:{}: expected three numbers", path.string(), line_no));
                pts.emplace_back(x, y, z);
            }
            return pts;
        }

        void write_points(const std::filesystem::path &path, const Points &pts)
        {
            std::ofstream out(path);
            if (!out)
                throw IoError(fmt::format("cannot write {}", path.string()));
            for (const auto &p : pts)
                out << fmt::format("{:.9g} {:.9g} {:.9g}\n", p.x(), p.y(), p.z());
        }

        // Rising plume: particles in a cone above the origin, moving up with
        // a little swirl, advected frame to frame.
        asset::SmokeAsset synth_plume(std::size_t frames, std::size_t count, double fps, unsigned seed)
        {
            std::mt19937 rng(seed);
            std::normal_distribution<double> n(0.0, 1.0);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            std::vector<Eigen::Vector3d> pos(count), vel(count);
            for (std::size_t i = 0; i < count; ++i)
            {
                const double h = u(rng);
                const double spread = 0.15 + 0.35 * h;
                pos[i] = Eigen::Vector3d(spread * n(rng), 2.0 * h, spread * n(rng));
                vel[i] = Eigen::Vector3d(-0.3 * pos[i].z(), 0.6 + 0.2 * u(rng), 0.3 * pos[i].x());
            }
            asset::SmokeAsset a;
            a.fps = fps;
            const double dt = 1.0 / fps;
            for (std::size_t t = 0; t < frames; ++t)
            {
                asset::AssetFrame f;
                for (std::size_t i = 0; i < count; ++i)
                {
                    asset::VisualParticle v;
                    v.position = pos[i].cast<float>();
                    v.color = 0.9f;
                    v.scale = Eigen::Vector3f::Constant(0.08f + 0.04f * static_cast<float>(pos[i].y() / 2.0));
                    v.opacity = 0.6f;
                    f.visual.push_back(v);
                    asset::PhysicalParticle p;
                    p.position = pos[i].cast<float>();
                    p.velocity = vel[i].cast<float>();
                    f.physical.push_back(p);
                    pos[i] += dt * vel[i];
                }
                a.frames.push_back(std::move(f));
            }
            return a;
        }
        struct AssetArgs
        {
            std::string in, out;
            double cell = 0;
            std::size_t target_min = 0, target_max = 0, frame = 1;
            bool flip = false;
            float scale = 0.05f, opacity = 0.5f, color = 1.0f;
            std::size_t frames = 4, particles = 400;
            double fps = asset::kDefaultFps;
            unsigned seed = 1;
        };
    } // namespace

    void add_asset_commands(CLI::App &app)
    {
        auto *asset_cmd = app.add_subcommand("asset", "Inspect, downsample or synthesize WSA assets");
        asset_cmd->require_subcommand(1);

        auto *validate = asset_cmd->add_subcommand("validate", "Load an asset and check every invariant");
        auto va = std::make_shared<AssetArgs>();
        validate->add_option("path", va->in, "WSA file")->required();
        validate->callback([va] {
            const asset::SmokeAsset a = asset::load_asset(va->in);
            asset::validate(a);
            json frames = json::array();
            for (const auto &f : a.frames)
                frames.push_back({{"visual", f.visual.size()}, {"physical", f.physical.size()}});
            print_json({{"valid", true}, {"frames", a.frame_count()}, {"fps", a.fps}, {"counts", frames}});
        });

        auto *down = asset_cmd->add_subcommand(
            "downsample", "Voxel-merge a point cloud (.xyz text or the visual particles of a .wsa frame)");
        auto da = std::make_shared<AssetArgs>();
        down->add_option("in", da->in, "Input .xyz or .wsa")->required();
        down->add_option("out", da->out, "Output .xyz or .wsa")->required();
        auto *cell_opt = down->add_option("--cell", da->cell, "Voxel edge length");
        auto *min_opt = down->add_option("--target-min", da->target_min, "Search a cell size giving at least this many points");
        down->add_option("--target-max", da->target_max, "... and at most this many")->needs(min_opt);
        min_opt->excludes(cell_opt);
        down->add_option("--frame", da->frame, "Frame of a .wsa input (1-based)");
        down->add_flag("--flip", da->flip, "Apply the (x,-y,-z) axis flip after merging");
        down->add_option("--scale", da->scale, "Visual scale of particles in a .wsa output");
        down->add_option("--opacity", da->opacity, "Opacity of particles in a .wsa output");
        down->add_option("--color", da->color, "Grayscale color of particles in a .wsa output");
        down->callback([da] {
            const Points pts = read_points(da->in, da->frame);
            Points out;
            double used_cell = da->cell;
            if (da->target_min > 0)
            {
                const std::size_t hi = da->target_max ? da->target_max : da->target_min;
                const auto r = asset::downsample_to_count(pts, da->target_min, hi);
                if (!r)
                    throw ArgumentError(
                        fmt::format("no cell size gives between {} and {} points from {} inputs", da->target_min, hi, pts.size()));
                out = r->points;
                used_cell = r->cell;
            }
            else
            {
                if (!(da->cell > 0))
                    throw ArgumentError("give --cell > 0 or --target-min");
                out = asset::voxel_downsample(pts, da->cell);
            }
            if (da->flip)
                out = asset::apply_axis_flip(out);
            if (has_ext(da->out, ".wsa"))
                asset::save_asset(asset::asset_from_points(out, da->scale, da->opacity, da->color), da->out);
            else
                write_points(da->out, out);
            print_json({{"input", pts.size()}, {"output", out.size()}, {"cell", used_cell}});
        });

        auto *synth = asset_cmd->add_subcommand("synth", "Write a small synthetic rising-plume asset");
        auto sa = std::make_shared<AssetArgs>();
        synth->add_option("out", sa->out, "Output .wsa")->required();
        synth->add_option("--frames", sa->frames, "Frame count")->check(CLI::Range(1, 100000));
        synth->add_option("--particles", sa->particles, "Particles per frame")->check(CLI::Range(1, 10000000));
        synth->add_option("--fps", sa->fps, "Frame rate")->check(CLI::PositiveNumber);
        synth->add_option("--seed", sa->seed, "Random seed");
        synth->callback([sa] {
            const asset::SmokeAsset a = synth_plume(sa->frames, sa->particles, sa->fps, sa->seed);
            asset::validate(a);
            asset::save_asset(a, sa->out);
            print_json({{"frames", a.frame_count()}, {"particles", sa->particles}});
        });
    }
} // namespace smokeforge::cli
