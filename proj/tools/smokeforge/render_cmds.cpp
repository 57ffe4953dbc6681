#include "common.hpp"

#include "smokeforge/asset.hpp"
#include "smokeforge/camera.hpp"
#include "smokeforge/error.hpp"
#include "smokeforge/grid_io.hpp"
#include "smokeforge/image.hpp"
#include "smokeforge/metrics.hpp"
#include "smokeforge/render.hpp"
#include "smokeforge/solver.hpp"

#include <fmt/format.h>

#include <cmath>

namespace smokeforge::cli
{
    namespace
    {
        struct RenderArgs
        {
            std::string grid, asset, pose, out, alpha, background, res = "64";
            std::size_t frame = 1, pose_index = 0;
            int width = 256, height = 256;
            double fov = 40.0;
            render::RenderSettings settings;
        };

        struct MetricArgs
        {
            std::vector<std::string> files;
        };

        std::vector<std::pair<image::Frame, image::Frame>> load_pairs(const std::vector<std::string> &files)
        {
            if (files.size() < 2 || files.size() % 2 != 0)
                throw ArgumentError("give image pairs: a1 b1 [a2 b2 ...]");
            std::vector<std::pair<image::Frame, image::Frame>> pairs;
            for (std::size_t i = 0; i < files.size(); i += 2)
                pairs.emplace_back(image::read_image(files[i]), image::read_image(files[i + 1]));
            return pairs;
        }
    } // namespace

    void add_render_commands(CLI::App &app)
    {
        auto ra = std::make_shared<RenderArgs>();
        auto *rcmd = app.add_subcommand("render", "Emission-absorption render of a density grid");
        auto *grid_opt = rcmd->add_option("--grid", ra->grid, "Grid dump (.wsg)");
        auto *asset_opt = rcmd->add_option("--asset", ra->asset, "WSA file, splatted first");
        grid_opt->excludes(asset_opt);
        rcmd->add_option("--frame", ra->frame, "Asset frame (1-based)");
        rcmd->add_option("--res", ra->res, "Splat resolution for --asset");
        rcmd->add_option("--pose", ra->pose, "Pose file (splat or source convention); default is a front view");
        rcmd->add_option("--pose-index", ra->pose_index, "Which pose in the file");
        rcmd->add_option("--width", ra->width, "Image width when the pose has no intrinsics");
        rcmd->add_option("--height", ra->height, "Image height when the pose has no intrinsics");
        rcmd->add_option("--fov", ra->fov, "Horizontal field of view in degrees");
        rcmd->add_option("--samples", ra->settings.samples_per_ray, "Samples per ray");
        rcmd->add_option("--absorption", ra->settings.absorption, "Extinction per unit density and length");
        rcmd->add_option("--emission", ra->settings.emission, "Emission per unit density and length");
        rcmd->add_option("--background-level", ra->settings.background, "Constant background radiance");
        rcmd->add_option("--background", ra->background, "Composite onto this image instead");
        rcmd->add_option("--alpha", ra->alpha, "Also write the opacity image");
        rcmd->add_option("--out", ra->out, "Output image")->required();
        rcmd->callback([ra] {
            ScalarGrid density;
            if (!ra->grid.empty())
                density = grid_io::load_grids(ra->grid).density;
            else if (!ra->asset.empty())
            {
                solver::SimConfig cfg;
                cfg.resolution = parse_res(ra->res);
                density = solver::init_from_asset(asset::load_asset(ra->asset), ra->frame, cfg).density;
            }
            else
                throw ArgumentError("give --grid or --asset");

            render::View view = render::front_view(density.spec(), ra->width, ra->height, ra->fov);
            if (!ra->pose.empty())
            {
                const auto poses = camera::load_poses(ra->pose);
                if (ra->pose_index >= poses.size())
                    throw ArgumentError(fmt::format("{} has no pose {}", ra->pose, ra->pose_index));
                const camera::PoseRecord &r = poses[ra->pose_index];
                view.pose = r.pose.convention == camera::Convention::Splat ? r.pose : camera::convert_convention(r.pose);
                view.intrinsics = r.intrinsics.value_or(camera::Intrinsics::from_fov(ra->width, ra->height, ra->fov));
            }
            render::RenderSettings settings = ra->settings;
            if (!ra->background.empty())
                settings.background = 0.0;
            const render::RenderResult r = render::render_density(density, view.pose, view.intrinsics, settings);
            if (!ra->background.empty())
                image::write_image(ra->out,
                                   render::composite_onto_background(r.color, r.alpha, image::read_image(ra->background)));
            else
                image::write_image(ra->out, r.color);
            if (!ra->alpha.empty())
                image::write_image(ra->alpha, r.alpha);
            double mean_alpha = 0;
            for (double a : r.alpha.pixels)
                mean_alpha += a;
            print_json({{"width", r.color.width}, {"height", r.color.height}, {"mean_alpha", mean_alpha / r.alpha.pixels.size()}});
        });

        auto *metrics_cmd = app.add_subcommand("metrics", "Image quality metrics over image pairs");
        metrics_cmd->require_subcommand(1);
        auto pa = std::make_shared<MetricArgs>();
        auto *psnr = metrics_cmd->add_subcommand("psnr", "Mean PSNR over finite frames");
        psnr->add_option("images", pa->files, "a1 b1 [a2 b2 ...]")->required();
        psnr->callback([pa] {
            std::vector<image::Frame> a, b;
            for (auto &[x, y] : load_pairs(pa->files))
            {
                a.push_back(std::move(x));
                b.push_back(std::move(y));
            }
            const metrics::PsnrSummary s = metrics::psnr_sequence(a, b);
            // JSON has no infinity: identical pairs only show up in the count.
            print_json({{"value", s.finite_frames ? json(s.mean) : json(nullptr)},
                        {"infinite_frames", s.infinite_frames}});
        });
        auto sa = std::make_shared<MetricArgs>();
        auto *ssim = metrics_cmd->add_subcommand("ssim", "Mean SSIM over pairs");
        ssim->add_option("images", sa->files, "a1 b1 [a2 b2 ...]")->required();
        ssim->callback([sa] {
            const auto pairs = load_pairs(sa->files);
            double sum = 0;
            for (const auto &[x, y] : pairs)
                sum += metrics::ssim(x, y);
            print_json({{"value", sum / pairs.size()}, {"infinite_frames", 0}});
        });
    }
} // namespace smokeforge::cli
