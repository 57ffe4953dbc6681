#include "common.hpp"

#include "smokeforge/error.hpp"
#include "smokeforge/haze.hpp"
#include "smokeforge/image.hpp"

#include <fmt/format.h>

#include <fstream>
#include <iostream>

namespace smokeforge::cli
{
    namespace
    {
        struct HazeArgs
        {
            std::string in, bg, smoke, mask, out, fallback, report, a, floor_mask;
            double sigma = 0.0;
            double floor = haze::kDefaultDenomFloor;
            int patch = haze::kDefaultDarkPatch;
            double top = haze::kDefaultTopFraction;
        };

        std::vector<double> light_or_estimate(const HazeArgs &args, const image::Frame &frame)
        {
            if (!args.a.empty())
                return parse_list(args.a);
            return haze::estimate_atmospheric_light(frame, args.patch, args.top);
        }

        void emit_report(const std::string &where, const json &j)
        {
            if (where.empty())
                return;
            if (where == "-")
            {
                print_json(j);
                return;
            }
            std::ofstream out(where);
            if (!out)
                throw IoError(fmt::format("cannot write {}", where));
            out << j.dump(2) << '\n';
        }
    } // namespace

    void add_haze_commands(CLI::App &app)
    {
        auto *haze_cmd = app.add_subcommand("haze", "Haze compositing model and smoke extraction");
        haze_cmd->require_subcommand(1);
        auto args = std::make_shared<HazeArgs>();
        auto *comp = haze_cmd->add_subcommand("composite", "I = I_clean (1 - S) + A S");
        comp->add_option("--bg", args->bg, "Clean background image")->required();
        comp->add_option("--smoke", args->smoke, "Smoke image S in [0,1] (gray or matching channels)")->required();
        comp->add_option("--A", args->a, "Atmospheric light: one value or r,g,b")->required();
        comp->add_option("--smooth", args->sigma, "Gaussian-smooth S first (sigma in pixels)");
        comp->add_option("--out", args->out, "Output image")->required();
        comp->callback([args] {
            const image::Frame bg = image::read_image(args->bg);
            image::Frame smoke = image::read_image(args->smoke);
            if (args->sigma > 0)
                smoke = image::to_frame(haze::smooth_mask(image::to_mask(smoke), args->sigma));
            image::write_image(args->out, haze::composite_haze(bg, smoke, parse_list(args->a)));
        });

        args = std::make_shared<HazeArgs>();
        auto *coarse = haze_cmd->add_subcommand("coarse", "Coarse smoke: smoothed mask times the frame");
        coarse->add_option("--in", args->in, "Frame")->required();
        coarse->add_option("--mask", args->mask, "Binary or soft smoke mask")->required();
        coarse->add_option("--sigma", args->sigma, "Mask smoothing sigma")->default_val(haze::kDefaultMaskSigma);
        coarse->add_option("--out", args->out, "Output image")->required();
        coarse->callback([args] {
            const image::Frame frame = image::read_image(args->in);
            const image::MaskFrame mask = haze::smooth_mask(image::to_mask(image::read_image(args->mask)), args->sigma);
            image::write_image(args->out, haze::extract_coarse(mask, frame));
        });

        args = std::make_shared<HazeArgs>();
        auto *extract = haze_cmd->add_subcommand("extract", "Invert the haze model for the clean smoke S");
        extract->add_option("--in", args->in, "Hazy frame I")->required();
        extract->add_option("--bg", args->bg, "Recovered clean background")->required();
        extract->add_option("--A", args->a, "Atmospheric light; estimated from --in when omitted");
        extract->add_option("--fallback", args->fallback, "Image used where the denominator is under the floor");
        extract->add_option("--floor", args->floor, "Denominator floor")->check(CLI::PositiveNumber);
        extract->add_option("--patch", args->patch, "Dark-channel patch for the A estimate");
        extract->add_option("--out", args->out, "Smoke image")->required();
        extract->add_option("--floor-mask", args->floor_mask, "Write the floor-fallback mask here");
        extract->add_option("--report", args->report, "JSON report path, or - for stdout");
        extract->callback([args] {
            const image::Frame frame = image::read_image(args->in);
            const image::Frame bg = image::read_image(args->bg);
            std::optional<image::Frame> fallback;
            if (!args->fallback.empty())
                fallback = image::read_image(args->fallback);
            const std::vector<double> A = light_or_estimate(*args, frame);
            const haze::Extraction e = haze::extract_clean_smoke(frame, bg, A, fallback, args->floor);
            image::write_image(args->out, e.smoke);
            if (!args->floor_mask.empty())
                image::write_image(args->floor_mask, image::to_frame(e.floor_mask));
            emit_report(args->report, {{"total_pixels", e.report.total_pixels},
                                       {"floor_pixels", e.report.floor_pixels},
                                       {"floor_fraction", e.report.floor_fraction()},
                                       {"denom_floor", args->floor},
                                       {"A", A}});
        });

        args = std::make_shared<HazeArgs>();
        auto *dark = haze_cmd->add_subcommand("darkchannel", "Dark channel and atmospheric light estimate");
        dark->add_option("--in", args->in, "Image")->required();
        dark->add_option("--out", args->out, "Dark channel image");
        dark->add_option("--patch", args->patch, "Patch size (odd)");
        dark->add_option("--top", args->top, "Fraction of brightest dark-channel pixels used for A");
        dark->add_option("--report", args->report, "JSON report path, or - for stdout")->default_val("-");
        dark->callback([args] {
            const image::Frame frame = image::read_image(args->in);
            if (!args->out.empty())
                image::write_image(args->out, image::to_frame(haze::dark_channel(frame, args->patch)));
            emit_report(args->report,
                        {{"A", haze::estimate_atmospheric_light(frame, args->patch, args->top)}, {"patch", args->patch}});
        });
    }
} // namespace smokeforge::cli
