#include "common.hpp"

#include "smokeforge/camera.hpp"
#include "smokeforge/error.hpp"

#include <fmt/format.h>

#include <numbers>

namespace smokeforge::cli
{
    namespace
    {
        constexpr double kDeg = std::numbers::pi / 180.0;

        struct PoseArgs
        {
            std::string in, in_b, out, from = "source", pivot = "0,0,0", target = "0,0,0", mode = "full";
            std::size_t index_a = 0, index_b = 0;
            double yaw = 0, pitch = 0;
            bool multiview = false;
            camera::TrajectorySpec traj;
            long delta = 2;
            int width = 0, height = 0;
            double fov = 40.0;
        };

        const camera::PoseRecord &pick(const std::vector<camera::PoseRecord> &poses, std::size_t i,
                                       const std::string &file)
        {
            if (i >= poses.size())
                throw ArgumentError(fmt::format("{} has {} poses; index {} is out of range", file, poses.size(), i));
            return poses[i];
        }
    } // namespace

    void add_pose_commands(CLI::App &app)
    {
        auto *pose_cmd = app.add_subcommand("pose", "Camera pose conversion, angles, offsets and trajectories");
        pose_cmd->require_subcommand(1);

        auto args = std::make_shared<PoseArgs>();
        auto *convert = pose_cmd->add_subcommand("convert", "Flip poses between source and splat conventions");
        convert->add_option("--in", args->in, "Pose file")->required();
        convert->add_option("--out", args->out, "Output pose file")->required();
        convert->add_option("--from", args->from, "Convention of the input poses (source|splat)");
        convert->callback([args] {
            const camera::Convention from = camera::parse_convention(args->from);
            auto poses = camera::load_poses(args->in);
            for (auto &r : poses)
                r.pose = camera::convert_convention(r.pose, from);
            camera::save_poses(args->out, poses);
            print_json({{"converted", poses.size()}, {"to", camera::convention_name(poses.empty() ? from : poses[0].pose.convention)}});
        });

        args = std::make_shared<PoseArgs>();
        auto *angle = pose_cmd->add_subcommand("angle", "Relative rotation angle between two poses");
        angle->add_option("--a", args->in, "Pose file holding the first pose")->required();
        angle->add_option("--b", args->in_b, "Pose file holding the second pose (defaults to --a)");
        angle->add_option("--index-a", args->index_a, "Index into --a");
        angle->add_option("--index-b", args->index_b, "Index into --b");
        angle->callback([args] {
            const auto pa = camera::load_poses(args->in);
            const std::string b_file = args->in_b.empty() ? args->in : args->in_b;
            const auto pb = args->in_b.empty() ? pa : camera::load_poses(b_file);
            const double rad =
                camera::relative_rotation_angle(pick(pa, args->index_a, args->in).pose, pick(pb, args->index_b, b_file).pose);
            print_json({{"radians", rad}, {"degrees", rad / kDeg}});
        });

        args = std::make_shared<PoseArgs>();
        auto *offset = pose_cmd->add_subcommand("offset", "Rotate a pose about a pivot by yaw and pitch (degrees)");
        offset->add_option("--in", args->in, "Pose file; the first pose is the base")->required();
        offset->add_option("--out", args->out, "Output pose file")->required();
        offset->add_option("--yaw", args->yaw, "Yaw in degrees");
        offset->add_option("--pitch", args->pitch, "Pitch in degrees");
        offset->add_option("--pivot", args->pivot, "Pivot x,y,z");
        offset->add_flag("--multiview", args->multiview, "Write the fixed yaw set instead of a single offset");
        offset->callback([args] {
            const auto poses = camera::load_poses(args->in);
            const camera::PoseRecord &base = pick(poses, 0, args->in);
            const Vec3 pivot = parse_vec3(args->pivot);
            std::vector<camera::PoseRecord> out;
            if (args->multiview)
            {
                for (const auto &p : camera::multiview_pose_set(base.pose, pivot))
                    out.push_back({p, base.intrinsics});
            }
            else
                out.push_back({camera::offset_pose_about_pivot(base.pose, args->yaw * kDeg, args->pitch * kDeg, pivot),
                               base.intrinsics});
            camera::save_poses(args->out, out);
            print_json({{"poses", out.size()}});
        });

        args = std::make_shared<PoseArgs>();
        auto *traj = pose_cmd->add_subcommand("trajectory", "Orbit trajectory for frames 0..T (degrees)");
        traj->add_option("--out", args->out, "Output pose file")->required();
        traj->add_option("--frames", args->traj.frames, "T: the last frame index");
        traj->add_option("--radius", args->traj.radius, "Orbit radius");
        traj->add_option("--pitch", args->traj.pitch_deg, "Elevation in degrees");
        traj->add_option("--start", args->traj.azimuth_start_deg, "Azimuth at frame 0");
        traj->add_option("--end", args->traj.azimuth_end_deg, "Azimuth at frame T");
        traj->add_option("--target", args->target, "Look-at point x,y,z");
        traj->add_option("--width", args->width, "Attach intrinsics of this width");
        traj->add_option("--height", args->height, "... and height");
        traj->add_option("--fov", args->fov, "Horizontal field of view in degrees");
        traj->callback([args] {
            args->traj.target = parse_vec3(args->target);
            args->traj.validate();
            std::optional<camera::Intrinsics> k;
            if (args->width > 0 || args->height > 0)
                k = camera::Intrinsics::from_fov(args->width, args->height, args->fov);
            std::vector<camera::PoseRecord> out;
            for (int t = 0; t <= args->traj.frames; ++t)
                out.push_back({camera::synthetic_trajectory(args->traj, t), k});
            camera::save_poses(args->out, out);
            print_json({{"poses", out.size()}});
        });

        args = std::make_shared<PoseArgs>();
        auto *perturb = pose_cmd->add_subcommand("perturb", "Pair every time t with the pose at (t + delta) mod T");
        perturb->add_option("--in", args->in, "Trajectory pose file")->required();
        perturb->add_option("--out", args->out, "Output pose file")->required();
        perturb->add_option("--delta", args->delta, "Index shift");
        perturb->add_option("--mode", args->mode, "full|rotation");
        perturb->callback([args] {
            const auto poses = camera::load_poses(args->in);
            camera::PerturbationMode mode;
            if (args->mode == "full")
                mode = camera::PerturbationMode::FullPose;
            else if (args->mode == "rotation")
                mode = camera::PerturbationMode::RotationOnly;
            else
                throw ArgumentError(fmt::format("unknown mode '{}' (full|rotation)", args->mode));
            std::vector<camera::CameraPose> trajectory;
            for (const auto &r : poses)
                trajectory.push_back(r.pose);
            std::vector<camera::PoseRecord> out;
            for (std::size_t t = 0; t < poses.size(); ++t)
                out.push_back({camera::perturbed_pose(trajectory, static_cast<long>(t), args->delta, mode),
                               poses[t].intrinsics});
            camera::save_poses(args->out, out);
            print_json({{"poses", out.size()}, {"delta", args->delta}});
        });
    }
} // namespace smokeforge::cli
