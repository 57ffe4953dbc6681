#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Pose algebra: convention conversion, pivot offsets, relative rotation
// angle, orbit trajectories and pose perturbation pairing.
namespace smokeforge::camera
{
    using Mat3 = Eigen::Matrix3d;
    using Vec3 = Eigen::Vector3d;

    // Source: the pose estimator's camera axes. Splat: the renderer's,
    // which looks along -Z with +Y up. They differ by negating y and z.
    enum class Convention
    {
        Source,
        Splat,
    };

    std::string convention_name(Convention c);
    Convention parse_convention(const std::string &name);

    constexpr double kRotationTolerance = 1e-9;

    // Camera-to-world rigid transform.
    struct CameraPose
    {
        Mat3 rotation = Mat3::Identity();
        Vec3 translation = Vec3::Zero();
        Convention convention = Convention::Splat;

        // Camera center in world space.
        Vec3 position() const { return translation; }
        // Throws ArgumentError unless R^T R = I and det R = 1 within tol.
        void validate(double tol = kRotationTolerance) const;
        bool operator==(const CameraPose &o) const
        {
            return rotation == o.rotation && translation == o.translation && convention == o.convention;
        }
    };

    struct Intrinsics
    {
        double focal = 1.0; // pixels
        double cx = 0.5;
        double cy = 0.5;
        int width = 1;
        int height = 1;

        void validate() const;
        // Pinhole focal length giving the horizontal field of view.
        static Intrinsics from_fov(int width, int height, double fov_x_deg);
    };

    // C' = F C with F = diag(1,-1,-1,1). The pose must carry the `from`
    // tag; the result carries the other one.
    CameraPose convert_convention(const CameraPose &pose, Convention from = Convention::Source);

    // arccos((tr(Rb^T Ra) - 1) / 2), evaluated stably; radians in [0, pi].
    double relative_rotation_angle(const CameraPose &a, const CameraPose &b);

    Mat3 rotation_y(double angle);
    Mat3 rotation_x(double angle);
    Mat3 axis_angle(const Vec3 &axis, double angle);

    // R = dR R0, t = dR (t0 - c) + c with dR = Ry(yaw) Rx(pitch).
    CameraPose offset_pose_about_pivot(const CameraPose &base, double yaw, double pitch, const Vec3 &pivot);

    inline constexpr std::array<double, 4> kMultiviewYawDegrees{-10.0, 10.0, 20.0, 30.0};

    // One pose per kMultiviewYawDegrees entry, zero pitch.
    std::vector<CameraPose> multiview_pose_set(const CameraPose &base, const Vec3 &pivot);

    struct TrajectorySpec
    {
        double pitch_deg = 10.0;
        double azimuth_start_deg = -105.0;
        double azimuth_end_deg = -45.0;
        int frames = 270; // T'; frame indices run 0..T'
        double radius = 5.0;
        Vec3 target = Vec3::Zero();

        void validate() const;
    };

    double trajectory_azimuth_deg(const TrajectorySpec &spec, double t);

    // Camera at distance `radius` from the target at the given azimuth
    // (about +Y, measured from +Z towards +X) and pitch (above the XZ
    // plane), looking at the target with +Y up. Splat convention.
    CameraPose orbit_pose(const Vec3 &target, double radius, double azimuth_deg, double pitch_deg);
    CameraPose synthetic_trajectory(const TrajectorySpec &spec, int t);

    // Inverse of orbit_pose for the camera position: {azimuth, pitch} in
    // degrees.
    std::array<double, 2> orbit_angles(const CameraPose &pose, const Vec3 &target);

    struct PerturbationPair
    {
        std::size_t pose_index = 0; // (t + delta) mod T
        std::size_t time_index = 0; // t
        bool perturbed = false;     // false when delta % T == 0
    };

    PerturbationPair perturbation_pair(long t, long delta, long T);

    // delta = 2 for progress < 0.5, else 4.
    int perturbation_delta(double progress);

    enum class PerturbationMode
    {
        FullPose,     // rotation and translation from the shifted frame
        RotationOnly, // shifted rotation, original translation
    };

    CameraPose perturbed_pose(const std::vector<CameraPose> &trajectory, long t, long delta,
                              PerturbationMode mode = PerturbationMode::FullPose);

    // Pose files: JSON list of {"R": 9 floats row-major, "t": 3 floats,
    // "convention": "source"|"splat"}, with optional "intrinsics":
    // {"focal","cx","cy","width","height"}.
    struct PoseRecord
    {
        CameraPose pose;
        std::optional<Intrinsics> intrinsics;
    };

    std::vector<PoseRecord> load_poses(const std::filesystem::path &path);
    void save_poses(const std::filesystem::path &path, const std::vector<PoseRecord> &poses);
    std::string poses_to_json(const std::vector<PoseRecord> &poses);
    std::vector<PoseRecord> poses_from_json(const std::string &text);
} // namespace smokeforge::camera
