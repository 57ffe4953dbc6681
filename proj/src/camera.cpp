#include "smokeforge/camera.hpp"

#include "smokeforge/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace smokeforge::camera
{
    namespace
    {
        constexpr double kDeg = std::numbers::pi / 180.0;
        // Looser bound for poses read from files, which are snapped back
        // onto SO(3).
        constexpr double kLoadTolerance = 1e-6;

        double orthonormality_error(const Mat3 &r) { return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(); }

        Mat3 nearest_rotation(const Mat3 &m)
        {
            const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
            Mat3 d = Mat3::Identity();
            d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
            return svd.matrixU() * d * svd.matrixV().transpose();
        }
    } // namespace

    std::string convention_name(Convention c) { return c == Convention::Source ? "source" : "splat"; }

    Convention parse_convention(const std::string &name)
    {
        if (name == "source")
            return Convention::Source;
        if (name == "splat")
            return Convention::Splat;
        throw ArgumentError("unknown pose convention '" + name + "' (expected source|splat)");
    }

    void CameraPose::validate(double tol) const
    {
        if (!rotation.allFinite() || !translation.allFinite())
        {
            throw ArgumentError("pose has non-finite entries");
        }
        if (orthonormality_error(rotation) > tol)
        {
            throw ArgumentError("pose rotation is not orthonormal");
        }
        if (std::abs(rotation.determinant() - 1.0) > tol)
        {
            throw ArgumentError("pose rotation has determinant != +1");
        }
    }

    void Intrinsics::validate() const
    {
        if (width <= 0 || height <= 0)
        {
            throw ArgumentError("image size must be positive");
        }
        if (!(focal > 0.0) || !std::isfinite(focal))
        {
            throw ArgumentError("focal length must be positive");
        }
        if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height))
        {
            throw ArgumentError("principal point must lie inside the image");
        }
    }

    Intrinsics Intrinsics::from_fov(int width, int height, double fov_x_deg)
    {
        if (!(fov_x_deg > 0.0 && fov_x_deg < 180.0))
        {
            throw ArgumentError("field of view must lie in (0, 180) degrees");
        }
        Intrinsics k;
        k.width = width;
        k.height = height;
        k.focal = 0.5 * width / std::tan(0.5 * fov_x_deg * kDeg);
        k.cx = 0.5 * width;
        k.cy = 0.5 * height;
        k.validate();
        return k;
    }

    CameraPose convert_convention(const CameraPose &pose, Convention from)
    {
        if (pose.convention != from)
        {
            throw ArgumentError("pose is tagged '" + convention_name(pose.convention) + "', expected '" +
                                convention_name(from) + "'");
        }
        const Eigen::DiagonalMatrix<double, 3> f(1.0, -1.0, -1.0);
        CameraPose out;
        out.rotation = f * pose.rotation;
        out.translation = f * pose.translation;
        out.convention = from == Convention::Source ? Convention::Splat : Convention::Source;
        return out;
    }

    double relative_rotation_angle(const CameraPose &a, const CameraPose &b)
    {
        if (a.convention != b.convention)
        {
            throw ArgumentError("relative rotation angle needs poses in the same convention");
        }
        const Mat3 r = b.rotation.transpose() * a.rotation;
        // cos from the trace, sin from the skew part; same angle as the
        // clamped arccos but without its loss of precision near 0 and pi.
        const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
        const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
        const double s = std::min(1.0, 0.5 * axis.norm());
        return std::atan2(s, c);
    }

    Mat3 rotation_y(double angle)
    {
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        Mat3 r;
        r << c, 0, s, 0, 1, 0, -s, 0, c;
        return r;
    }

    Mat3 rotation_x(double angle)
    {
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        Mat3 r;
        r << 1, 0, 0, 0, c, -s, 0, s, c;
        return r;
    }

    Mat3 axis_angle(const Vec3 &axis, double angle)
    {
        if (!(axis.norm() > 0.0))
        {
            throw ArgumentError("rotation axis must be non-zero");
        }
        return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
    }

    CameraPose offset_pose_about_pivot(const CameraPose &base, double yaw, double pitch, const Vec3 &pivot)
    {
        if (yaw == 0.0 && pitch == 0.0)
        {
            return base;
        }
        const Mat3 dr = rotation_y(yaw) * rotation_x(pitch);
        CameraPose out = base;
        out.rotation = dr * base.rotation;
        out.translation = dr * (base.translation - pivot) + pivot;
        return out;
    }

    std::vector<CameraPose> multiview_pose_set(const CameraPose &base, const Vec3 &pivot)
    {
        std::vector<CameraPose> out;
        out.reserve(kMultiviewYawDegrees.size());
        for (double yaw : kMultiviewYawDegrees)
            out.push_back(offset_pose_about_pivot(base, yaw * kDeg, 0.0, pivot));
        return out;
    }

    void TrajectorySpec::validate() const
    {
        if (frames < 2)
        {
            throw ArgumentError("trajectory needs at least 2 frames");
        }
        if (!(radius > 0.0))
        {
            throw ArgumentError("orbit radius must be positive");
        }
        if (!(std::abs(pitch_deg) < 90.0))
        {
            throw ArgumentError("orbit pitch must lie strictly between -90 and 90 degrees");
        }
    }

    double trajectory_azimuth_deg(const TrajectorySpec &spec, double t)
    {
        return spec.azimuth_start_deg + (spec.azimuth_end_deg - spec.azimuth_start_deg) * t / spec.frames;
    }

    CameraPose orbit_pose(const Vec3 &target, double radius, double azimuth_deg, double pitch_deg)
    {
        const double az = azimuth_deg * kDeg;
        const double el = pitch_deg * kDeg;
        const Vec3 offset(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
        CameraPose pose;
        pose.translation = target + radius * offset;
        // Camera +Z points away from the target.
        const Vec3 z = offset;
        const Vec3 x = Vec3::UnitY().cross(z).normalized();
        const Vec3 y = z.cross(x);
        pose.rotation.col(0) = x;
        pose.rotation.col(1) = y;
        pose.rotation.col(2) = z;
        pose.convention = Convention::Splat;
        return pose;
    }

    CameraPose synthetic_trajectory(const TrajectorySpec &spec, int t)
    {
        spec.validate();
        if (t < 0 || t > spec.frames)
        {
            throw ArgumentError("trajectory frame " + std::to_string(t) + " outside [0, " +
                                std::to_string(spec.frames) + "]");
        }
        return orbit_pose(spec.target, spec.radius, trajectory_azimuth_deg(spec, t), spec.pitch_deg);
    }

    std::array<double, 2> orbit_angles(const CameraPose &pose, const Vec3 &target)
    {
        const Vec3 d = pose.translation - target;
        const double r = d.norm();
        if (!(r > 0.0))
        {
            throw ArgumentError("camera sits on the orbit target");
        }
        return {std::atan2(d.x(), d.z()) / kDeg, std::asin(std::clamp(d.y() / r, -1.0, 1.0)) / kDeg};
    }

    PerturbationPair perturbation_pair(long t, long delta, long T)
    {
        if (T <= 0)
        {
            throw ArgumentError("sequence length must be positive");
        }
        if (t < 0 || t >= T)
        {
            throw ArgumentError("timestep outside [0, T)");
        }
        if (delta < 0)
        {
            throw ArgumentError("perturbation delta must be non-negative");
        }
        PerturbationPair p;
        p.time_index = static_cast<std::size_t>(t);
        p.pose_index = static_cast<std::size_t>((t + delta) % T);
        p.perturbed = delta % T != 0;
        return p;
    }

    int perturbation_delta(double progress)
    {
        if (!(progress >= 0.0 && progress <= 1.0))
        {
            throw ArgumentError("training progress must lie in [0,1]");
        }
        return progress < 0.5 ? 2 : 4;
    }

    CameraPose perturbed_pose(const std::vector<CameraPose> &trajectory, long t, long delta, PerturbationMode mode)
    {
        const PerturbationPair p = perturbation_pair(t, delta, static_cast<long>(trajectory.size()));
        CameraPose out = trajectory[p.pose_index];
        if (mode == PerturbationMode::RotationOnly)
        {
            out.translation = trajectory[p.time_index].translation;
        }
        return out;
    }

    namespace
    {
        PoseRecord record_from_json(const nlohmann::json &j, std::size_t index)
        {
            const std::string where = "pose " + std::to_string(index) + ": ";
            PoseRecord rec;
            try
            {
                const auto r = j.at("R").get<std::vector<double>>();
                const auto t = j.at("t").get<std::vector<double>>();
                if (r.size() != 9 || t.size() != 3)
                {
                    throw FormatError(where + "R needs 9 values and t needs 3");
                }
                for (int row = 0; row < 3; ++row)
                    for (int col = 0; col < 3; ++col)
                        rec.pose.rotation(row, col) = r[3 * row + col];
                rec.pose.translation = Vec3(t[0], t[1], t[2]);
                rec.pose.convention = parse_convention(j.at("convention").get<std::string>());
                if (j.contains("intrinsics"))
                {
                    const auto &k = j.at("intrinsics");
                    Intrinsics in;
                    in.focal = k.at("focal").get<double>();
                    in.cx = k.at("cx").get<double>();
                    in.cy = k.at("cy").get<double>();
                    in.width = k.at("width").get<int>();
                    in.height = k.at("height").get<int>();
                    in.validate();
                    rec.intrinsics = in;
                }
            }
            catch (const nlohmann::json::exception &e)
            {
                throw FormatError(where + e.what());
            }
            catch (const ArgumentError &e)
            {
                throw FormatError(where + e.what());
            }
            try
            {
                rec.pose.validate(kLoadTolerance);
            }
            catch (const ArgumentError &e)
            {
                throw FormatError(where + e.what());
            }
            if (orthonormality_error(rec.pose.rotation) > kRotationTolerance)
            {
                rec.pose.rotation = nearest_rotation(rec.pose.rotation);
            }
            return rec;
        }
    } // namespace

    std::vector<PoseRecord> poses_from_json(const std::string &text)
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("pose file is not valid JSON: ") + e.what());
        }
        if (j.is_object())
        {
            j = nlohmann::json::array({j});
        }
        if (!j.is_array())
        {
            throw FormatError("pose file must hold a JSON list of poses");
        }
        std::vector<PoseRecord> out;
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(record_from_json(j[i], i));
        return out;
    }

    std::string poses_to_json(const std::vector<PoseRecord> &poses)
    {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto &rec : poses)
        {
            nlohmann::ordered_json p;
            std::vector<double> r;
            for (int row = 0; row < 3; ++row)
                for (int col = 0; col < 3; ++col)
                    r.push_back(rec.pose.rotation(row, col));
            p["R"] = r;
            p["t"] = {rec.pose.translation.x(), rec.pose.translation.y(), rec.pose.translation.z()};
            p["convention"] = convention_name(rec.pose.convention);
            if (rec.intrinsics)
            {
                const Intrinsics &k = *rec.intrinsics;
                p["intrinsics"] = {{"focal", k.focal}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
            }
            arr.push_back(p);
        }
        return arr.dump(2);
    }

    std::vector<PoseRecord> load_poses(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw IoError("cannot open '" + path.string() + "'");
        }
        std::stringstream ss;
        ss << in.rdbuf();
        return poses_from_json(ss.str());
    }

    void save_poses(const std::filesystem::path &path, const std::vector<PoseRecord> &poses)
    {
        std::ofstream out(path);
        if (!out)
        {
            throw IoError("cannot open '" + path.string() + "' for writing");
        }
        out << poses_to_json(poses) << '\n';
        if (!out)
        {
            throw IoError("failed writing '" + path.string() + "'");
        }
    }
} // namespace smokeforge::camera
