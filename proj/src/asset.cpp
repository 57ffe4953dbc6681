#include "smokeforge/asset.hpp"

#include "smokeforge/binary_io.hpp"
#include "smokeforge/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace smokeforge::asset
{
    namespace
    {
        constexpr const char *kMagic = "WSA1";
        constexpr std::size_t kVisualFloats = 12;
        constexpr std::size_t kPhysicalFloats = 6;

        std::string where(std::size_t frame, const char *kind, std::size_t particle)
        {
            std::ostringstream os;
            os << "frame " << frame << ", " << kind << " particle " << particle;
            return os.str();
        }

        template <typename Derived>
        bool all_finite(const Eigen::MatrixBase<Derived> &v)
        {
            return v.allFinite();
        }

        void check_visual(const VisualParticle &p, std::size_t frame, std::size_t index)
        {
            const auto at = [&] { return where(frame, "visual", index); };
            if (!all_finite(p.position) || !std::isfinite(p.color) || !all_finite(p.scale) ||
                !std::isfinite(p.opacity) || !all_finite(p.rotation))
            {
                throw InvariantError(at() + ": non-finite attribute");
            }
            if ((p.scale.array() <= 0.0f).any())
            {
                throw InvariantError(at() + ": scale must be strictly positive");
            }
            if (p.opacity < 0.0f || p.opacity > 1.0f)
            {
                throw InvariantError(at() + ": opacity outside [0,1]");
            }
            if (p.color < 0.0f || p.color > 1.0f)
            {
                throw InvariantError(at() + ": color outside [0,1]");
            }
            const double norm = p.rotation.cast<double>().norm();
            if (std::abs(norm - 1.0) > kQuaternionNormTolerance)
            {
                throw InvariantError(at() + ": rotation quaternion is not unit length (|r| = " +
                                     std::to_string(norm) + ")");
            }
        }

        void check_physical(const PhysicalParticle &p, std::size_t frame, std::size_t index)
        {
            if (!all_finite(p.position) || !all_finite(p.velocity))
            {
                throw InvariantError(where(frame, "physical", index) + ": non-finite attribute");
            }
        }

        nlohmann::ordered_json header_json(const SmokeAsset &asset)
        {
            nlohmann::ordered_json h;
            h["magic"] = kMagic;
            h["frames"] = asset.frames.size();
            h["fps"] = asset.fps;
            return h;
        }
    } // namespace

    const AssetFrame &SmokeAsset::frame(std::size_t t) const
    {
        if (t < 1 || t > frames.size())
        {
            throw ArgumentError("frame " + std::to_string(t) + " out of range [1, " + std::to_string(frames.size()) +
                                "]");
        }
        return frames[t - 1];
    }

    void validate(const SmokeAsset &asset)
    {
        if (asset.frames.empty())
        {
            throw InvariantError("asset has no frames");
        }
        if (!(asset.fps > 0.0) || !std::isfinite(asset.fps))
        {
            throw InvariantError("asset fps must be positive");
        }
        for (std::size_t t = 0; t < asset.frames.size(); ++t)
        {
            const auto &f = asset.frames[t];
            for (std::size_t i = 0; i < f.visual.size(); ++i)
            {
                check_visual(f.visual[i], t + 1, i);
            }
            for (std::size_t i = 0; i < f.physical.size(); ++i)
            {
                check_physical(f.physical[i], t + 1, i);
            }
        }
    }

    SmokeAsset load_asset(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw IoError("cannot open asset file: " + path.string());
        }
        const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
        std::string header_line;
        if (!std::getline(in, header_line))
        {
            throw FormatError("missing WSA header line");
        }

        nlohmann::json header;
        try
        {
            header = nlohmann::json::parse(header_line);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("WSA header is not valid JSON: ") + e.what());
        }
        if (!header.is_object() || !header.contains("magic") || !header["magic"].is_string())
        {
            throw FormatError("WSA header lacks a magic string");
        }
        if (header["magic"].get<std::string>() != kMagic)
        {
            throw FormatError("format version mismatch: expected " + std::string(kMagic) + ", found " +
                              header["magic"].get<std::string>());
        }
        if (!header.contains("frames") || !header["frames"].is_number_unsigned() || !header.contains("fps") ||
            !header["fps"].is_number())
        {
            throw FormatError("WSA header needs unsigned 'frames' and numeric 'fps'");
        }

        SmokeAsset asset;
        asset.fps = header["fps"].get<double>();
        const auto frame_count = header["frames"].get<std::uint64_t>();
        if (frame_count == 0)
        {
            throw InvariantError("asset has no frames");
        }
        if (frame_count > file_size / 8)
        {
            throw FormatError("truncated file: header declares " + std::to_string(frame_count) + " frames");
        }
        asset.frames.resize(frame_count);

        for (std::size_t t = 0; t < frame_count; ++t)
        {
            const std::string block = "frame block " + std::to_string(t + 1);
            const auto n_vis = binary::read_u32(in, block);
            const auto n_phy = binary::read_u32(in, block);
            const auto needed = (std::uint64_t{n_vis} * kVisualFloats + std::uint64_t{n_phy} * kPhysicalFloats) * 4;
            const auto pos = static_cast<std::uint64_t>(in.tellg());
            if (pos + needed > file_size)
            {
                throw FormatError("truncated " + block + ": declares " + std::to_string(n_vis) + " visual and " +
                                  std::to_string(n_phy) + " physical particles");
            }
            auto &frame = asset.frames[t];
            frame.visual.resize(n_vis);
            frame.physical.resize(n_phy);

            std::array<float, kVisualFloats> buf{};
            for (auto &p : frame.visual)
            {
                for (auto &v : buf)
                {
                    v = binary::read_f32(in, block);
                }
                p.position = {buf[0], buf[1], buf[2]};
                p.color = buf[3];
                p.scale = {buf[4], buf[5], buf[6]};
                p.opacity = buf[7];
                p.rotation = {buf[8], buf[9], buf[10], buf[11]};
            }
            std::array<float, kPhysicalFloats> pbuf{};
            for (auto &p : frame.physical)
            {
                for (auto &v : pbuf)
                {
                    v = binary::read_f32(in, block);
                }
                p.position = {pbuf[0], pbuf[1], pbuf[2]};
                p.velocity = {pbuf[3], pbuf[4], pbuf[5]};
            }
        }
        if (in.peek() != std::char_traits<char>::eof())
        {
            throw FormatError("trailing bytes after last frame block");
        }

        validate(asset);
        return asset;
    }

    void save_asset(const SmokeAsset &asset, const std::filesystem::path &path)
    {
        validate(asset);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw IoError("cannot write asset file: " + path.string());
        }
        out << header_json(asset).dump() << '\n';
        for (const auto &frame : asset.frames)
        {
            binary::write_u32(out, static_cast<std::uint32_t>(frame.visual.size()));
            binary::write_u32(out, static_cast<std::uint32_t>(frame.physical.size()));
            for (const auto &p : frame.visual)
            {
                for (int a = 0; a < 3; ++a)
                    binary::write_f32(out, p.position[a]);
                binary::write_f32(out, p.color);
                for (int a = 0; a < 3; ++a)
                    binary::write_f32(out, p.scale[a]);
                binary::write_f32(out, p.opacity);
                for (int a = 0; a < 4; ++a)
                    binary::write_f32(out, p.rotation[a]);
            }
            for (const auto &p : frame.physical)
            {
                for (int a = 0; a < 3; ++a)
                    binary::write_f32(out, p.position[a]);
                for (int a = 0; a < 3; ++a)
                    binary::write_f32(out, p.velocity[a]);
            }
        }
        if (!out)
        {
            throw IoError("write failed: " + path.string());
        }
    }

    std::vector<Eigen::Vector3d> voxel_downsample(const std::vector<Eigen::Vector3d> &points, double cell)
    {
        if (!(cell > 0.0) || !std::isfinite(cell))
        {
            throw ArgumentError("voxel cell size must be positive");
        }
        struct Accum
        {
            Eigen::Vector3d sum = Eigen::Vector3d::Zero();
            std::size_t count = 0;
        };
        // std::map keeps voxels in lexicographic (x, y, z) order.
        std::map<std::array<std::int64_t, 3>, Accum> voxels;
        for (const auto &p : points)
        {
            const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                                  static_cast<std::int64_t>(std::floor(p.y() / cell)),
                                                  static_cast<std::int64_t>(std::floor(p.z() / cell))};
            auto &acc = voxels[key];
            acc.sum += p;
            ++acc.count;
        }
        std::vector<Eigen::Vector3d> out;
        out.reserve(voxels.size());
        for (const auto &[key, acc] : voxels)
        {
            out.push_back(acc.sum / static_cast<double>(acc.count));
        }
        return out;
    }

    std::optional<DownsampleResult> downsample_to_count(const std::vector<Eigen::Vector3d> &points,
                                                        std::size_t min_count, std::size_t max_count,
                                                        int max_iterations)
    {
        if (min_count > max_count || points.empty())
        {
            return std::nullopt;
        }
        Eigen::Vector3d lo = points.front();
        Eigen::Vector3d hi = points.front();
        for (const auto &p : points)
        {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double span = std::max((hi - lo).maxCoeff(), 1e-12);

        // Small cells keep many points, large cells few.
        double log_small = std::log(span * 1e-6);
        double log_large = std::log(span * 4.0);
        for (int it = 0; it < max_iterations; ++it)
        {
            const double log_mid = 0.5 * (log_small + log_large);
            const double cell = std::exp(log_mid);
            auto out = voxel_downsample(points, cell);
            if (out.size() >= min_count && out.size() <= max_count)
            {
                return DownsampleResult{std::move(out), cell};
            }
            if (out.size() > max_count)
            {
                log_small = log_mid;
            }
            else
            {
                log_large = log_mid;
            }
        }
        return std::nullopt;
    }

    std::vector<Eigen::Vector3d> apply_axis_flip(const std::vector<Eigen::Vector3d> &points)
    {
        std::vector<Eigen::Vector3d> out;
        out.reserve(points.size());
        for (const auto &p : points)
        {
            out.emplace_back(p.x(), -p.y(), -p.z());
        }
        return out;
    }

    SmokeAsset asset_from_points(const std::vector<Eigen::Vector3d> &points, float scale, float opacity,
                                 float color, double fps)
    {
        SmokeAsset asset;
        asset.fps = fps;
        AssetFrame frame;
        for (const auto &p : points)
        {
            VisualParticle v;
            v.position = p.cast<float>();
            v.scale = Eigen::Vector3f::Constant(scale);
            v.opacity = opacity;
            v.color = color;
            frame.visual.push_back(v);
            frame.physical.push_back(PhysicalParticle{p.cast<float>(), Eigen::Vector3f::Zero()});
        }
        asset.frames.push_back(std::move(frame));
        validate(asset);
        return asset;
    }
} // namespace smokeforge::asset
