#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

namespace smokeforge::asset
{
    // Appearance Gaussian. All attributes are stored as 32-bit floats, the
    // same precision as the WSA file, so save/load is exact.
    struct VisualParticle
    {
        Eigen::Vector3f position = Eigen::Vector3f::Zero();
        float color = 1.0f; // grayscale, [0,1]
        Eigen::Vector3f scale = Eigen::Vector3f::Ones();
        float opacity = 1.0f;
        // Unit quaternion (w, x, y, z).
        Eigen::Vector4f rotation = Eigen::Vector4f(1.0f, 0.0f, 0.0f, 0.0f);

        bool operator==(const VisualParticle &) const = default;
    };

    struct PhysicalParticle
    {
        Eigen::Vector3f position = Eigen::Vector3f::Zero();
        Eigen::Vector3f velocity = Eigen::Vector3f::Zero();

        bool operator==(const PhysicalParticle &) const = default;
    };

    struct AssetFrame
    {
        std::vector<VisualParticle> visual;
        std::vector<PhysicalParticle> physical;

        bool operator==(const AssetFrame &) const = default;
    };

    inline constexpr double kDefaultFps = 30.0;
    inline constexpr float kQuaternionNormTolerance = 1e-6f;

    // Frames are addressed 1..frames.size() everywhere outside this struct.
    struct SmokeAsset
    {
        std::vector<AssetFrame> frames;
        double fps = kDefaultFps;

        std::size_t frame_count() const { return frames.size(); }
        // 1-based; throws ArgumentError when out of range.
        const AssetFrame &frame(std::size_t t) const;

        bool operator==(const SmokeAsset &) const = default;
    };

    // Throws InvariantError naming the first offending frame (1-based) and
    // particle (0-based).
    void validate(const SmokeAsset &asset);

    // WSA1 reader/writer. See README for the byte layout.
    SmokeAsset load_asset(const std::filesystem::path &path);
    void save_asset(const SmokeAsset &asset, const std::filesystem::path &path);

    // Points sharing a voxel (floor(p / cell)) collapse to their centroid.
    // Output is sorted by voxel index (x, then y, then z).
    std::vector<Eigen::Vector3d> voxel_downsample(const std::vector<Eigen::Vector3d> &points, double cell);

    struct DownsampleResult
    {
        std::vector<Eigen::Vector3d> points;
        double cell = 0.0;
    };

    // Searches (bisection on log cell size) for a cell whose downsampled
    // count lands in [min_count, max_count]. Returns nullopt if the input
    // has fewer than min_count distinct points or no such cell is found.
    std::optional<DownsampleResult> downsample_to_count(const std::vector<Eigen::Vector3d> &points,
                                                        std::size_t min_count, std::size_t max_count,
                                                        int max_iterations = 64);

    // (x, y, z) -> (x, -y, -z).
    std::vector<Eigen::Vector3d> apply_axis_flip(const std::vector<Eigen::Vector3d> &points);

    // One-frame asset seeded from a point cloud: a visual and a physical
    // particle at every point, isotropic visual scale, zero velocity.
    SmokeAsset asset_from_points(const std::vector<Eigen::Vector3d> &points, float scale, float opacity,
                                 float color, double fps = kDefaultFps);
} // namespace smokeforge::asset
