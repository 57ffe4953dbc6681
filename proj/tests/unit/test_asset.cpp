#include "smokeforge/asset.hpp"
#include "smokeforge/error.hpp"

#include "../support/generators.hpp"
#include "../support/temp_dir.hpp"

#include <doctest.h>

#include <chrono>
#include <fstream>
#include <iterator>
#include <set>

using namespace smokeforge;
using asset::SmokeAsset;

namespace
{
    std::string read_bytes(const std::filesystem::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    void write_bytes(const std::filesystem::path &p, const std::string &bytes)
    {
        std::ofstream out(p, std::ios::binary);
        out << bytes;
    }

    // Hand-assembled WSA bytes, independent of save_asset.
    std::string wsa_bytes(const std::string &header, const std::vector<std::vector<float>> &blocks,
                          const std::vector<std::pair<std::uint32_t, std::uint32_t>> &counts)
    {
        std::string out = header + "\n";
        for (std::size_t b = 0; b < blocks.size(); ++b)
        {
            out.append(reinterpret_cast<const char *>(&counts[b].first), 4);
            out.append(reinterpret_cast<const char *>(&counts[b].second), 4);
            out.append(reinterpret_cast<const char *>(blocks[b].data()), blocks[b].size() * 4);
        }
        return out;
    }
} // namespace

TEST_CASE("minimal asset: one frame, one visual particle, no physical")
{
    testing::TempDir dir;
    const auto path = dir / "min.wsa";
    write_bytes(path, wsa_bytes(R"({"magic":"WSA1","frames":1,"fps":30.0})",
                                {{0, 0, 0, 0.5f, 1, 1, 1, 0.8f, 1, 0, 0, 0}}, {{1u, 0u}}));
    const SmokeAsset a = asset::load_asset(path);
    REQUIRE(a.frame_count() == 1);
    CHECK(a.frame(1).visual.size() == 1);
    CHECK(a.frame(1).physical.empty());
    CHECK(a.frame(1).visual[0].opacity == doctest::Approx(0.8f));
    CHECK(a.fps == 30.0);
}

TEST_CASE("non-unit quaternion is rejected naming frame 1")
{
    testing::TempDir dir;
    const auto path = dir / "bad.wsa";
    write_bytes(path, wsa_bytes(R"({"magic":"WSA1","frames":1,"fps":30.0})",
                                {{0, 0, 0, 0.5f, 1, 1, 1, 0.8f, 2, 0, 0, 0}}, {{1u, 0u}}));
    try
    {
        (void)asset::load_asset(path);
        FAIL("expected InvariantError");
    }
    catch (const InvariantError &e)
    {
        const std::string msg = e.what();
        CHECK(msg.find("frame 1") != std::string::npos);
        CHECK(msg.find("particle 0") != std::string::npos);
    }
}

TEST_CASE("loader rejects version mismatch, truncation and NaN")
{
    testing::TempDir dir;
    const auto path = dir / "x.wsa";
    const std::vector<float> good{0, 0, 0, 0.5f, 1, 1, 1, 0.8f, 1, 0, 0, 0};

    write_bytes(path, wsa_bytes(R"({"magic":"WSA2","frames":1,"fps":30.0})", {good}, {{1u, 0u}}));
    CHECK_THROWS_AS((void)asset::load_asset(path), FormatError);

    auto bytes = wsa_bytes(R"({"magic":"WSA1","frames":1,"fps":30.0})", {good}, {{1u, 0u}});
    write_bytes(path, bytes.substr(0, bytes.size() - 6));
    CHECK_THROWS_AS((void)asset::load_asset(path), FormatError);

    write_bytes(path, wsa_bytes(R"({"magic":"WSA1","frames":2,"fps":30.0})", {good}, {{1u, 0u}}));
    CHECK_THROWS_AS((void)asset::load_asset(path), FormatError);

    auto nan_block = good;
    nan_block[1] = std::numeric_limits<float>::quiet_NaN();
    write_bytes(path, wsa_bytes(R"({"magic":"WSA1","frames":1,"fps":30.0})", {nan_block}, {{1u, 0u}}));
    CHECK_THROWS_AS((void)asset::load_asset(path), InvariantError);

    // Count claiming far more particles than the file holds.
    write_bytes(path, wsa_bytes(R"({"magic":"WSA1","frames":1,"fps":30.0})", {good}, {{4000000000u, 0u}}));
    CHECK_THROWS_AS((void)asset::load_asset(path), FormatError);

    write_bytes(path, "not json\n");
    CHECK_THROWS_AS((void)asset::load_asset(path), FormatError);

    CHECK_THROWS_AS((void)asset::load_asset(dir / "missing.wsa"), IoError);
}

TEST_CASE("save/load round trip is field-wise exact and byte-stable")
{
    std::mt19937 rng(7);
    testing::TempDir dir;
    for (int trial = 0; trial < 5; ++trial)
    {
        SmokeAsset a = testing::random_asset(rng, 3, 20, 11);
        a.fps = 24.0;
        const auto p1 = dir / "a.wsa";
        const auto p2 = dir / "b.wsa";
        asset::save_asset(a, p1);
        const SmokeAsset b = asset::load_asset(p1);
        CHECK(a == b);
        asset::save_asset(b, p2);
        CHECK(read_bytes(p1) == read_bytes(p2));
    }
}

TEST_CASE("header is written in canonical key order")
{
    testing::TempDir dir;
    SmokeAsset a;
    a.frames.resize(2);
    asset::save_asset(a, dir / "h.wsa");
    const auto bytes = read_bytes(dir / "h.wsa");
    CHECK(bytes.substr(0, bytes.find('\n')) == R"({"magic":"WSA1","frames":2,"fps":30.0})");
    CHECK(bytes.size() == bytes.find('\n') + 1 + 2 * 8);
}

TEST_CASE("save rejects empty asset and unwritable path")
{
    testing::TempDir dir;
    CHECK_THROWS_AS(asset::save_asset(SmokeAsset{}, dir / "e.wsa"), InvariantError);
    SmokeAsset a;
    a.frames.resize(1);
    CHECK_THROWS_AS(asset::save_asset(a, dir / "no" / "such" / "dir.wsa"), IoError);
}

TEST_CASE("300 particles x 240 frames saves quickly")
{
    std::mt19937 rng(3);
    SmokeAsset a = testing::random_asset(rng, 240, 300, 300);
    testing::TempDir dir;
    const auto t0 = std::chrono::steady_clock::now();
    asset::save_asset(a, dir / "big.wsa");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("save time " << seconds << " s");
    CHECK(seconds < 1.0);
}

TEST_CASE("voxel_downsample merges to centroids")
{
    const std::vector<Eigen::Vector3d> same{{0.1, 0.2, 0.3}, {0.3, 0.4, 0.5}, {0.2, 0.9, 0.1}};
    const auto one = asset::voxel_downsample(same, 1.0);
    REQUIRE(one.size() == 1);
    CHECK((one[0] - Eigen::Vector3d(0.2, 0.5, 0.3)).norm() < 1e-12);

    const std::vector<Eigen::Vector3d> apart{{0, 0, 0}, {2.5, 2.5, 2.5}, {-3, 5, 7.5}};
    CHECK(asset::voxel_downsample(apart, 1.0).size() == apart.size());

    CHECK_THROWS_AS((void)asset::voxel_downsample(apart, 0.0), ArgumentError);
    CHECK_THROWS_AS((void)asset::voxel_downsample(apart, -1.0), ArgumentError);
    CHECK(asset::voxel_downsample({}, 1.0).empty());
}

TEST_CASE("voxel_downsample output is sorted by voxel and order-independent")
{
    std::mt19937 rng(11);
    auto pts = testing::random_points(rng, 2000, 5.0);
    const auto a = asset::voxel_downsample(pts, 0.7);
    std::reverse(pts.begin(), pts.end());
    const auto b = asset::voxel_downsample(pts, 0.7);
    REQUIRE(a.size() == b.size());
    std::array<std::int64_t, 3> prev{std::numeric_limits<std::int64_t>::min(), 0, 0};
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        CHECK((a[i] - b[i]).norm() < 1e-12);
        const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(a[i].x() / 0.7)),
                                              static_cast<std::int64_t>(std::floor(a[i].y() / 0.7)),
                                              static_cast<std::int64_t>(std::floor(a[i].z() / 0.7))};
        CHECK(prev < key);
        prev = key;
    }
}

TEST_CASE("voxel_downsample is idempotent")
{
    std::mt19937 rng(5);
    for (double cell : {0.1, 0.5, 1.3, 4.0})
    {
        const auto pts = testing::random_points(rng, 3000, 5.0);
        const auto once = asset::voxel_downsample(pts, cell);
        const auto twice = asset::voxel_downsample(once, cell);
        CHECK(once == twice);
    }
}

TEST_CASE("voxel count is non-increasing across nested cell sizes")
{
    // Doubling the cell makes every voxel a union of eight old voxels, so
    // the count cannot grow. Arbitrary cell sizes carry no such guarantee.
    std::mt19937 rng(9);
    const auto pts = testing::random_points(rng, 5000, 10.0);
    std::size_t prev = pts.size() + 1;
    for (double cell = 0.05; cell < 40.0; cell *= 2.0)
    {
        const auto n = asset::voxel_downsample(pts, cell).size();
        CHECK(n <= prev);
        prev = n;
    }
}

TEST_CASE("voxel count is not monotone for non-nested cells")
{
    const std::vector<Eigen::Vector3d> pts{{1.9, 0, 0}, {2.1, 0, 0}};
    CHECK(asset::voxel_downsample(pts, 1.5).size() == 1);
    CHECK(asset::voxel_downsample(pts, 2.0).size() == 2);
}

TEST_CASE("bisection finds a cell keeping 100-300 of 10k points")
{
    std::mt19937 rng(21);
    const auto pts = testing::random_points(rng, 10000, 3.0);
    const auto result = asset::downsample_to_count(pts, 100, 300);
    REQUIRE(result.has_value());
    CHECK(result->points.size() >= 100);
    CHECK(result->points.size() <= 300);
    CHECK(asset::voxel_downsample(pts, result->cell).size() == result->points.size());

    CHECK_FALSE(asset::downsample_to_count({{0, 0, 0}}, 100, 300).has_value());
}

TEST_CASE("axis flip")
{
    const std::vector<Eigen::Vector3d> pts{{1, 2, 3}, {0, 0, 0}, {-4, 0.5, -2}};
    const auto f = asset::apply_axis_flip(pts);
    CHECK(f[0] == Eigen::Vector3d(1, -2, -3));
    CHECK(f[1] == Eigen::Vector3d(0, 0, 0));
    CHECK(asset::apply_axis_flip(f) == pts);
    for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK(f[i].norm() == pts[i].norm());
}

TEST_CASE("asset_from_points seeds matching visual and physical particles")
{
    const std::vector<Eigen::Vector3d> pts{{1, 2, 3}, {4, 5, 6}};
    const auto a = asset::asset_from_points(pts, 0.5f, 0.3f, 0.9f);
    REQUIRE(a.frame_count() == 1);
    CHECK(a.frame(1).visual.size() == 2);
    CHECK(a.frame(1).physical.size() == 2);
    CHECK(a.frame(1).physical[1].position == Eigen::Vector3f(4, 5, 6));
    CHECK_THROWS_AS((void)a.frame(2), ArgumentError);
    CHECK_THROWS_AS((void)a.frame(0), ArgumentError);
}
