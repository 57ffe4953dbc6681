#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace smokeforge::image
{
    // Interleaved image, values in [0,1]. Row-major, top row first.
    struct Frame
    {
        int width = 0;
        int height = 0;
        int channels = 1;
        std::vector<double> pixels;

        Frame() = default;
        Frame(int w, int h, int c, double fill = 0.0);

        std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
        double &at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
        double at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }
        std::size_t index(int x, int y, int c) const
        {
            return (static_cast<std::size_t>(y) * width + x) * channels + c;
        }

        // Throws ArgumentError on bad dimensions, pixel count or channels.
        void validate() const;
        bool same_shape(const Frame &o) const
        {
            return width == o.width && height == o.height && channels == o.channels;
        }
        bool operator==(const Frame &) const = default;
    };

    // Single-channel soft mask in [0,1].
    struct MaskFrame
    {
        int width = 0;
        int height = 0;
        std::vector<double> values;

        MaskFrame() = default;
        MaskFrame(int w, int h, double fill = 0.0);

        double &at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
        double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
        void validate() const;
        bool operator==(const MaskFrame &) const = default;
    };

    // Mean over channels.
    MaskFrame to_mask(const Frame &frame);
    Frame to_frame(const MaskFrame &mask);
    // Values outside [0,1] are clamped.
    void clamp01(Frame &frame);

    // By extension: .png (8/16-bit gray, gray+alpha, RGB, RGBA; alpha is
    // dropped), .pgm/.ppm (P2, P3, P5, P6, maxval <= 65535) and .f32 (JSON
    // header line {"magic":"WSF1","width","height","channels"} then
    // little-endian f32 pixels).
    Frame read_image(const std::filesystem::path &path);
    // 8-bit for .png/.pgm/.ppm (.pgm needs 1 channel, .ppm 3), exact f32
    // for .f32.
    void write_image(const std::filesystem::path &path, const Frame &frame);
} // namespace smokeforge::image
