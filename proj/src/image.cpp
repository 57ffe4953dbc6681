#include "smokeforge/image.hpp"

#include "smokeforge/binary_io.hpp"
#include "smokeforge/error.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

namespace smokeforge::image
{
    Frame::Frame(int w, int h, int c, double fill)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0) * std::max(c, 0), fill)
    {
        validate();
    }

    void Frame::validate() const
    {
        if (width <= 0 || height <= 0)
        {
            throw ArgumentError("frame dimensions must be positive");
        }
        if (channels != 1 && channels != 3)
        {
            throw ArgumentError("frame must have 1 or 3 channels");
        }
        if (pixels.size() != pixel_count() * channels)
        {
            throw ArgumentError("frame pixel count does not match its dimensions");
        }
    }

    MaskFrame::MaskFrame(int w, int h, double fill)
        : width(w), height(h), values(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill)
    {
        validate();
    }

    void MaskFrame::validate() const
    {
        if (width <= 0 || height <= 0)
        {
            throw ArgumentError("mask dimensions must be positive");
        }
        if (values.size() != static_cast<std::size_t>(width) * height)
        {
            throw ArgumentError("mask value count does not match its dimensions");
        }
    }

    MaskFrame to_mask(const Frame &frame)
    {
        frame.validate();
        MaskFrame m(frame.width, frame.height);
        for (int y = 0; y < frame.height; ++y)
            for (int x = 0; x < frame.width; ++x)
            {
                double acc = 0.0;
                for (int c = 0; c < frame.channels; ++c)
                    acc += frame.at(x, y, c);
                m.at(x, y) = acc / frame.channels;
            }
        return m;
    }

    Frame to_frame(const MaskFrame &mask)
    {
        mask.validate();
        Frame f(mask.width, mask.height, 1);
        f.pixels = mask.values;
        return f;
    }

    void clamp01(Frame &frame)
    {
        for (double &v : frame.pixels)
            v = std::clamp(v, 0.0, 1.0);
    }

    namespace
    {
        std::string extension(const std::filesystem::path &path)
        {
            std::string ext = path.extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
            return ext;
        }

        unsigned char to_byte(double v)
        {
            return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }

        // Silence libpng's stderr output; failures surface as exceptions.
        void png_error_quiet(png_structp png, png_const_charp) { png_longjmp(png, 1); }
        void png_warning_quiet(png_structp, png_const_charp) {}

        struct FileCloser
        {
            void operator()(std::FILE *f) const { std::fclose(f); }
        };
        using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

        Frame read_png(const std::filesystem::path &path)
        {
            FilePtr file(std::fopen(path.c_str(), "rb"));
            if (!file)
            {
                throw IoError("cannot open '" + path.string() + "'");
            }
            png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
            png_infop info = png ? png_create_info_struct(png) : nullptr;
            if (!png || !info)
            {
                png_destroy_read_struct(&png, &info, nullptr);
                throw IoError("libpng initialisation failed");
            }
            Frame frame;
            std::vector<unsigned char> data;
            std::vector<png_bytep> rows;
            if (setjmp(png_jmpbuf(png)))
            {
                png_destroy_read_struct(&png, &info, nullptr);
                throw FormatError("'" + path.string() + "' is not a readable PNG");
            }
            png_init_io(png, file.get());
            png_read_info(png, info);
            const png_uint_32 w = png_get_image_width(png, info);
            const png_uint_32 h = png_get_image_height(png, info);
            const int color = png_get_color_type(png, info);
            if (color == PNG_COLOR_TYPE_PALETTE)
                png_set_palette_to_rgb(png);
            if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
                png_set_expand_gray_1_2_4_to_8(png);
            if (png_get_valid(png, info, PNG_INFO_tRNS))
                png_set_tRNS_to_alpha(png);
            if (png_get_bit_depth(png, info) == 16)
                png_set_swap(png);
            png_read_update_info(png, info);
            const int depth = png_get_bit_depth(png, info);
            const int in_channels = png_get_channels(png, info);
            const std::size_t rowbytes = png_get_rowbytes(png, info);
            data.resize(rowbytes * h);
            rows.resize(h);
            for (png_uint_32 y = 0; y < h; ++y)
                rows[y] = data.data() + y * rowbytes;
            png_read_image(png, rows.data());
            png_destroy_read_struct(&png, &info, nullptr);

            const int out_channels = in_channels >= 3 ? 3 : 1;
            frame = Frame(static_cast<int>(w), static_cast<int>(h), out_channels);
            const double scale = depth == 16 ? 65535.0 : 255.0;
            for (png_uint_32 y = 0; y < h; ++y)
                for (png_uint_32 x = 0; x < w; ++x)
                    for (int c = 0; c < out_channels; ++c)
                    {
                        const std::size_t s = static_cast<std::size_t>(x) * in_channels + c;
                        double v = 0.0;
                        if (depth == 16)
                        {
                            std::uint16_t u;
                            std::memcpy(&u, rows[y] + 2 * s, 2);
                            v = u;
                        }
                        else
                        {
                            v = rows[y][s];
                        }
                        frame.at(static_cast<int>(x), static_cast<int>(y), c) = v / scale;
                    }
            return frame;
        }

        void write_png(const std::filesystem::path &path, const Frame &frame)
        {
            FilePtr file(std::fopen(path.c_str(), "wb"));
            if (!file)
            {
                throw IoError("cannot open '" + path.string() + "' for writing");
            }
            png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
            png_infop info = png ? png_create_info_struct(png) : nullptr;
            if (!png || !info)
            {
                png_destroy_write_struct(&png, &info);
                throw IoError("libpng initialisation failed");
            }
            std::vector<unsigned char> data(frame.pixels.size());
            std::transform(frame.pixels.begin(), frame.pixels.end(), data.begin(), to_byte);
            std::vector<png_bytep> rows(frame.height);
            const std::size_t stride = static_cast<std::size_t>(frame.width) * frame.channels;
            for (int y = 0; y < frame.height; ++y)
                rows[y] = data.data() + y * stride;
            if (setjmp(png_jmpbuf(png)))
            {
                png_destroy_write_struct(&png, &info);
                throw IoError("failed writing '" + path.string() + "'");
            }
            png_init_io(png, file.get());
            png_set_IHDR(png, info, frame.width, frame.height, 8,
                         frame.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                         PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
            png_write_info(png, info);
            png_write_image(png, rows.data());
            png_write_end(png, nullptr);
            png_destroy_write_struct(&png, &info);
        }

        // Next whitespace-delimited token of a netpbm header, skipping comments.
        std::string pnm_token(std::istream &in)
        {
            std::string tok;
            int ch;
            while ((ch = in.get()) != EOF)
            {
                if (ch == '#')
                {
                    while ((ch = in.get()) != EOF && ch != '\n')
                    {
                    }
                    continue;
                }
                if (std::isspace(ch))
                {
                    if (!tok.empty())
                        break;
                    continue;
                }
                tok.push_back(static_cast<char>(ch));
            }
            if (tok.empty())
            {
                throw FormatError("truncated netpbm header");
            }
            return tok;
        }

        int pnm_int(std::istream &in)
        {
            const std::string t = pnm_token(in);
            try
            {
                std::size_t used = 0;
                const int v = std::stoi(t, &used);
                if (used != t.size())
                    throw FormatError("bad netpbm header value '" + t + "'");
                return v;
            }
            catch (const std::logic_error &)
            {
                throw FormatError("bad netpbm header value '" + t + "'");
            }
        }

        Frame read_pnm(const std::filesystem::path &path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw IoError("cannot open '" + path.string() + "'");
            }
            const std::string magic = pnm_token(in);
            const bool ascii = magic == "P2" || magic == "P3";
            int channels = 0;
            if (magic == "P2" || magic == "P5")
                channels = 1;
            else if (magic == "P3" || magic == "P6")
                channels = 3;
            else
                throw FormatError("unsupported netpbm type '" + magic + "'");
            const int w = pnm_int(in);
            const int h = pnm_int(in);
            const int maxval = pnm_int(in);
            if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
            {
                throw FormatError("bad netpbm dimensions or maxval");
            }
            Frame f(w, h, channels);
            if (ascii)
            {
                for (double &v : f.pixels)
                    v = static_cast<double>(pnm_int(in)) / maxval;
            }
            else
            {
                const int bytes = maxval > 255 ? 2 : 1;
                std::vector<unsigned char> raw(f.pixels.size() * bytes);
                if (!in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size())))
                {
                    throw FormatError("truncated netpbm pixel data");
                }
                for (std::size_t i = 0; i < f.pixels.size(); ++i)
                {
                    const unsigned v = bytes == 2 ? (raw[2 * i] << 8u) | raw[2 * i + 1] : raw[i];
                    f.pixels[i] = static_cast<double>(v) / maxval;
                }
            }
            clamp01(f);
            return f;
        }

        void write_pnm(const std::filesystem::path &path, const Frame &frame, int channels)
        {
            if (frame.channels != channels)
            {
                throw ArgumentError(channels == 1 ? "PGM output needs a 1-channel frame"
                                                  : "PPM output needs a 3-channel frame");
            }
            std::ofstream out(path, std::ios::binary);
            if (!out)
            {
                throw IoError("cannot open '" + path.string() + "' for writing");
            }
            out << (channels == 1 ? "P5" : "P6") << '\n' << frame.width << ' ' << frame.height << "\n255\n";
            for (double v : frame.pixels)
                out.put(static_cast<char>(to_byte(v)));
            if (!out)
            {
                throw IoError("failed writing '" + path.string() + "'");
            }
        }

        Frame read_f32(const std::filesystem::path &path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw IoError("cannot open '" + path.string() + "'");
            }
            std::string line;
            std::getline(in, line);
            int w = 0;
            int h = 0;
            int c = 0;
            try
            {
                const auto j = nlohmann::json::parse(line);
                if (j.at("magic") != "WSF1")
                    throw FormatError("format version mismatch: expected WSF1");
                w = j.at("width").get<int>();
                h = j.at("height").get<int>();
                c = j.at("channels").get<int>();
            }
            catch (const nlohmann::json::exception &e)
            {
                throw FormatError(std::string("bad f32 image header: ") + e.what());
            }
            if (w <= 0 || h <= 0 || (c != 1 && c != 3))
            {
                throw FormatError("bad f32 image dimensions");
            }
            const std::uintmax_t need = line.size() + 1 + 4ull * w * h * c;
            if (std::filesystem::file_size(path) != need)
            {
                throw FormatError("f32 image size does not match its header");
            }
            Frame f(w, h, c);
            binary::read_f32_span(in, f.pixels, "pixels");
            for (double v : f.pixels)
            {
                if (!std::isfinite(v))
                    throw FormatError("non-finite pixel in f32 image");
            }
            return f;
        }

        void write_f32(const std::filesystem::path &path, const Frame &frame)
        {
            std::ofstream out(path, std::ios::binary);
            if (!out)
            {
                throw IoError("cannot open '" + path.string() + "' for writing");
            }
            nlohmann::ordered_json h;
            h["magic"] = "WSF1";
            h["width"] = frame.width;
            h["height"] = frame.height;
            h["channels"] = frame.channels;
            out << h.dump() << '\n';
            binary::write_f32_span(out, frame.pixels);
            if (!out)
            {
                throw IoError("failed writing '" + path.string() + "'");
            }
        }
    } // namespace

    Frame read_image(const std::filesystem::path &path)
    {
        const std::string ext = extension(path);
        if (ext == ".png")
            return read_png(path);
        if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
            return read_pnm(path);
        if (ext == ".f32")
            return read_f32(path);
        throw ArgumentError("unsupported image extension '" + ext + "' (png, pgm, ppm, f32)");
    }

    void write_image(const std::filesystem::path &path, const Frame &frame)
    {
        frame.validate();
        const std::string ext = extension(path);
        if (ext == ".png")
            write_png(path, frame);
        else if (ext == ".pgm")
            write_pnm(path, frame, 1);
        else if (ext == ".ppm")
            write_pnm(path, frame, 3);
        else if (ext == ".f32")
            write_f32(path, frame);
        else
            throw ArgumentError("unsupported image extension '" + ext + "' (png, pgm, ppm, f32)");
    }
} // namespace smokeforge::image
