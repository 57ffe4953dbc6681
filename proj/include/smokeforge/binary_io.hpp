#pragma once

#include "smokeforge/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

// Little-endian scalar I/O shared by the WSA asset format, grid dumps and
// raw f32 images.
namespace smokeforge::binary
{
    template <typename T>
    T to_little(T value)
    {
        if constexpr (std::endian::native == std::endian::big)
        {
            auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
            std::reverse(bytes.begin(), bytes.end());
            return std::bit_cast<T>(bytes);
        }
        return value;
    }

    inline void write_u32(std::ostream &out, std::uint32_t v)
    {
        v = to_little(v);
        out.write(reinterpret_cast<const char *>(&v), sizeof v);
    }

    inline void write_f32(std::ostream &out, float v)
    {
        v = to_little(v);
        out.write(reinterpret_cast<const char *>(&v), sizeof v);
    }

    inline void write_f32_span(std::ostream &out, std::span<const double> values)
    {
        for (double v : values)
        {
            write_f32(out, static_cast<float>(v));
        }
    }

    inline std::uint32_t read_u32(std::istream &in, const std::string &what)
    {
        std::uint32_t v = 0;
        if (!in.read(reinterpret_cast<char *>(&v), sizeof v))
        {
            throw FormatError("truncated data while reading " + what);
        }
        return to_little(v);
    }

    inline float read_f32(std::istream &in, const std::string &what)
    {
        float v = 0;
        if (!in.read(reinterpret_cast<char *>(&v), sizeof v))
        {
            throw FormatError("truncated data while reading " + what);
        }
        return to_little(v);
    }

    inline void read_f32_span(std::istream &in, std::span<double> values, const std::string &what)
    {
        for (double &v : values)
        {
            v = read_f32(in, what);
        }
    }
} // namespace smokeforge::binary
