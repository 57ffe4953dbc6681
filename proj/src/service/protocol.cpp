#include "smokeforge/error.hpp"
#include "smokeforge/service.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace smokeforge::service
{
    namespace
    {
        [[noreturn]] void fail(const std::string &what) { throw ArgumentError(what); }

        const json &require(const json &obj, const char *key)
        {
            if (!obj.is_object())
                fail(fmt::format("expected an object holding '{}'", key));
            const auto it = obj.find(key);
            if (it == obj.end())
                fail(fmt::format("missing field '{}'", key));
            return *it;
        }

        void only_keys(const json &obj, std::initializer_list<const char *> keys)
        {
            if (!obj.is_object())
                fail("expected an object");
            for (const auto &[k, v] : obj.items())
            {
                if (std::none_of(keys.begin(), keys.end(), [&](const char *allowed) { return k == allowed; }))
                    fail(fmt::format("unknown field '{}'", k));
            }
        }

        double number(const json &j, const char *what)
        {
            if (!j.is_number())
                fail(fmt::format("'{}' must be a number", what));
            const double v = j.get<double>();
            if (!std::isfinite(v))
                fail(fmt::format("'{}' must be finite", what));
            return v;
        }

        std::uint64_t unsigned_integer(const json &j, const char *what)
        {
            if (j.is_number_unsigned())
                return j.get<std::uint64_t>();
            if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
                return static_cast<std::uint64_t>(j.get<std::int64_t>());
            fail(fmt::format("'{}' must be a non-negative integer", what));
        }

        Vec3 vec3(const json &j, const char *what)
        {
            if (!j.is_array() || j.size() != 3)
                fail(fmt::format("'{}' must be an array of 3 numbers", what));
            return Vec3(number(j[0], what), number(j[1], what), number(j[2], what));
        }

        json vec3_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

        json obstacle_json(const solver::SphereObstacle &o)
        {
            return {{"center", vec3_json(o.center)}, {"radius", o.radius}};
        }

        solver::SphereObstacle obstacle_from(const json &j)
        {
            only_keys(j, {"center", "radius"});
            solver::SphereObstacle o;
            o.center = vec3(require(j, "center"), "center");
            o.radius = number(require(j, "radius"), "radius");
            return o;
        }

        json params_of(const json &message)
        {
            const auto it = message.find("params");
            if (it == message.end() || it->is_null())
                return json::object();
            if (!it->is_object())
                fail("'params' must be an object");
            return *it;
        }

        template <class... Ts> struct overloaded : Ts...
        {
            using Ts::operator()...;
        };
        template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;
    } // namespace

    std::string command_name(const Command &cmd)
    {
        return std::visit(overloaded{
                              [](const SetWind &) { return "set_wind"; },
                              [](const AddObstacle &) { return "add_obstacle"; },
                              [](const RemoveObstacle &) { return "remove_obstacle"; },
                              [](const SetBuoyancy &) { return "set_buoyancy"; },
                              [](const Step &) { return "step"; },
                              [](const Pause &) { return "pause"; },
                              [](const Resume &) { return "resume"; },
                              [](const Reset &) { return "reset"; },
                              [](const Snapshot &) { return "snapshot"; },
                          },
                          cmd);
    }

    void validate(const Command &cmd)
    {
        std::visit(overloaded{
                       [](const SetWind &c) {
                           for (const auto &w : c.winds)
                               w.validate();
                       },
                       [](const AddObstacle &c) { c.obstacle.validate(); },
                       [](const RemoveObstacle &c) {
                           if (c.id == 0)
                               fail("obstacle ids start at 1");
                       },
                       [](const SetBuoyancy &c) {
                           if (!std::isfinite(c.value))
                               fail("buoyancy must be finite");
                       },
                       [](const Step &c) {
                           if (c.count < 1 || c.count > kMaxStepsPerCommand)
                               fail(fmt::format("step count must be in [1, {}]", kMaxStepsPerCommand));
                       },
                       [](const Reset &c) {
                           if (c.frame < 1)
                               fail("frames are numbered from 1");
                       },
                       [](const auto &) {},
                   },
                   cmd);
    }

    json wind_to_json(const solver::WindForce &wind)
    {
        json j{{"force", vec3_json(wind.force)}};
        if (const auto *s = std::get_if<solver::SphereRegion>(&wind.region))
            j["region"] = {{"center", vec3_json(s->center)}, {"radius", s->radius}};
        else
            j["region"] = "global";
        return j;
    }

    solver::WindForce wind_from_json(const json &j)
    {
        only_keys(j, {"force", "region"});
        solver::WindForce w;
        w.force = vec3(require(j, "force"), "force");
        const auto it = j.find("region");
        if (it == j.end() || (it->is_string() && *it == "global"))
            w.region = solver::GlobalRegion{};
        else if (it->is_object())
        {
            only_keys(*it, {"center", "radius"});
            w.region = solver::SphereRegion{vec3(require(*it, "center"), "center"),
                                            number(require(*it, "radius"), "radius")};
        }
        else
            fail("'region' must be \"global\" or {center, radius}");
        w.validate();
        return w;
    }

    json command_to_json(const Command &cmd)
    {
        json params = std::visit(overloaded{
                                     [](const SetWind &c) {
                                         json winds = json::array();
                                         for (const auto &w : c.winds)
                                             winds.push_back(wind_to_json(w));
                                         return json{{"winds", winds}};
                                     },
                                     [](const AddObstacle &c) { return obstacle_json(c.obstacle); },
                                     [](const RemoveObstacle &c) { return json{{"id", c.id}}; },
                                     [](const SetBuoyancy &c) { return json{{"value", c.value}}; },
                                     [](const Step &c) { return json{{"n", c.count}}; },
                                     [](const Reset &c) { return json{{"frame", c.frame}}; },
                                     [](const auto &) { return json::object(); },
                                 },
                                 cmd);
        return {{"cmd", command_name(cmd)}, {"params", params}};
    }

    Command command_from_json(const json &message)
    {
        try
        {
            const json &name_j = require(message, "cmd");
            if (!name_j.is_string())
                fail("'cmd' must be a string");
            const std::string name = name_j.get<std::string>();
            const json p = params_of(message);
            Command cmd;
            if (name == "set_wind")
            {
                only_keys(p, {"winds"});
                const json &list = require(p, "winds");
                if (!list.is_array())
                    fail("'winds' must be an array");
                SetWind c;
                for (const auto &w : list)
                    c.winds.push_back(wind_from_json(w));
                cmd = c;
            }
            else if (name == "add_obstacle")
                cmd = AddObstacle{obstacle_from(p)};
            else if (name == "remove_obstacle")
            {
                only_keys(p, {"id"});
                cmd = RemoveObstacle{unsigned_integer(require(p, "id"), "id")};
            }
            else if (name == "set_buoyancy")
            {
                only_keys(p, {"value"});
                cmd = SetBuoyancy{number(require(p, "value"), "value")};
            }
            else if (name == "step")
            {
                only_keys(p, {"n"});
                cmd = Step{p.contains("n") ? unsigned_integer(p["n"], "n") : 1};
            }
            else if (name == "reset")
            {
                only_keys(p, {"frame"});
                cmd = Reset{p.contains("frame") ? static_cast<std::size_t>(unsigned_integer(p["frame"], "frame")) : 1};
            }
            else if (name == "pause" || name == "resume" || name == "snapshot")
            {
                only_keys(p, {});
                if (name == "pause")
                    cmd = Pause{};
                else if (name == "resume")
                    cmd = Resume{};
                else
                    cmd = Snapshot{};
            }
            else
                fail(fmt::format("unknown command '{}'", name));
            validate(cmd);
            return cmd;
        }
        catch (const json::exception &e)
        {
            throw ArgumentError(e.what());
        }
    }

    json config_to_json(const solver::SimConfig &config)
    {
        json winds = json::array();
        for (const auto &w : config.wind)
            winds.push_back(wind_to_json(w));
        json obstacles = json::array();
        for (const auto &o : config.obstacles)
            obstacles.push_back(obstacle_json(o));
        json j{
            {"dt", config.dt},
            {"buoyancy", config.buoyancy_coeff},
            {"wind", winds},
            {"obstacles", obstacles},
            {"projection_tol", config.projection_tol},
            {"projection_max_iters", config.projection_max_iters},
            {"resolution", config.resolution},
            {"padding_sigmas", config.padding_sigmas},
            {"boundary", config.boundary == solver::BoundaryMode::Open ? "open" : "closed"},
            {"truncation_sigmas", config.splat.truncation_sigmas},
            {"cfl_warn", config.cfl_warn},
        };
        if (config.kernel_scale)
            j["kernel_scale"] = vec3_json(*config.kernel_scale);
        return j;
    }

    solver::SimConfig config_from_json(const json &j)
    {
        try
        {
            only_keys(j, {"dt", "buoyancy", "wind", "obstacles", "projection_tol", "projection_max_iters", "resolution",
                          "padding_sigmas", "boundary", "truncation_sigmas", "cfl_warn", "kernel_scale"});
            solver::SimConfig c;
            if (j.contains("dt"))
                c.dt = number(j["dt"], "dt");
            if (j.contains("buoyancy"))
                c.buoyancy_coeff = number(j["buoyancy"], "buoyancy");
            if (j.contains("wind"))
                for (const auto &w : j["wind"])
                    c.wind.push_back(wind_from_json(w));
            if (j.contains("obstacles"))
                for (const auto &o : j["obstacles"])
                    c.obstacles.push_back(obstacle_from(o));
            if (j.contains("projection_tol"))
                c.projection_tol = number(j["projection_tol"], "projection_tol");
            if (j.contains("projection_max_iters"))
                c.projection_max_iters = static_cast<int>(unsigned_integer(j["projection_max_iters"], "projection_max_iters"));
            if (j.contains("resolution"))
            {
                const json &r = j["resolution"];
                if (!r.is_array() || r.size() != 3)
                    fail("'resolution' must be an array of 3 integers");
                for (int a = 0; a < 3; ++a)
                    c.resolution[a] = static_cast<int>(unsigned_integer(r[a], "resolution"));
            }
            if (j.contains("padding_sigmas"))
                c.padding_sigmas = number(j["padding_sigmas"], "padding_sigmas");
            if (j.contains("boundary"))
            {
                const std::string b = j["boundary"].get<std::string>();
                if (b == "open")
                    c.boundary = solver::BoundaryMode::Open;
                else if (b == "closed")
                    c.boundary = solver::BoundaryMode::Closed;
                else
                    fail(fmt::format("unknown boundary '{}'", b));
            }
            if (j.contains("truncation_sigmas"))
                c.splat.truncation_sigmas = number(j["truncation_sigmas"], "truncation_sigmas");
            if (j.contains("cfl_warn"))
                c.cfl_warn = number(j["cfl_warn"], "cfl_warn");
            if (j.contains("kernel_scale"))
                c.kernel_scale = vec3(j["kernel_scale"], "kernel_scale");
            c.validate();
            return c;
        }
        catch (const json::exception &e)
        {
            throw ArgumentError(e.what());
        }
    }

    std::string base64_encode(const std::vector<std::uint8_t> &bytes)
    {
        std::string out(4 * ((bytes.size() + 2) / 3), '\0');
        const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()), bytes.data(),
                                      static_cast<int>(bytes.size()));
        out.resize(static_cast<std::size_t>(n));
        return out;
    }

    std::vector<std::uint8_t> base64_decode(const std::string &text)
    {
        if (text.size() % 4 != 0)
            throw FormatError("base64 length must be a multiple of 4");
        std::vector<std::uint8_t> out(3 * (text.size() / 4));
        const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char *>(text.data()),
                                      static_cast<int>(text.size()));
        if (n < 0)
            throw FormatError("invalid base64");
        // EVP_DecodeBlock keeps the zero bytes that padding stands for.
        std::size_t len = static_cast<std::size_t>(n);
        if (!text.empty() && text.back() == '=')
            --len;
        if (text.size() >= 2 && text[text.size() - 2] == '=')
            --len;
        out.resize(len);
        return out;
    }

    std::string payload_mode_name(PayloadMode mode) { return mode == PayloadMode::Slice ? "slice" : "render"; }

    PayloadMode parse_payload_mode(const std::string &name)
    {
        if (name == "slice")
            return PayloadMode::Slice;
        if (name == "render")
            return PayloadMode::Render;
        throw ArgumentError(fmt::format("unknown payload mode '{}' (slice|render)", name));
    }

    void FrameSettings::validate() const
    {
        if (!(slice_scale > 0) || !std::isfinite(slice_scale))
            fail("slice scale must be positive");
        if (width < 1 || height < 1 || width > 4096 || height > 4096)
            fail("frame size must be in [1, 4096]");
        render.validate();
    }

    json frame_to_json(const FrameMessage &frame)
    {
        std::vector<std::uint8_t> bytes(frame.image.pixels.size());
        std::transform(frame.image.pixels.begin(), frame.image.pixels.end(), bytes.begin(), [](double v) {
            return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        });
        return {
            {"type", "frame"},
            {"step_index", frame.step_index},
            {"boundary", frame.boundary},
            {"clock", frame.clock},
            {"mode", payload_mode_name(frame.mode)},
            {"width", frame.image.width},
            {"height", frame.image.height},
            {"channels", frame.image.channels},
            {"encoding", "base64-u8"},
            {"payload", base64_encode(bytes)},
            {"max_divergence", frame.max_divergence},
            {"total_mass", frame.total_mass},
        };
    }

    FrameMessage frame_from_json(const json &j)
    {
        try
        {
            FrameMessage f;
            f.step_index = j.at("step_index").get<std::uint64_t>();
            f.boundary = j.at("boundary").get<std::uint64_t>();
            f.clock = j.at("clock").get<double>();
            f.mode = parse_payload_mode(j.at("mode").get<std::string>());
            f.max_divergence = j.at("max_divergence").get<double>();
            f.total_mass = j.at("total_mass").get<double>();
            f.image = image::Frame(j.at("width").get<int>(), j.at("height").get<int>(), j.at("channels").get<int>());
            const auto bytes = base64_decode(j.at("payload").get<std::string>());
            if (bytes.size() != f.image.pixels.size())
                throw FormatError("frame payload size does not match its dimensions");
            for (std::size_t i = 0; i < bytes.size(); ++i)
                f.image.pixels[i] = bytes[i] / 255.0;
            return f;
        }
        catch (const json::exception &e)
        {
            throw FormatError(e.what());
        }
    }
} // namespace smokeforge::service
