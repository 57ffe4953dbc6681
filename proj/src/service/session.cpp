#include "smokeforge/error.hpp"
#include "smokeforge/scenario.hpp"
#include "smokeforge/service.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace smokeforge::service
{
    namespace
    {
        template <class... Ts> struct overloaded : Ts...
        {
            using Ts::operator()...;
        };
        template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;
    } // namespace

    solver::SimState initial_state(const SessionSource &source, std::size_t frame, const solver::SimConfig &config)
    {
        if (source.asset)
            return solver::init_from_asset(*source.asset, frame, config);
        if (frame != 1)
            throw ArgumentError(fmt::format("frame {} out of range: the reference plume has a single frame", frame));
        config.validate();
        return scenario::reference_plume(config.resolution);
    }

    Session::Session(SessionSource source, solver::SimConfig config)
        : source_(std::move(source)), initial_config_(std::move(config)), config_(initial_config_)
    {
        state_ = initial_state(source_, source_.frame, config_);
        for (const auto &o : config_.obstacles)
            obstacles_.emplace(next_obstacle_id_++, o);
    }

    Ack Session::apply(const Command &cmd)
    {
        Ack ack;
        ack.step_index = state_.step_index;
        try
        {
            validate(cmd);
            apply_valid(cmd, ack);
        }
        catch (const Error &e)
        {
            ack = Ack{};
            ack.step_index = state_.step_index;
            ack.reason = e.what();
            return ack;
        }
        ack.accepted = true;
        ack.seq = ++seq_;
        log_.push_back({ack.seq, steps_taken_, cmd});
        return ack;
    }

    // Every branch checks before it mutates, so a throw leaves the session
    // as it was.
    void Session::apply_valid(const Command &cmd, Ack &ack)
    {
        std::visit(overloaded{
                       [&](const SetWind &c) { config_.wind = c.winds; },
                       [&](const AddObstacle &c) {
                           const std::uint64_t id = next_obstacle_id_++;
                           obstacles_.emplace(id, c.obstacle);
                           config_.obstacles.push_back(c.obstacle);
                           ack.obstacle_id = id;
                       },
                       [&](const RemoveObstacle &c) {
                           if (!obstacles_.count(c.id))
                               throw ArgumentError(fmt::format("unknown obstacle id {}", c.id));
                           obstacles_.erase(c.id);
                           config_.obstacles.clear();
                           for (const auto &[id, o] : obstacles_)
                               config_.obstacles.push_back(o);
                       },
                       [&](const SetBuoyancy &c) { config_.buoyancy_coeff = c.value; },
                       [&](const Step &c) {
                           if (pending_steps_ > kMaxStepsPerCommand)
                               throw ArgumentError("too many steps already queued");
                           pending_steps_ += c.count;
                       },
                       [&](const Pause &) { mode_ = RunMode::Paused; },
                       [&](const Resume &) { mode_ = RunMode::Running; },
                       [&](const Reset &c) { state_ = initial_state(source_, c.frame, config_); },
                       [&](const Snapshot &) { snapshot_requested_ = true; },
                   },
                   cmd);
    }

    std::optional<solver::StepReport> Session::advance(bool tick)
    {
        if (pending_steps_ > 0)
            --pending_steps_;
        else if (!(tick && mode_ == RunMode::Running))
            return std::nullopt;
        return step_now();
    }

    solver::StepReport Session::step_now()
    {
        solver::StepResult r = solver::step(state_, config_);
        state_ = std::move(r.state);
        ++steps_taken_;
        return r.report;
    }

    bool Session::take_snapshot_request()
    {
        const bool requested = snapshot_requested_;
        snapshot_requested_ = false;
        return requested;
    }

    FrameMessage Session::frame(const FrameSettings &settings) const
    {
        settings.validate();
        FrameMessage f;
        f.step_index = state_.step_index;
        f.boundary = steps_taken_;
        f.clock = state_.clock;
        f.mode = settings.mode;
        const GridSpec &spec = state_.density.spec();
        if (settings.mode == PayloadMode::Slice)
            f.image = render::density_slice(state_.density, spec.res[2] / 2, settings.slice_scale);
        else
        {
            const render::View view = render::front_view(spec, settings.width, settings.height);
            f.image = render::render_density(state_.density, view.pose, view.intrinsics, settings.render).color;
        }
        f.max_divergence = solver::max_divergence(state_.velocity, solver::build_solids(spec, config_.obstacles));
        f.total_mass = solver::total_mass(state_.density);
        return f;
    }

    json log_header(const Session &session)
    {
        json header{{"type", "session"},
                    {"frame", session.source().frame},
                    {"config", config_to_json(session.initial_config())}};
        header["asset"] = session.source().asset_path.empty() ? json(nullptr) : json(session.source().asset_path);
        return header;
    }

    json log_line(const LogEntry &entry)
    {
        json line{{"type", "command"}, {"seq", entry.seq}, {"boundary", entry.boundary}};
        line.update(command_to_json(entry.command));
        return line;
    }

    json log_end(const Session &session) { return {{"type", "end"}, {"boundary", session.steps_taken()}}; }

    std::string log_to_jsonl(const Session &session)
    {
        std::ostringstream out;
        out << log_header(session).dump() << '\n';
        for (const auto &e : session.log())
            out << log_line(e).dump() << '\n';
        out << log_end(session).dump() << '\n';
        return out.str();
    }

    void write_log(const Session &session, const std::filesystem::path &path)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw IoError(fmt::format("cannot write {}", path.string()));
        out << log_to_jsonl(session);
        if (!out)
            throw IoError(fmt::format("write failed: {}", path.string()));
    }

    ReplayLog parse_log(const std::string &jsonl)
    {
        ReplayLog log;
        std::istringstream in(jsonl);
        std::string line;
        std::size_t line_no = 0;
        bool have_header = false;
        std::uint64_t last_seq = 0;
        std::uint64_t last_boundary = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.empty())
                continue;
            const auto where = [&](const std::string &what) {
                return FormatError(fmt::format("log line {}: {}", line_no, what));
            };
            json j;
            try
            {
                j = json::parse(line);
            }
            catch (const json::exception &e)
            {
                throw where(e.what());
            }
            try
            {
                const std::string type = j.at("type").get<std::string>();
                if (type == "session")
                {
                    if (have_header)
                        throw where("second session header");
                    have_header = true;
                    log.asset_path = j.at("asset").is_null() ? "" : j.at("asset").get<std::string>();
                    log.frame = j.at("frame").get<std::size_t>();
                    log.config = config_from_json(j.at("config"));
                }
                else if (type == "command")
                {
                    if (!have_header)
                        throw where("command before the session header");
                    LogEntry e;
                    e.seq = j.at("seq").get<std::uint64_t>();
                    e.boundary = j.at("boundary").get<std::uint64_t>();
                    if (e.seq <= last_seq || e.boundary < last_boundary)
                        throw where("sequence numbers and boundaries must increase");
                    last_seq = e.seq;
                    last_boundary = e.boundary;
                    e.command = command_from_json(j);
                    log.entries.push_back(std::move(e));
                }
                else if (type == "end")
                {
                    log.end_boundary = j.at("boundary").get<std::uint64_t>();
                    if (*log.end_boundary < last_boundary)
                        throw where("end boundary precedes a command");
                }
                else
                    throw where(fmt::format("unknown line type '{}'", type));
            }
            catch (const json::exception &e)
            {
                throw where(e.what());
            }
            catch (const ArgumentError &e)
            {
                throw where(e.what());
            }
        }
        if (!have_header)
            throw FormatError("log has no session header");
        return log;
    }

    ReplayLog read_log(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError(fmt::format("cannot open {}", path.string()));
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_log(buf.str());
    }

    Session replay(const ReplayLog &log, std::shared_ptr<const asset::SmokeAsset> asset)
    {
        if (!log.asset_path.empty() && !asset)
            throw ArgumentError("log refers to an asset but none was given");
        Session s(SessionSource{std::move(asset), log.asset_path, log.frame}, log.config);
        const auto run_to = [&](std::uint64_t boundary) {
            while (s.steps_taken() < boundary)
            {
                // Steps without a pending Step command came from the run timer.
                if (!s.advance())
                    s.step_now();
            }
        };
        for (const auto &e : log.entries)
        {
            run_to(e.boundary);
            const Ack ack = s.apply(e.command);
            if (!ack.accepted)
                throw FormatError(fmt::format("log entry {} no longer applies: {}", e.seq, ack.reason));
        }
        if (log.end_boundary)
            run_to(*log.end_boundary);
        else
            while (s.advance())
            {
            }
        return s;
    }

    Session replay(const std::filesystem::path &path)
    {
        const ReplayLog log = read_log(path);
        std::shared_ptr<const asset::SmokeAsset> asset;
        if (!log.asset_path.empty())
            asset = std::make_shared<asset::SmokeAsset>(asset::load_asset(log.asset_path));
        return replay(log, std::move(asset));
    }
} // namespace smokeforge::service
