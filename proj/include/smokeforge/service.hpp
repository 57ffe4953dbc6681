#pragma once

#include "smokeforge/asset.hpp"
#include "smokeforge/image.hpp"
#include "smokeforge/render.hpp"
#include "smokeforge/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Interactive simulation session: edit commands applied between steps, frame
// snapshots for streaming, and a JSONL command log that replays exactly.
namespace smokeforge::service
{
    using nlohmann::json;

    struct SetWind
    {
        std::vector<solver::WindForce> winds;
        bool operator==(const SetWind &) const = default;
    };
    struct AddObstacle
    {
        solver::SphereObstacle obstacle;
        bool operator==(const AddObstacle &) const = default;
    };
    struct RemoveObstacle
    {
        std::uint64_t id = 0;
        bool operator==(const RemoveObstacle &) const = default;
    };
    struct SetBuoyancy
    {
        double value = 0.0;
        bool operator==(const SetBuoyancy &) const = default;
    };
    struct Step
    {
        std::uint64_t count = 1;
        bool operator==(const Step &) const = default;
    };
    struct Pause
    {
        bool operator==(const Pause &) const = default;
    };
    struct Resume
    {
        bool operator==(const Resume &) const = default;
    };
    struct Reset
    {
        std::size_t frame = 1; // 1-based asset frame
        bool operator==(const Reset &) const = default;
    };
    struct Snapshot
    {
        bool operator==(const Snapshot &) const = default;
    };

    using Command = std::variant<SetWind, AddObstacle, RemoveObstacle, SetBuoyancy, Step, Pause, Resume, Reset, Snapshot>;

    inline constexpr std::uint64_t kMaxStepsPerCommand = 1'000'000;

    // Wire name: set_wind, add_obstacle, remove_obstacle, set_buoyancy,
    // step, pause, resume, reset, snapshot.
    std::string command_name(const Command &cmd);

    // Checks parameter invariants (finite values, positive radius, step
    // count in [1, kMaxStepsPerCommand], frame >= 1). Throws ArgumentError.
    void validate(const Command &cmd);

    // {"cmd": name, "params": {...}}. Parsing throws ArgumentError on any
    // malformed or unknown input and validates the result.
    json command_to_json(const Command &cmd);
    Command command_from_json(const json &message);

    json wind_to_json(const solver::WindForce &wind);
    solver::WindForce wind_from_json(const json &j);
    json config_to_json(const solver::SimConfig &config);
    solver::SimConfig config_from_json(const json &j);

    // Standard base64 (OpenSSL), no line breaks.
    std::string base64_encode(const std::vector<std::uint8_t> &bytes);
    std::vector<std::uint8_t> base64_decode(const std::string &text);

    enum class PayloadMode
    {
        Slice,  // mid-plane density slice, +Y up
        Render, // volume render from the front view
    };

    std::string payload_mode_name(PayloadMode mode);
    PayloadMode parse_payload_mode(const std::string &name);

    struct FrameSettings
    {
        PayloadMode mode = PayloadMode::Slice;
        double slice_scale = 1.0;
        int width = 128; // render only
        int height = 128;
        render::RenderSettings render;

        void validate() const;
        bool operator==(const FrameSettings &) const = default;
    };

    struct FrameMessage
    {
        std::uint64_t step_index = 0;
        std::uint64_t boundary = 0; // steps taken by the session; never decreases
        double clock = 0.0;
        PayloadMode mode = PayloadMode::Slice;
        image::Frame image;
        double max_divergence = 0.0;
        double total_mass = 0.0;
    };

    // {"type":"frame", step_index, boundary, clock, mode, width, height, channels,
    //  encoding:"base64-u8", payload, max_divergence, total_mass}
    json frame_to_json(const FrameMessage &frame);
    // Decodes the 8-bit payload back to [0,1] pixels.
    FrameMessage frame_from_json(const json &j);

    // Where Reset draws its state from. Without an asset the session uses
    // the reference plume, which has a single frame.
    struct SessionSource
    {
        std::shared_ptr<const asset::SmokeAsset> asset;
        std::string asset_path; // recorded in the command log
        std::size_t frame = 1;
    };

    solver::SimState initial_state(const SessionSource &source, std::size_t frame, const solver::SimConfig &config);

    enum class RunMode
    {
        Paused,
        Running,
    };

    struct Ack
    {
        bool accepted = false;
        std::uint64_t seq = 0;        // session sequence number, 0 when rejected
        std::uint64_t step_index = 0; // step boundary the command applies at
        std::optional<std::uint64_t> obstacle_id;
        std::string reason; // rejection reason
    };

    struct LogEntry
    {
        std::uint64_t seq = 0;
        // Steps executed by the session before the command, counted across
        // resets (unlike SimState::step_index).
        std::uint64_t boundary = 0;
        Command command;
    };

    // Single-owner session. apply() is only ever called between steps, so
    // every accepted command takes effect at the current step boundary.
    class Session
    {
    public:
        Session(SessionSource source, solver::SimConfig config);

        // Rejected commands leave the session untouched.
        Ack apply(const Command &cmd);

        // Runs one step if a Step command is pending, or if `tick` is set and
        // the session is running. Returns nothing when no step was taken.
        std::optional<solver::StepReport> advance(bool tick = false);
        // One step regardless of mode or queue; used by replay.
        solver::StepReport step_now();

        // Pops a pending Snapshot request.
        bool take_snapshot_request();

        FrameMessage frame(const FrameSettings &settings) const;

        const solver::SimState &state() const { return state_; }
        const solver::SimConfig &config() const { return config_; }
        const SessionSource &source() const { return source_; }
        const solver::SimConfig &initial_config() const { return initial_config_; }
        RunMode mode() const { return mode_; }
        std::uint64_t pending_steps() const { return pending_steps_; }
        std::uint64_t last_seq() const { return seq_; }
        std::uint64_t steps_taken() const { return steps_taken_; }
        const std::map<std::uint64_t, solver::SphereObstacle> &obstacles() const { return obstacles_; }
        const std::vector<LogEntry> &log() const { return log_; }

    private:
        void apply_valid(const Command &cmd, Ack &ack);

        SessionSource source_;
        solver::SimConfig initial_config_;
        solver::SimConfig config_;
        solver::SimState state_;
        std::map<std::uint64_t, solver::SphereObstacle> obstacles_;
        std::uint64_t next_obstacle_id_ = 1;
        RunMode mode_ = RunMode::Paused;
        std::uint64_t pending_steps_ = 0;
        std::uint64_t seq_ = 0;
        std::uint64_t steps_taken_ = 0;
        bool snapshot_requested_ = false;
        std::vector<LogEntry> log_;
    };

    // JSONL: a "session" header (asset path, frame, config), one "command"
    // line per accepted command, and an "end" line with the final boundary.
    void write_log(const Session &session, const std::filesystem::path &path);
    std::string log_to_jsonl(const Session &session);
    json log_header(const Session &session);
    json log_line(const LogEntry &entry);
    json log_end(const Session &session);

    struct ReplayLog
    {
        std::string asset_path;
        std::size_t frame = 1;
        solver::SimConfig config;
        std::vector<LogEntry> entries;
        std::optional<std::uint64_t> end_boundary;
    };

    ReplayLog parse_log(const std::string &jsonl);
    ReplayLog read_log(const std::filesystem::path &path);

    // Rebuilds the session by applying each command at its recorded step
    // boundary, then runs on to the end boundary (or drains pending steps).
    Session replay(const ReplayLog &log, std::shared_ptr<const asset::SmokeAsset> asset);
    // Loads the asset named in the log, if any.
    Session replay(const std::filesystem::path &path);
} // namespace smokeforge::service
