#pragma once

#include "smokeforge/service.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

// Line-delimited JSON over TCP. Client messages are {seq, cmd, params};
// the server answers {"type":"ack"|"error", seq, ...} and broadcasts
// {"type":"frame", ...} to subscribers after every step.
//
// Besides the session commands a client may send
//   {"cmd":"subscribe","params":{"mode":"slice"|"render","encoding":"base64",
//     "slice_scale","width","height","samples","absorption","emission","background"}}
//   {"cmd":"unsubscribe"}
namespace smokeforge::service
{
    inline constexpr std::uint16_t kDefaultPort = 7878;

    // SMOKEFORGE_PORT if set and valid (0 picks a free port), else kDefaultPort.
    std::uint16_t default_port();

    struct ServerOptions
    {
        std::string address = "127.0.0.1";
        std::uint16_t port = 0; // 0 picks a free port
        double step_rate = 30.0; // steps per second while running
        // Frames waiting for a slow client beyond this count are dropped,
        // oldest first. Acks are never dropped.
        std::size_t frame_queue = 8;
        std::size_t max_line_bytes = 1 << 20;
        std::optional<std::filesystem::path> log_path;
    };

    // Per-client send queue. Frames beyond the capacity push out the oldest
    // frame that is not being written; everything else keeps its order and
    // acks are never dropped.
    class OutboundQueue
    {
    public:
        explicit OutboundQueue(std::size_t frame_capacity);

        // Returns true when an older frame was dropped to make room.
        bool push(std::shared_ptr<const std::string> line, bool droppable);

        bool empty() const { return items_.empty(); }
        std::size_t size() const { return items_.size(); }
        const std::shared_ptr<const std::string> &front() const { return items_.front().line; }
        bool writing() const { return writing_; }
        // The front item is handed to the socket; it can no longer be dropped.
        void begin_write();
        // The front item finished writing.
        void finish_write();

    private:
        struct Item
        {
            std::shared_ptr<const std::string> line;
            bool droppable = false;
        };
        std::size_t capacity_;
        std::deque<Item> items_;
        bool writing_ = false;
    };

    // Parses subscribe params into frame settings. Throws ArgumentError.
    FrameSettings subscription_from_json(const json &params);

    struct ServerStats
    {
        std::uint64_t frames_published = 0;
        std::uint64_t frames_dropped = 0;
        std::uint64_t commands_applied = 0;
        std::uint64_t commands_rejected = 0;
    };

    // One simulation owner thread plus one network thread. The session is
    // only touched by the owner; commands reach it through a mailbox and
    // are applied between steps.
    class Server
    {
    public:
        Server(Session session, ServerOptions options);
        ~Server();
        Server(const Server &) = delete;
        Server &operator=(const Server &) = delete;

        // Binds and starts both threads. Returns the bound port.
        std::uint16_t start();
        // Idempotent. Closes every connection and finishes the log.
        void stop();

        ServerStats stats() const;

    private:
        struct Impl;
        std::unique_ptr<Impl> impl_;
    };
} // namespace smokeforge::service
