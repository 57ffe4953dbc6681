#include "smokeforge/server.hpp"

#include "smokeforge/error.hpp"

#include <boost/asio.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace smokeforge::service
{
    namespace asio = boost::asio;
    using asio::ip::tcp;

    std::uint16_t default_port()
    {
        const char *env = std::getenv("SMOKEFORGE_PORT");
        if (!env || !*env)
            return kDefaultPort;
        char *end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 0 || v > 65535)
        {
            spdlog::warn("ignoring SMOKEFORGE_PORT={}: not a port number", env);
            return kDefaultPort;
        }
        return static_cast<std::uint16_t>(v);
    }

    OutboundQueue::OutboundQueue(std::size_t frame_capacity) : capacity_(frame_capacity)
    {
        if (capacity_ < 1)
            throw ArgumentError("frame queue capacity must be at least 1");
    }

    bool OutboundQueue::push(std::shared_ptr<const std::string> line, bool droppable)
    {
        bool dropped = false;
        if (droppable)
        {
            const auto first = items_.begin() + (writing_ ? 1 : 0);
            const auto frames = std::count_if(first, items_.end(), [](const Item &i) { return i.droppable; });
            if (static_cast<std::size_t>(frames) >= capacity_)
            {
                items_.erase(std::find_if(first, items_.end(), [](const Item &i) { return i.droppable; }));
                dropped = true;
            }
        }
        items_.push_back({std::move(line), droppable});
        return dropped;
    }

    void OutboundQueue::begin_write()
    {
        if (items_.empty() || writing_)
            throw ArgumentError("nothing to write");
        writing_ = true;
    }

    void OutboundQueue::finish_write()
    {
        if (!writing_)
            throw ArgumentError("no write in flight");
        items_.pop_front();
        writing_ = false;
    }

    FrameSettings subscription_from_json(const json &params)
    {
        FrameSettings s;
        if (params.is_null())
            return s;
        if (!params.is_object())
            throw ArgumentError("'params' must be an object");
        try
        {
            for (const auto &[key, value] : params.items())
            {
                if (key == "mode")
                    s.mode = parse_payload_mode(value.get<std::string>());
                else if (key == "encoding")
                {
                    if (value.get<std::string>() != "base64")
                        throw ArgumentError("only the base64 encoding is supported");
                }
                else if (key == "slice_scale")
                    s.slice_scale = value.get<double>();
                else if (key == "width")
                    s.width = value.get<int>();
                else if (key == "height")
                    s.height = value.get<int>();
                else if (key == "samples")
                    s.render.samples_per_ray = value.get<int>();
                else if (key == "absorption")
                    s.render.absorption = value.get<double>();
                else if (key == "emission")
                    s.render.emission = value.get<double>();
                else if (key == "background")
                    s.render.background = value.get<double>();
                else
                    throw ArgumentError(fmt::format("unknown field '{}'", key));
            }
        }
        catch (const json::exception &e)
        {
            throw ArgumentError(e.what());
        }
        s.validate();
        return s;
    }

    namespace
    {
        using Clock = std::chrono::steady_clock;

        json error_message(const json &seq, const std::string &reason)
        {
            return {{"type", "error"}, {"seq", seq}, {"reason", reason}};
        }
    } // namespace

    struct Server::Impl
    {
        class Connection;

        struct Inbound
        {
            std::weak_ptr<Connection> conn;
            json seq;
            Command cmd;
        };

        struct Subscriber
        {
            std::weak_ptr<Connection> conn;
            FrameSettings settings;
        };

        class Connection : public std::enable_shared_from_this<Connection>
        {
        public:
            Connection(Impl &server, tcp::socket socket, std::uint64_t id)
                : server_(server), socket_(std::move(socket)), buffer_(server.options.max_line_bytes), id_(id)
            {
            }

            std::uint64_t id() const { return id_; }

            void start() { read(); }

            // Network thread only.
            void send(std::shared_ptr<const std::string> line, bool droppable)
            {
                if (!socket_.is_open())
                    return;
                if (queue_.push(std::move(line), droppable))
                    ++server_.frames_dropped;
                if (!queue_.writing())
                    write();
            }

            void close()
            {
                boost::system::error_code ec;
                socket_.shutdown(tcp::socket::shutdown_both, ec);
                socket_.close(ec);
                server_.forget(id_);
            }

        private:
            void reply(const json &message) { send(std::make_shared<const std::string>(message.dump() + "\n"), false); }

            void read()
            {
                asio::async_read_until(socket_, buffer_, '\n',
                                       [self = shared_from_this()](const boost::system::error_code &ec, std::size_t n) {
                                           self->on_read(ec, n);
                                       });
            }

            void on_read(const boost::system::error_code &ec, std::size_t n)
            {
                if (ec == asio::error::not_found)
                {
                    reply(error_message(nullptr, "line too long"));
                    close_after_flush_ = true;
                    return;
                }
                if (ec)
                {
                    close();
                    return;
                }
                std::string line(asio::buffers_begin(buffer_.data()), asio::buffers_begin(buffer_.data()) + n);
                buffer_.consume(n);
                while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
                    line.pop_back();
                if (!line.empty())
                    handle(line);
                read();
            }

            void handle(const std::string &line)
            {
                json message;
                try
                {
                    message = json::parse(line);
                }
                catch (const json::exception &e)
                {
                    reply(error_message(nullptr, fmt::format("invalid JSON: {}", e.what())));
                    return;
                }
                json seq = nullptr;
                if (message.is_object() && message.contains("seq"))
                {
                    seq = message["seq"];
                    if (!seq.is_number_integer())
                    {
                        reply(error_message(nullptr, "'seq' must be an integer"));
                        return;
                    }
                }
                try
                {
                    const std::string name =
                        message.is_object() && message.contains("cmd") && message["cmd"].is_string()
                            ? message["cmd"].get<std::string>()
                            : "";
                    if (name == "subscribe")
                    {
                        const FrameSettings settings =
                            subscription_from_json(message.value("params", json(nullptr)));
                        server_.subscribe(id_, weak_from_this(), settings);
                        reply({{"type", "ack"}, {"seq", seq}, {"cmd", name}});
                        return;
                    }
                    if (name == "unsubscribe")
                    {
                        server_.unsubscribe(id_);
                        reply({{"type", "ack"}, {"seq", seq}, {"cmd", name}});
                        return;
                    }
                    server_.post_command(Inbound{weak_from_this(), seq, command_from_json(message)});
                }
                catch (const Error &e)
                {
                    ++server_.commands_rejected;
                    reply(error_message(seq, e.what()));
                }
                catch (const json::exception &e)
                {
                    ++server_.commands_rejected;
                    reply(error_message(seq, e.what()));
                }
            }

            void write()
            {
                queue_.begin_write();
                asio::async_write(socket_, asio::buffer(*queue_.front()),
                                  [self = shared_from_this()](const boost::system::error_code &ec, std::size_t) {
                                      self->queue_.finish_write();
                                      if (ec)
                                      {
                                          self->close();
                                          return;
                                      }
                                      if (!self->queue_.empty())
                                          self->write();
                                      else if (self->close_after_flush_)
                                          self->close();
                                  });
            }

            Impl &server_;
            tcp::socket socket_;
            asio::streambuf buffer_;
            std::uint64_t id_;
            OutboundQueue queue_{server_.options.frame_queue};
            bool close_after_flush_ = false;
        };

        Impl(Session s, ServerOptions o) : session(std::move(s)), options(std::move(o)), acceptor(io) {}

        // Network thread.
        void accept()
        {
            acceptor.async_accept([this](const boost::system::error_code &ec, tcp::socket socket) {
                if (ec)
                    return;
                auto conn = std::make_shared<Connection>(*this, std::move(socket), next_connection_id++);
                {
                    std::lock_guard lock(registry_mutex);
                    connections[conn->id()] = conn;
                }
                conn->start();
                accept();
            });
        }

        void subscribe(std::uint64_t id, std::weak_ptr<Connection> conn, const FrameSettings &settings)
        {
            std::lock_guard lock(registry_mutex);
            subscribers[id] = Subscriber{std::move(conn), settings};
        }

        void unsubscribe(std::uint64_t id)
        {
            std::lock_guard lock(registry_mutex);
            subscribers.erase(id);
        }

        void forget(std::uint64_t id)
        {
            std::lock_guard lock(registry_mutex);
            subscribers.erase(id);
            connections.erase(id);
        }

        void post_command(Inbound in)
        {
            {
                std::lock_guard lock(mailbox_mutex);
                mailbox.push_back(std::move(in));
            }
            wake.notify_one();
        }

        // Owner thread from here on.
        void deliver(const std::weak_ptr<Connection> &weak, const json &message)
        {
            auto line = std::make_shared<const std::string>(message.dump() + "\n");
            asio::post(io, [weak, line] {
                if (auto conn = weak.lock())
                    conn->send(line, false);
            });
        }

        void publish()
        {
            std::vector<Subscriber> subs;
            {
                std::lock_guard lock(registry_mutex);
                for (const auto &[id, s] : subscribers)
                    subs.push_back(s);
            }
            // One frame per distinct subscription, shared by everyone on it.
            std::vector<std::pair<FrameSettings, std::shared_ptr<const std::string>>> rendered;
            for (const auto &s : subs)
            {
                std::shared_ptr<const std::string> line;
                for (const auto &[settings, l] : rendered)
                    if (settings == s.settings)
                        line = l;
                if (!line)
                {
                    line = std::make_shared<const std::string>(frame_to_json(session.frame(s.settings)).dump() + "\n");
                    rendered.emplace_back(s.settings, line);
                }
                asio::post(io, [weak = s.conn, line] {
                    if (auto conn = weak.lock())
                        conn->send(line, true);
                });
            }
            ++frames_published;
        }

        void apply(const Inbound &in)
        {
            const Ack ack = session.apply(in.cmd);
            json reply;
            if (ack.accepted)
            {
                ++commands_applied;
                reply = {{"type", "ack"},
                         {"seq", in.seq},
                         {"cmd", command_name(in.cmd)},
                         {"applied_seq", ack.seq},
                         {"step_index", ack.step_index}};
                if (ack.obstacle_id)
                    reply["obstacle_id"] = *ack.obstacle_id;
                if (log)
                    *log << log_line(session.log().back()).dump() << '\n' << std::flush;
            }
            else
            {
                ++commands_rejected;
                reply = error_message(in.seq, ack.reason);
                reply["cmd"] = command_name(in.cmd);
            }
            deliver(in.conn, reply);
            if (session.take_snapshot_request())
                publish();
        }

        void step(bool tick)
        {
            try
            {
                if (session.advance(tick))
                    publish();
            }
            catch (const Error &e)
            {
                spdlog::error("step failed, pausing: {}", e.what());
                session.apply(Pause{});
            }
        }

        void owner_loop()
        {
            const auto period = std::chrono::duration_cast<Clock::duration>(
                std::chrono::duration<double>(1.0 / options.step_rate));
            auto next_tick = Clock::now() + period;
            for (;;)
            {
                std::deque<Inbound> batch;
                {
                    std::unique_lock lock(mailbox_mutex);
                    const auto ready = [&] { return stopping || !mailbox.empty(); };
                    if (session.pending_steps() == 0)
                    {
                        if (session.mode() == RunMode::Running)
                            wake.wait_until(lock, next_tick, ready);
                        else
                            wake.wait(lock, ready);
                    }
                    if (stopping)
                        return;
                    batch.swap(mailbox);
                }
                for (const auto &in : batch)
                    apply(in);
                if (session.pending_steps() > 0)
                    step(false);
                else if (session.mode() == RunMode::Running && Clock::now() >= next_tick)
                {
                    step(true);
                    next_tick += period;
                    if (next_tick < Clock::now())
                        next_tick = Clock::now() + period;
                }
                else if (session.mode() == RunMode::Running && next_tick > Clock::now() + period)
                    next_tick = Clock::now() + period;
            }
        }

        Session session;
        ServerOptions options;
        asio::io_context io;
        tcp::acceptor acceptor;
        std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
        std::thread io_thread;
        std::thread owner_thread;
        std::optional<std::ofstream> log;

        std::mutex registry_mutex;
        std::map<std::uint64_t, std::weak_ptr<Connection>> connections;
        std::map<std::uint64_t, Subscriber> subscribers;
        std::uint64_t next_connection_id = 1;

        std::mutex mailbox_mutex;
        std::condition_variable wake;
        std::deque<Inbound> mailbox;
        bool stopping = false;
        bool started = false;
        bool stopped = false;

        std::atomic<std::uint64_t> frames_published{0};
        std::atomic<std::uint64_t> frames_dropped{0};
        std::atomic<std::uint64_t> commands_applied{0};
        std::atomic<std::uint64_t> commands_rejected{0};
    };

    Server::Server(Session session, ServerOptions options)
    {
        if (!(options.step_rate > 0) || options.frame_queue < 1 || options.max_line_bytes < 64)
            throw ArgumentError("server options: step rate must be positive, frame queue and line limit nonzero");
        impl_ = std::make_unique<Impl>(std::move(session), std::move(options));
    }

    Server::~Server() { stop(); }

    std::uint16_t Server::start()
    {
        Impl &s = *impl_;
        if (s.started)
            throw ArgumentError("server already started");
        boost::system::error_code ec;
        const auto address = asio::ip::make_address(s.options.address, ec);
        if (ec)
            throw ArgumentError(fmt::format("bad listen address '{}'", s.options.address));
        const tcp::endpoint endpoint(address, s.options.port);
        s.acceptor.open(endpoint.protocol());
        s.acceptor.set_option(tcp::acceptor::reuse_address(true));
        s.acceptor.bind(endpoint, ec);
        if (ec)
            throw IoError(fmt::format("cannot bind {}:{}: {}", s.options.address, s.options.port, ec.message()));
        s.acceptor.listen();
        if (s.options.log_path)
        {
            s.log.emplace(*s.options.log_path, std::ios::binary);
            if (!*s.log)
                throw IoError(fmt::format("cannot write {}", s.options.log_path->string()));
            *s.log << log_header(s.session).dump() << '\n' << std::flush;
        }
        s.started = true;
        s.work.emplace(asio::make_work_guard(s.io));
        s.accept();
        s.io_thread = std::thread([&s] { s.io.run(); });
        s.owner_thread = std::thread([&s] { s.owner_loop(); });
        return s.acceptor.local_endpoint().port();
    }

    void Server::stop()
    {
        Impl &s = *impl_;
        if (!s.started || s.stopped)
            return;
        s.stopped = true;
        {
            std::lock_guard lock(s.mailbox_mutex);
            s.stopping = true;
        }
        s.wake.notify_one();
        s.owner_thread.join();
        asio::post(s.io, [&s] {
            boost::system::error_code ec;
            s.acceptor.close(ec);
            std::vector<std::shared_ptr<Impl::Connection>> open;
            {
                std::lock_guard lock(s.registry_mutex);
                for (const auto &[id, weak] : s.connections)
                    if (auto c = weak.lock())
                        open.push_back(c);
            }
            for (const auto &c : open)
                c->close();
        });
        s.work.reset();
        s.io_thread.join();
        if (s.log)
            *s.log << log_end(s.session).dump() << '\n' << std::flush;
    }

    ServerStats Server::stats() const
    {
        return {impl_->frames_published, impl_->frames_dropped, impl_->commands_applied, impl_->commands_rejected};
    }
} // namespace smokeforge::service
