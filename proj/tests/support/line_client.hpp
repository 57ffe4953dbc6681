#pragma once

#include <boost/asio.hpp>
#include <json.hpp>

#include <sys/socket.h>
#include <sys/time.h>

#include <cstdint>
#include <string>

namespace smokeforge::testing
{
    // Blocking JSON-lines client. Reads give up after a timeout instead of
    // hanging the test.
    class LineClient
    {
    public:
        explicit LineClient(std::uint16_t port, int timeout_s = 20) : socket_(io_)
        {
            socket_.connect({boost::asio::ip::make_address("127.0.0.1"), port});
            timeval tv{timeout_s, 0};
            ::setsockopt(socket_.native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        }

        void send_raw(const std::string &text) { boost::asio::write(socket_, boost::asio::buffer(text)); }
        void send(const nlohmann::json &message) { send_raw(message.dump() + "\n"); }

        nlohmann::json receive()
        {
            const std::size_t n = boost::asio::read_until(socket_, buffer_, '\n');
            std::string line(boost::asio::buffers_begin(buffer_.data()), boost::asio::buffers_begin(buffer_.data()) + n);
            buffer_.consume(n);
            return nlohmann::json::parse(line);
        }

        // Next message of the given type; others are collected in `skipped`.
        nlohmann::json receive_type(const std::string &type)
        {
            for (;;)
            {
                nlohmann::json m = receive();
                if (m.at("type") == type)
                    return m;
                skipped.push_back(std::move(m));
            }
        }

        std::vector<nlohmann::json> skipped;

    private:
        boost::asio::io_context io_;
        boost::asio::ip::tcp::socket socket_;
        boost::asio::streambuf buffer_;
    };
} // namespace smokeforge::testing
