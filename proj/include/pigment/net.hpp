// SPDX-License-Identifier: Apache-2.0
#pragma once

// WebSocket plumbing (Boost.Beast): a text-message server with one handler per
// connection, and a blocking client Transport with per-call timeouts.

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <utility>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "pigment/error.hpp"
#include "pigment/transport.hpp"

namespace pigment {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

struct Endpoint {
    std::string host;
    std::string port;
    std::string path = "/";
};

// ws://host:port[/path]
inline Endpoint parse_ws_url(const std::string& url) {
    static const std::regex re(R"(^ws://([^:/]+):(\d+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ContractError("bad_url", "expected ws://host:port[/path], got '" + url + "'");
    return {m[1], m[2], m[3].matched ? std::string(m[3]) : "/"};
}

// host:port
inline std::pair<std::string, unsigned short> parse_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw ContractError("bad_listen", "expected host:port, got '" + listen + "'");
    try {
        const int port = std::stoi(listen.substr(colon + 1));
        if (port < 0 || port > 65535) throw std::out_of_range("port");
        return {listen.substr(0, colon), static_cast<unsigned short>(port)};
    } catch (const std::logic_error&) {
        throw ContractError("bad_listen", "bad port in '" + listen + "'");
    }
}

// ---------------------------------------------------------------------------
// Client

class WebSocketTransport final : public Transport {
public:
    explicit WebSocketTransport(std::string url) : endpoint_(parse_ws_url(url)) {}

    std::string round_trip(const std::string& request, std::chrono::milliseconds timeout) override {
        std::lock_guard lock(mutex_);
        if (!ws_) connect(timeout);
        std::optional<beast::error_code> result;
        beast::flat_buffer buffer;
        ws_->text(true);
        ws_->async_write(net::buffer(request), [&](beast::error_code ec, std::size_t) {
            if (ec) {
                result = ec;
                return;
            }
            ws_->async_read(buffer, [&](beast::error_code ec2, std::size_t) { result = ec2; });
        });
        run(timeout, result);
        if (*result) {
            ws_.reset();
            throw TransportError("disconnected", "backend connection failed: " + result->message());
        }
        return beast::buffers_to_string(buffer.data());
    }

private:
    void connect(std::chrono::milliseconds timeout) {
        ws_ = std::make_unique<websocket::stream<beast::tcp_stream>>(ioc_);
        std::optional<beast::error_code> result;
        tcp::resolver resolver(ioc_);
        resolver.async_resolve(endpoint_.host, endpoint_.port, [&](beast::error_code ec, tcp::resolver::results_type hits) {
            if (ec) {
                result = ec;
                return;
            }
            beast::get_lowest_layer(*ws_).async_connect(hits, [&](beast::error_code ec2, const tcp::endpoint&) {
                if (ec2) {
                    result = ec2;
                    return;
                }
                ws_->async_handshake(endpoint_.host + ":" + endpoint_.port, endpoint_.path,
                                     [&](beast::error_code ec3) { result = ec3; });
            });
        });
        run(timeout, result);
        if (*result) {
            ws_.reset();
            throw TransportError("disconnected", "cannot reach backend at " + endpoint_.host + ":" + endpoint_.port + ": " +
                                                     result->message());
        }
    }

    // Drive the io_context until the chain completes or the deadline passes.
    // On timeout the socket is closed and pending handlers drained, so no
    // callback outlives the caller's stack frame.
    void run(std::chrono::milliseconds timeout, std::optional<beast::error_code>& result) {
        ioc_.restart();
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (!result && std::chrono::steady_clock::now() < deadline) {
            if (ioc_.run_one_until(deadline) == 0 && ioc_.stopped()) break;
        }
        if (!result) {
            beast::error_code ignored;
            beast::get_lowest_layer(*ws_).socket().close(ignored);
            ioc_.restart();
            ioc_.run();
            ws_.reset();
            throw TransportError("timeout", "backend did not answer within " + std::to_string(timeout.count()) + " ms");
        }
    }

    Endpoint endpoint_;
    net::io_context ioc_;
    std::unique_ptr<websocket::stream<beast::tcp_stream>> ws_;
    std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Server

// Per-connection message handler. `send` may be called from any thread.
class ConnectionHandler {
public:
    virtual ~ConnectionHandler() = default;
    virtual void on_message(const std::string& text) = 0;
};

using Sender = std::function<void(std::string)>;
using HandlerFactory = std::function<std::unique_ptr<ConnectionHandler>(Sender)>;

namespace detail {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket socket, HandlerFactory& factory) : ws_(std::move(socket)), factory_(factory) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            std::weak_ptr<WsConnection> weak = self;
            auto executor = self->ws_.get_executor();
            self->handler_ = self->factory_([weak, executor](std::string text) {
                net::post(executor, [weak, text = std::move(text)]() mutable {
                    if (auto s = weak.lock()) s->enqueue(std::move(text));
                });
            });
            self->read();
        });
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->handler_.reset();
                return;
            }
            const auto text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            try {
                self->handler_->on_message(text);
            } catch (const std::exception&) {
                // A handler that cannot cope drops its own connection, not the server.
                self->handler_.reset();
                return;
            }
            self->read();
        });
    }

    void enqueue(std::string text) {
        outgoing_.push_back(std::move(text));
        if (outgoing_.size() == 1) write();
    }

    void write() {
        ws_.text(true);
        ws_.async_write(net::buffer(outgoing_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            self->outgoing_.pop_front();
            if (!self->outgoing_.empty()) self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    HandlerFactory& factory_;
    std::unique_ptr<ConnectionHandler> handler_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outgoing_;
};

}  // namespace detail

// Single io thread. Port 0 binds an ephemeral port; see port().
class WebSocketServer {
public:
    WebSocketServer(const std::string& host, unsigned short port, HandlerFactory factory)
        : factory_(std::move(factory)), acceptor_(ioc_) {
        const tcp::endpoint ep(net::ip::make_address(host), port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen();
        accept();
    }

    ~WebSocketServer() { stop(); }

    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    void run() { ioc_.run(); }
    void start() {
        thread_ = std::thread([this] { ioc_.run(); });
    }
    void stop() {
        ioc_.stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    void accept() {
        acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
            if (!ec) std::make_shared<detail::WsConnection>(std::move(socket), factory_)->start();
            accept();
        });
    }

    HandlerFactory factory_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    std::thread thread_;
};

}  // namespace pigment
