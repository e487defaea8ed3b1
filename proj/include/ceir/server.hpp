// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// HTTP + WebSocket transport for Service, built on Boost.Beast. Link with Threads.
//
// WebSocket protocol on /sessions/{id}/stream:
//   server -> client  text   {"type":"frame","revision":N,"width":W,"height":H}
//                     binary PNG bytes of that frame (always directly after its header)
//   client -> server  text   {"op":"camera"|"iso"|"pick"|...,"body":{...}}
//   server -> client  text   {"type":"reply","op":...,"status":...,"body":{...}}
// The current frame is pushed on connect and after every mutation of the session.

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "ceir/service.hpp"

namespace ceir {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace detail {

inline void add_cors(http::response<http::string_body>& res) {
    res.set(http::field::access_control_allow_origin, "*");
    res.set(http::field::access_control_allow_methods, "GET, POST, PUT, DELETE, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type, Accept");
    res.set(http::field::access_control_expose_headers, "X-Revision, X-Width, X-Height");
}

/// Returns the session id when `target` is /sessions/{id}/stream.
inline std::optional<std::string> stream_session(std::string_view target) {
    const auto parts = split_path(target);
    if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "stream") return std::string(parts[1]);
    return std::nullopt;
}

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket&& socket, Service& svc, net::thread_pool& pool, std::string session)
        : ws_(std::move(socket)), svc_(svc), pool_(pool), session_(std::move(session)) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
    }

private:
    struct Outgoing {
        bool binary = false;
        std::shared_ptr<const std::string> text;
        std::shared_ptr<const std::vector<std::uint8_t>> bytes;
    };

    void on_accept(beast::error_code ec) {
        if (ec) return;
        std::weak_ptr<WsConnection> weak = weak_from_this();
        try {
            token_ = svc_.subscribe(session_, [weak](const FramePush& f) {
                if (auto self = weak.lock())
                    net::post(self->ws_.get_executor(), [self, f] { self->enqueue_frame(f); });
            });
        } catch (const std::exception&) {
            return;
        }
        subscribed_ = true;
        // Initial frame for this client only.
        auto self = shared_from_this();
        net::post(pool_, [self] {
            try {
                const FramePush f = self->svc_.frame(self->session_);
                net::post(self->ws_.get_executor(), [self, f] { self->enqueue_frame(f); });
            } catch (const std::exception&) {
            }
        });
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            close();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        // Commands may render or segment; run them off the I/O threads, in arrival order.
        auto self = shared_from_this();
        net::post(pool_, [self, text] {
            nlohmann::json msg;
            std::string op;
            ApiResponse r;
            try {
                msg = nlohmann::json::parse(text);
                op = msg.value("op", "");
                r = self->svc_.command(self->session_, msg);
            } catch (const std::exception& e) {
                r = ApiResponse::json(400, {{"error", std::string("malformed command: ") + e.what()}, {"field", "body"}});
            }
            nlohmann::json body = nlohmann::json::parse(r.body, nullptr, false);
            if (body.is_discarded()) body = nlohmann::json::object();
            auto reply = std::make_shared<const std::string>(
                nlohmann::json{{"type", "reply"}, {"op", op}, {"status", r.status}, {"body", body}}.dump());
            net::post(self->ws_.get_executor(), [self, reply] { self->enqueue({false, reply, nullptr}); });
            if (r.mutated) self->svc_.publish(self->session_);
        });
        do_read();
    }

    void enqueue_frame(const FramePush& f) {
        auto header = std::make_shared<const std::string>(
            nlohmann::json{{"type", "frame"}, {"revision", f.revision}, {"width", f.width}, {"height", f.height}}.dump());
        enqueue({false, header, nullptr});
        enqueue({true, nullptr, f.png});
    }

    void enqueue(Outgoing m) {
        queue_.push_back(std::move(m));
        if (queue_.size() == 1) write_next();
    }

    void write_next() {
        const Outgoing& m = queue_.front();
        ws_.binary(m.binary);
        auto done = beast::bind_front_handler(&WsConnection::on_write, shared_from_this());
        if (m.binary) ws_.async_write(net::buffer(*m.bytes), std::move(done));
        else ws_.async_write(net::buffer(*m.text), std::move(done));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) {
            close();
            return;
        }
        queue_.pop_front();
        if (!queue_.empty()) write_next();
    }

    void close() {
        if (subscribed_) svc_.unsubscribe(session_, token_);
        subscribed_ = false;
    }

    websocket::stream<beast::tcp_stream> ws_;
    Service& svc_;
    net::thread_pool& pool_;
    std::string session_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> queue_;
    std::uint64_t token_ = 0;
    bool subscribed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket&& socket, Service& svc, net::thread_pool& pool)
        : stream_(std::move(socket)), svc_(svc), pool_(pool) {}

    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
    }

private:
    void do_read() {
        req_ = {};
        parser_.emplace();
        parser_->body_limit(64 * 1024 * 1024);
        stream_.expires_after(std::chrono::seconds(120));
        http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            beast::error_code ignored;
            stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
            return;
        }
        req_ = parser_->release();
        if (websocket::is_upgrade(req_)) {
            const auto sid = stream_session(std::string_view(req_.target().data(), req_.target().size()));
            if (sid && svc_.has_session(*sid)) {
                stream_.expires_never();
                std::make_shared<WsConnection>(stream_.release_socket(), svc_, pool_, *sid)->run(std::move(req_));
                return;
            }
        }
        // Handlers may render or segment; run them off the I/O threads.
        auto self = shared_from_this();
        net::post(pool_, [self] {
            auto res = std::make_shared<http::response<http::string_body>>(self->respond());
            net::post(self->stream_.get_executor(), [self, res] { self->send(res); });
        });
    }

    http::response<http::string_body> respond() {
        http::response<http::string_body> res;
        res.version(req_.version());
        res.keep_alive(req_.keep_alive());
        res.set(http::field::server, "ceir");
        add_cors(res);
        if (req_.method() == http::verb::options) {
            res.result(http::status::no_content);
            return res;
        }
        if (websocket::is_upgrade(req_)) {
            const auto sid = stream_session(std::string_view(req_.target().data(), req_.target().size()));
            res.result(sid ? http::status::not_found : http::status::bad_request);
            res.set(http::field::content_type, "application/json");
            res.body() = nlohmann::json{{"error", sid ? "unknown session '" + *sid + "'" : std::string("no such stream")}}.dump();
            res.prepare_payload();
            return res;
        }
        const ApiResponse r = svc_.handle(std::string(req_.method_string()), std::string(req_.target()), req_.body(),
                                          std::string(req_[http::field::accept]));
        mutated_ = r.mutated ? r.session_id : std::string();
        res.result(static_cast<http::status>(r.status));
        res.set(http::field::content_type, r.content_type);
        for (const auto& [k, v] : r.headers) res.set(k, v);
        res.body() = r.body;
        res.prepare_payload();
        return res;
    }

    void send(std::shared_ptr<http::response<http::string_body>> res) {
        res_ = std::move(res);
        http::async_write(stream_, *res_, beast::bind_front_handler(&HttpConnection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (!mutated_.empty()) {
            auto self = shared_from_this();
            net::post(pool_, [self, id = mutated_] { self->svc_.publish(id); });
            mutated_.clear();
        }
        if (ec) return;
        if (!res_->keep_alive()) {
            beast::error_code ignored;
            stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
            return;
        }
        do_read();
    }

    beast::tcp_stream stream_;
    Service& svc_;
    net::thread_pool& pool_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
    http::request<http::string_body> req_;
    std::shared_ptr<http::response<http::string_body>> res_;
    std::string mutated_;
};

}  // namespace detail

/// Listens on `address:port` (port 0 picks a free one). I/O runs on `io_threads`; request
/// handling, rendering and frame pushes run on a separate single worker so that mutations of
/// a session are applied in arrival order.
class Server {
public:
    Server(Service& svc, const std::string& address, unsigned short port, unsigned io_threads = 2)
        : svc_(svc), ioc_(static_cast<int>(io_threads)), acceptor_(net::make_strand(ioc_)), pool_(1),
          io_threads_(io_threads == 0 ? 1 : io_threads) {
        const tcp::endpoint ep(net::ip::make_address(address), port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen(net::socket_base::max_listen_connections);
    }

    ~Server() { stop(); }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    void start() {
        do_accept();
        for (unsigned i = 0; i < io_threads_; ++i) threads_.emplace_back([this] { ioc_.run(); });
    }

    /// Blocks until stop() is called from another thread or a signal handler.
    void wait() {
        for (auto& t : threads_)
            if (t.joinable()) t.join();
    }

    void stop() {
        ioc_.stop();
        for (auto& t : threads_)
            if (t.joinable()) t.join();
        threads_.clear();
        pool_.join();
    }

private:
    void do_accept() {
        acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
            if (!ec) std::make_shared<detail::HttpConnection>(std::move(socket), svc_, pool_)->run();
            if (acceptor_.is_open()) do_accept();
        });
    }

    Service& svc_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    net::thread_pool pool_;
    unsigned io_threads_;
    std::vector<std::thread> threads_;
};

}  // namespace ceir
