#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "skitb/backend.hpp"

namespace skitb::wire {

using Json = nlohmann::json;

inline constexpr std::size_t kMaxMessageBytes = 16u << 20;

/// 4-byte big-endian payload length followed by the UTF-8 JSON payload.
std::string encode_message(const Json& msg);

/// Incremental decoder for a byte stream of framed messages.
class MessageDecoder {
public:
    void feed(std::string_view bytes);
    /// Next complete message, if any. Throws Protocol on oversize frames or malformed JSON.
    std::optional<Json> next();
    std::size_t buffered() const { return buffer_.size(); }

private:
    std::string buffer_;
};

/// Bidirectional byte stream to a peer.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void write_all(std::string_view bytes) = 0;
    /// Reads exactly n bytes; throws Protocol when the peer closes first.
    virtual std::string read_exact(std::size_t n) = 0;
};

void send_message(Transport& tx, const Json& msg);
Json receive_message(Transport& tx);

/// Owns a pair of file descriptors (may be the same socket).
class FdTransport : public Transport {
public:
    FdTransport(int read_fd, int write_fd);
    ~FdTransport() override;
    FdTransport(const FdTransport&) = delete;
    FdTransport& operator=(const FdTransport&) = delete;

    void write_all(std::string_view bytes) override;
    std::string read_exact(std::size_t n) override;
    void close_write();

private:
    int read_fd_;
    int write_fd_;
};

/// Child process spoken to over its stdin/stdout; `command` runs through /bin/sh -c.
class ProcessTransport final : public Transport {
public:
    explicit ProcessTransport(const std::string& command);
    ~ProcessTransport() override;

    void write_all(std::string_view bytes) override { io_->write_all(bytes); }
    std::string read_exact(std::size_t n) override { return io_->read_exact(n); }
    /// Closes stdin and reaps the child; returns its exit status (-1 if killed).
    int finish();

private:
    std::unique_ptr<FdTransport> io_;
    int pid_ = -1;
};

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port);

/// Listening socket on the loopback interface. Port 0 picks a free port.
class TcpListener {
public:
    explicit TcpListener(std::uint16_t port = 0);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }
    std::unique_ptr<Transport> accept();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// Message builders shared by host and test peers.
Json box_to_json(const geom::BBox& b);
geom::BBox box_from_json(const Json& j);
Json init_request(std::string_view cmd, const protocol::FrameContext& ctx, const geom::BBox& box,
                  double search_factor);
Json update_request(const protocol::FrameContext& ctx);
Json prediction_response(const metrics::Prediction& p);
/// Throws Protocol on an error response, missing fields or a confidence outside [0,1].
metrics::Prediction parse_prediction_response(const Json& j);

/// Peer side of a session: answers requests with `inner` until shutdown or end of stream.
/// Returns 0 after a shutdown request, 1 when the session ended otherwise. A bad request gets an
/// error response and ends the session.
int serve(Transport& tx, protocol::TrackerBackend& inner);

/// Tracker living in another process. Any transport failure or malformed reply marks the backend
/// failed; every later call throws Protocol.
class ExternalBackend final : public protocol::TrackerBackend {
public:
    explicit ExternalBackend(std::unique_ptr<Transport> transport, std::string label = "extern");
    ~ExternalBackend() override;

    std::string name() const override { return label_; }
    bool supports_reference_box() const override { return true; }
    bool failed() const { return failed_; }
    /// Sends shutdown; safe to call more than once.
    void shutdown();

protected:
    void do_init(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    metrics::Prediction do_update(const protocol::FrameContext& ctx) override;
    void do_reinit(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    void do_set_reference_box(const geom::BBox& box) override;

private:
    Json call(const Json& request);
    void expect_ack(const Json& reply, std::string_view cmd);

    std::unique_ptr<Transport> transport_;
    std::string label_;
    bool failed_ = false;
    bool closed_ = false;
};

/// "cmd:<shell command>" spawns a process; "tcp:<host>:<port>" connects to a server.
std::unique_ptr<ExternalBackend> external_backend(const std::string& target);

}  // namespace skitb::wire
