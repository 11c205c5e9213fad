#include "skitb/wire.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

#include "skitb/error.hpp"
#include "skitb/textio.hpp"

namespace skitb::wire {

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] {
        struct sigaction sa {};
        if (sigaction(SIGPIPE, nullptr, &sa) == 0 && sa.sa_handler == SIG_DFL) {
            sa.sa_handler = SIG_IGN;
            sigaction(SIGPIPE, &sa, nullptr);
        }
    });
}

std::uint32_t read_be32(std::string_view b) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

Json parse_payload(std::string_view payload) {
    auto j = Json::parse(payload.begin(), payload.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::Protocol, "wire: payload is not a JSON object");
    return j;
}

double number_field(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        fail(ErrorCode::Protocol, std::string("wire: missing numeric field '") + key + "'");
    }
    return it->get<double>();
}

}  // namespace

std::string encode_message(const Json& msg) {
    const std::string payload = msg.dump();
    if (payload.size() > kMaxMessageBytes) fail(ErrorCode::Protocol, "wire: message too large");
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out += payload;
    return out;
}

void MessageDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<Json> MessageDecoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    const auto n = read_be32(buffer_);
    if (n > kMaxMessageBytes) fail(ErrorCode::Protocol, "wire: frame length " + std::to_string(n) + " exceeds limit");
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    auto msg = parse_payload(std::string_view(buffer_).substr(4, n));
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    return msg;
}

void send_message(Transport& tx, const Json& msg) { tx.write_all(encode_message(msg)); }

Json receive_message(Transport& tx) {
    const auto header = tx.read_exact(4);
    const auto n = read_be32(header);
    if (n > kMaxMessageBytes) fail(ErrorCode::Protocol, "wire: frame length " + std::to_string(n) + " exceeds limit");
    return parse_payload(tx.read_exact(n));
}

FdTransport::FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) { ignore_sigpipe(); }

FdTransport::~FdTransport() {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

void FdTransport::write_all(std::string_view bytes) {
    if (write_fd_ < 0) fail(ErrorCode::Protocol, "wire: write side closed");
    while (!bytes.empty()) {
        const auto n = ::write(write_fd_, bytes.data(), bytes.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(ErrorCode::Protocol, std::string("wire: write failed: ") + std::strerror(errno));
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string FdTransport::read_exact(std::size_t n) {
    std::string out(n, '\0');
    std::size_t got = 0;
    while (got < n) {
        const auto r = ::read(read_fd_, out.data() + got, n - got);
        if (r < 0) {
            if (errno == EINTR) continue;
            fail(ErrorCode::Protocol, std::string("wire: read failed: ") + std::strerror(errno));
        }
        if (r == 0) fail(ErrorCode::Protocol, "wire: peer closed the connection");
        got += static_cast<std::size_t>(r);
    }
    return out;
}

void FdTransport::close_write() {
    if (write_fd_ < 0) return;
    if (write_fd_ == read_fd_) {
        ::shutdown(write_fd_, SHUT_WR);
    } else {
        ::close(write_fd_);
    }
    write_fd_ = -1;
}

ProcessTransport::ProcessTransport(const std::string& command) {
    int to_child[2];
    int from_child[2];
    // Close-on-exec so concurrently spawned peers do not inherit each other's pipe ends.
    if (::pipe2(to_child, O_CLOEXEC) != 0) fail(ErrorCode::Io, "wire: pipe() failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        fail(ErrorCode::Io, "wire: pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) fail(ErrorCode::Io, "wire: fork() failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    pid_ = pid;
    io_ = std::make_unique<FdTransport>(from_child[0], to_child[1]);
}

int ProcessTransport::finish() {
    if (pid_ < 0) return -1;
    io_->close_write();
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (true) {
        const auto r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_) break;
        if (r < 0 && errno != EINTR) {
            pid_ = -1;
            return -1;
        }
        if (std::chrono::steady_clock::now() > deadline) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    pid_ = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ProcessTransport::~ProcessTransport() { finish(); }

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0) {
        fail(ErrorCode::Io, "wire: cannot resolve " + host);
    }
    int fd = -1;
    for (auto* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) fail(ErrorCode::Io, "wire: cannot connect to " + host + ":" + service);
    return std::make_unique<FdTransport>(fd, fd);
}

TcpListener::TcpListener(std::uint16_t port) {
    ignore_sigpipe();
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) fail(ErrorCode::Io, "wire: socket() failed");
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    socklen_t len = sizeof addr;
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0 ||
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        ::close(fd_);
        fail(ErrorCode::Io, "wire: cannot listen on port " + std::to_string(port));
    }
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Transport> TcpListener::accept() {
    while (true) {
        const int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (c >= 0) return std::make_unique<FdTransport>(c, c);
        if (errno != EINTR) fail(ErrorCode::Io, std::string("wire: accept failed: ") + std::strerror(errno));
    }
}

int serve(Transport& tx, protocol::TrackerBackend& inner) {
    auto context = [](const Json& req) {
        protocol::FrameContext ctx;
        const double t = number_field(req, "t");
        if (t < 0.0) fail(ErrorCode::Protocol, "wire: negative frame index");
        ctx.t = static_cast<std::size_t>(t);
        ctx.dims = {number_field(req, "width"), number_field(req, "height")};
        if (const auto it = req.find("image"); it != req.end() && it->is_string()) ctx.image_path = it->get<std::string>();
        return ctx;
    };
    while (true) {
        Json req;
        try {
            req = receive_message(tx);
        } catch (const Error& e) {
            // End of stream is a plain hang-up; anything else deserves an answer.
            if (std::string_view(e.what()).find("peer closed") == std::string_view::npos) {
                try {
                    send_message(tx, Json{{"error", e.what()}});
                } catch (const Error&) {
                }
            }
            return 1;
        }
        Json reply;
        try {
            const auto cmd = req.value("cmd", std::string());
            if (cmd == "shutdown") return 0;
            if (cmd == "init" || cmd == "reinit") {
                const auto ctx = context(req);
                const auto box = box_from_json(req.value("box", Json()));
                if (const auto it = req.find("search_factor"); it != req.end() && it->is_number()) {
                    inner.set_search_area_factor(it->get<double>());
                }
                if (cmd == "init") {
                    inner.init(ctx, box);
                } else {
                    inner.reinit(ctx, box);
                }
                reply = Json{{"ok", true}};
            } else if (cmd == "update") {
                if (!inner.initialized()) fail(ErrorCode::NoInit, "not initialized");
                reply = prediction_response(inner.update(context(req)));
            } else if (cmd == "set_ref") {
                const auto box = box_from_json(req.value("box", Json()));
                if (inner.supports_reference_box()) inner.set_reference_box(box);
                reply = Json{{"ok", true}};
            } else {
                fail(ErrorCode::Protocol, "unknown command '" + cmd + "'");
            }
        } catch (const std::exception& e) {
            try {
                send_message(tx, Json{{"error", e.what()}});
            } catch (const Error&) {
            }
            return 1;
        }
        send_message(tx, reply);
    }
}

Json box_to_json(const geom::BBox& b) { return Json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

geom::BBox box_from_json(const Json& j) {
    if (!j.is_object()) fail(ErrorCode::Protocol, "wire: box must be an object");
    return {number_field(j, "x"), number_field(j, "y"), number_field(j, "w"), number_field(j, "h")};
}

Json init_request(std::string_view cmd, const protocol::FrameContext& ctx, const geom::BBox& box,
                  double search_factor) {
    Json j{{"cmd", cmd},
           {"t", ctx.t},
           {"width", ctx.dims.width},
           {"height", ctx.dims.height},
           {"box", box_to_json(box)},
           {"search_factor", search_factor}};
    if (!ctx.image_path.empty()) j["image"] = ctx.image_path;
    return j;
}

Json update_request(const protocol::FrameContext& ctx) {
    Json j{{"cmd", "update"}, {"t", ctx.t}, {"width", ctx.dims.width}, {"height", ctx.dims.height}};
    if (!ctx.image_path.empty()) j["image"] = ctx.image_path;
    return j;
}

Json prediction_response(const metrics::Prediction& p) {
    if (!p.box) return Json{{"absent", true}, {"conf", p.confidence}};
    return Json{{"x", p.box->x}, {"y", p.box->y}, {"w", p.box->w}, {"h", p.box->h}, {"conf", p.confidence}};
}

metrics::Prediction parse_prediction_response(const Json& j) {
    if (const auto it = j.find("error"); it != j.end()) {
        fail(ErrorCode::Protocol, "wire: peer reported error: " + (it->is_string() ? it->get<std::string>() : it->dump()));
    }
    metrics::Prediction p;
    const auto absent = j.find("absent");
    if (absent != j.end() && absent->is_boolean() && absent->get<bool>()) {
        const auto conf = j.find("conf");
        p.confidence = conf != j.end() && conf->is_number() ? conf->get<double>() : 0.0;
    } else {
        p.box = geom::BBox{number_field(j, "x"), number_field(j, "y"), number_field(j, "w"), number_field(j, "h")};
        p.confidence = number_field(j, "conf");
        if (!p.box->valid()) fail(ErrorCode::Protocol, "wire: peer returned an invalid box");
    }
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
        fail(ErrorCode::Protocol, "wire: peer confidence " + std::to_string(p.confidence) + " outside [0,1]");
    }
    return p;
}

ExternalBackend::ExternalBackend(std::unique_ptr<Transport> transport, std::string label)
    : transport_(std::move(transport)), label_(std::move(label)) {}

ExternalBackend::~ExternalBackend() {
    try {
        shutdown();
    } catch (...) {
    }
}

void ExternalBackend::shutdown() {
    if (closed_ || !transport_) return;
    closed_ = true;
    if (!failed_) send_message(*transport_, Json{{"cmd", "shutdown"}});
    if (auto* proc = dynamic_cast<ProcessTransport*>(transport_.get())) proc->finish();
}

Json ExternalBackend::call(const Json& request) {
    if (failed_) fail(ErrorCode::Protocol, label_ + ": backend previously failed");
    if (closed_) fail(ErrorCode::Protocol, label_ + ": session already shut down");
    try {
        send_message(*transport_, request);
        return receive_message(*transport_);
    } catch (const Error& e) {
        failed_ = true;
        throw Error(ErrorCode::Protocol, label_ + ": " + e.what());
    }
}

void ExternalBackend::expect_ack(const Json& reply, std::string_view cmd) {
    if (const auto it = reply.find("error"); it != reply.end()) {
        failed_ = true;
        fail(ErrorCode::Protocol, label_ + ": " + std::string(cmd) + " rejected: " + it->dump());
    }
    const auto ok = reply.find("ok");
    if (ok == reply.end() || !ok->is_boolean() || !ok->get<bool>()) {
        failed_ = true;
        fail(ErrorCode::Protocol, label_ + ": " + std::string(cmd) + " not acknowledged");
    }
}

void ExternalBackend::do_init(const protocol::FrameContext& ctx, const geom::BBox& box) {
    expect_ack(call(init_request("init", ctx, box, search_area_factor())), "init");
}

void ExternalBackend::do_reinit(const protocol::FrameContext& ctx, const geom::BBox& box) {
    expect_ack(call(init_request("reinit", ctx, box, search_area_factor())), "reinit");
}

void ExternalBackend::do_set_reference_box(const geom::BBox& box) {
    expect_ack(call(Json{{"cmd", "set_ref"}, {"box", box_to_json(box)}}), "set_ref");
}

metrics::Prediction ExternalBackend::do_update(const protocol::FrameContext& ctx) {
    const auto reply = call(update_request(ctx));
    try {
        return parse_prediction_response(reply);
    } catch (const Error&) {
        failed_ = true;
        throw;
    }
}

std::unique_ptr<ExternalBackend> external_backend(const std::string& target) {
    if (target.rfind("cmd:", 0) == 0) {
        return std::make_unique<ExternalBackend>(std::make_unique<ProcessTransport>(target.substr(4)), "extern:" + target);
    }
    if (target.rfind("tcp:", 0) == 0) {
        const auto rest = target.substr(4);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos) fail(ErrorCode::Config, "extern target '" + target + "': expected tcp:host:port");
        const auto port = text::parse_int(rest.substr(colon + 1), "extern target port");
        if (port <= 0 || port > 65535) fail(ErrorCode::Config, "extern target '" + target + "': invalid port");
        return std::make_unique<ExternalBackend>(connect_tcp(rest.substr(0, colon), static_cast<std::uint16_t>(port)),
                                                 "extern:" + target);
    }
    fail(ErrorCode::Config, "extern target '" + target + "': expected cmd:<command> or tcp:<host>:<port>");
}

}  // namespace skitb::wire
