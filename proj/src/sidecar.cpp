#include "seal/sidecar.hpp"

#include "seal/errors.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

namespace seal {

using nlohmann::json;

std::string encode_message(const SidecarMessage & m) {
    std::string line = json{{"kind", m.kind}, {"id", m.id}, {"payload", m.payload}}.dump();
    if (line.size() + 1 > kMaxMessageBytes) {
        throw ProtocolError("message of " + std::to_string(line.size()) + " bytes exceeds the 64 MiB limit");
    }
    return line;
}

SidecarMessage decode_message(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception & e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
    }
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() || !j.contains("id") ||
        !j["id"].is_number_integer()) {
        throw ProtocolError("message needs string 'kind' and integer 'id'");
    }
    SidecarMessage m;
    m.kind = j["kind"].get<std::string>();
    m.id = j["id"].get<int64_t>();
    if (j.contains("payload") && !j["payload"].is_null()) {
        m.payload = j["payload"];
    }
    return m;
}

LineChannel::LineChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {}

LineChannel::~LineChannel() {
    if (owns_) {
        ::close(read_fd_);
        if (write_fd_ != read_fd_) {
            ::close(write_fd_);
        }
    }
}

void LineChannel::write_line(const std::string & line) {
    std::string data = line;
    data.push_back('\n');
    size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw BackendError(std::string("write failed: ") + std::strerror(errno));
        }
        off += static_cast<size_t>(n);
    }
}

bool LineChannel::read_line(std::string & line) {
    char chunk[65536];
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return true;
        }
        if (buffer_.size() > kMaxMessageBytes) {
            throw ProtocolError("incoming message exceeds the 64 MiB limit");
        }
        const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw BackendError(std::string("read failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            if (!buffer_.empty()) {
                throw ProtocolError("connection closed mid-message");
            }
            return false;
        }
        buffer_.append(chunk, static_cast<size_t>(n));
    }
}

namespace {

int connect_tcp(const std::string & host, const std::string & port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo * res = nullptr;
    if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw BackendError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    for (addrinfo * p = res; p; p = p->ai_next) {
        fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
        if (fd < 0) {
            continue;
        }
        if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
            break;
        }
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
        throw BackendError("cannot connect to " + host + ":" + port);
    }
    return fd;
}

} // namespace

[[noreturn]] void throw_remote_error(const json & payload) {
    const std::string kind = payload.value("kind", std::string("BackendError"));
    const std::string msg = payload.value("message", std::string("remote error"));
    if (kind == "LayerOutOfRange") throw LayerOutOfRange(msg);
    if (kind == "DimensionMismatch") throw DimensionMismatch(msg);
    if (kind == "InvalidConfig") throw InvalidConfig(msg);
    if (kind == "ContextOverflow") throw ContextOverflow(msg);
    if (kind == "ProtocolError") throw ProtocolError(msg);
    throw BackendError(kind + ": " + msg);
}

SidecarBackend::SidecarBackend(const std::string & address) : address_(address) {
    ::signal(SIGPIPE, SIG_IGN);
    if (address.rfind("stdio:", 0) == 0) {
        const std::string cmd = address.substr(6);
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
            throw BackendError("pipe failed");
        }
        const pid_t pid = ::fork();
        if (pid < 0) {
            throw BackendError("fork failed");
        }
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char *>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        child_pid_ = pid;
        channel_ = std::make_unique<LineChannel>(from_child[0], to_child[1], true);
    } else {
        std::string rest = address.rfind("tcp:", 0) == 0 ? address.substr(4) : address;
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos) {
            throw InvalidConfig("sidecar address must be tcp:host:port or stdio:<command>, got '" + address + "'");
        }
        const int fd = connect_tcp(rest.substr(0, colon), rest.substr(colon + 1));
        channel_ = std::make_unique<LineChannel>(fd, fd, true);
    }
    const SidecarMessage reply = request({"hello", 0, {{"protocol", kProtocolVersion}}});
    if (reply.kind != "capabilities") {
        throw ProtocolError("expected capabilities after hello, got '" + reply.kind + "'");
    }
    if (reply.payload.value("protocol", 0) != kProtocolVersion) {
        throw ProtocolError("sidecar speaks protocol " + reply.payload.value("protocol", json(0)).dump());
    }
    caps_ = capabilities_from_json(reply.payload.at("capabilities"));
}

SidecarBackend::~SidecarBackend() {
    try {
        std::lock_guard lock(mutex_);
        channel_->send({"shutdown", next_id_++, json::object()});
        std::string ignored;
        channel_->read_line(ignored);
    } catch (...) {
    }
    channel_.reset();
    if (child_pid_ > 0) {
        int status = 0;
        ::waitpid(child_pid_, &status, 0);
    }
}

SidecarMessage SidecarBackend::request(SidecarMessage m) {
    std::lock_guard lock(mutex_);
    m.id = next_id_++;
    channel_->send(m);
    std::string line;
    if (!channel_->read_line(line)) {
        throw BackendError("sidecar closed the connection");
    }
    SidecarMessage reply = decode_message(line);
    if (reply.id != m.id) {
        throw ProtocolError("reply id " + std::to_string(reply.id) + " does not match request " + std::to_string(m.id));
    }
    if (reply.kind == "error") {
        throw_remote_error(reply.payload);
    }
    return reply;
}

GenerationResult SidecarBackend::generate(std::string_view prompt, const GenerationConfig & config) {
    config.validate(caps_);
    const SidecarMessage reply =
        request({"generate", 0, {{"prompt", std::string(prompt)}, {"config", to_json(config)}}});
    if (reply.kind != "result") {
        throw ProtocolError("expected result, got '" + reply.kind + "'");
    }
    return generation_result_from_json(reply.payload);
}

std::vector<TokenId> SidecarBackend::tokenize(std::string_view text) {
    const SidecarMessage reply = request({"capabilities", 0, {{"tokenize", json::array({std::string(text)})}}});
    if (!reply.payload.contains("tokenized")) {
        throw ProtocolError("sidecar did not return tokenized text");
    }
    return reply.payload["tokenized"].at(0).get<std::vector<TokenId>>();
}

std::string sidecar_address_from_env() {
    const char * v = std::getenv("SEAL_SIDECAR");
    return v ? std::string(v) : std::string();
}

namespace {

json error_payload(const std::string & kind, const std::string & message) {
    return {{"kind", kind}, {"message", message}};
}

// false once shutdown was handled
bool handle(Backend & backend, LineChannel & channel, const std::string & line) {
    SidecarMessage req;
    try {
        req = decode_message(line);
    } catch (const ProtocolError & e) {
        channel.send({"error", -1, error_payload("ProtocolError", e.what())});
        return true;
    }
    try {
        if (req.kind == "hello") {
            const int protocol = req.payload.value("protocol", kProtocolVersion);
            if (protocol != kProtocolVersion) {
                channel.send({"error", req.id,
                              error_payload("ProtocolError", "unsupported protocol " + std::to_string(protocol))});
                return true;
            }
            channel.send({"capabilities", req.id,
                          {{"protocol", kProtocolVersion}, {"capabilities", to_json(backend.capabilities())}}});
        } else if (req.kind == "capabilities") {
            json payload = {{"protocol", kProtocolVersion}, {"capabilities", to_json(backend.capabilities())}};
            if (req.payload.contains("tokenize")) {
                json out = json::array();
                for (const auto & s : req.payload["tokenize"]) {
                    out.push_back(backend.tokenize(s.get<std::string>()));
                }
                payload["tokenized"] = out;
            }
            channel.send({"capabilities", req.id, payload});
        } else if (req.kind == "generate") {
            const GenerationConfig cfg = generation_config_from_json(req.payload.value("config", json::object()));
            const std::string prompt = req.payload.at("prompt").get<std::string>();
            channel.send({"result", req.id, to_json(backend.generate(prompt, cfg))});
        } else if (req.kind == "shutdown") {
            channel.send({"shutdown", req.id, json::object()});
            return false;
        } else {
            channel.send({"error", req.id, error_payload("ProtocolError", "unknown kind '" + req.kind + "'")});
        }
    } catch (const Error & e) {
        channel.send({"error", req.id, error_payload(e.kind(), e.what())});
    } catch (const std::exception & e) {
        channel.send({"error", req.id, error_payload("BackendError", e.what())});
    }
    return true;
}

} // namespace

void serve_channel(Backend & backend, LineChannel & channel) {
    std::string line;
    for (;;) {
        try {
            if (!channel.read_line(line)) {
                return;
            }
        } catch (const ProtocolError & e) {
            channel.send({"error", -1, error_payload("ProtocolError", e.what())});
            return;
        }
        if (!handle(backend, channel, line)) {
            return;
        }
    }
}

void serve_stdio(Backend & backend) {
    LineChannel channel(STDIN_FILENO, STDOUT_FILENO, false);
    serve_channel(backend, channel);
}

void serve_tcp(Backend & backend, uint16_t port, const std::function<void(uint16_t)> & ready) {
    ::signal(SIGPIPE, SIG_IGN);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) {
        throw BackendError("socket failed");
    }
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd, reinterpret_cast<sockaddr *>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
        ::close(fd);
        throw BackendError("cannot listen on port " + std::to_string(port) + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr *>(&addr), &len);
    if (ready) {
        ready(ntohs(addr.sin_port));
    }
    for (;;) {
        const int conn = ::accept(fd, nullptr, nullptr);
        if (conn < 0) {
            if (errno == EINTR) {
                continue;
            }
            ::close(fd);
            throw BackendError("accept failed");
        }
        LineChannel channel(conn, conn, true);
        std::string line;
        bool running = true;
        try {
            while (running && channel.read_line(line)) {
                running = handle(backend, channel, line);
            }
        } catch (const Error & e) {
            std::cerr << "warning: connection dropped: " << e.what() << "\n";
        }
        if (!running) {
            break;
        }
    }
    ::close(fd);
}

} // namespace seal
