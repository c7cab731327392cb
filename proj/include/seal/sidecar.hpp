#pragma once

// Wire protocol for external backends: newline-delimited JSON messages
// {kind, id, payload} over stdio pipes or TCP. One request in flight per
// connection; every request id is answered exactly once.

#include "seal/backend.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

namespace seal {

inline constexpr int kProtocolVersion = 1;
inline constexpr size_t kMaxMessageBytes = size_t(64) << 20;

struct SidecarMessage {
    std::string kind;  // hello | capabilities | generate | result | error | shutdown
    int64_t id = 0;
    nlohmann::json payload = nlohmann::json::object();
};

// One line without the trailing newline. Throws ProtocolError when the
// encoded message exceeds kMaxMessageBytes.
std::string encode_message(const SidecarMessage & m);
// Throws ProtocolError on malformed JSON or missing fields.
SidecarMessage decode_message(std::string_view line);

// Blocking line transport over a pair of file descriptors.
class LineChannel {
public:
    LineChannel(int read_fd, int write_fd, bool owns_fds);
    ~LineChannel();
    LineChannel(const LineChannel &) = delete;
    LineChannel & operator=(const LineChannel &) = delete;

    void write_line(const std::string & line);
    // false on clean EOF; ProtocolError above kMaxMessageBytes
    bool read_line(std::string & line);

    void send(const SidecarMessage & m) { write_line(encode_message(m)); }

private:
    int read_fd_;
    int write_fd_;
    bool owns_;
    std::string buffer_;
};

// Client side. Address forms: "tcp:host:port", "host:port", "stdio:<command>".
class SidecarBackend : public Backend {
public:
    explicit SidecarBackend(const std::string & address);
    ~SidecarBackend() override;

    BackendCapabilities capabilities() const override { return caps_; }
    GenerationResult generate(std::string_view prompt, const GenerationConfig & config) override;
    std::vector<TokenId> tokenize(std::string_view text) override;

    const std::string & address() const { return address_; }

private:
    SidecarMessage request(SidecarMessage m);

    std::string address_;
    std::unique_ptr<LineChannel> channel_;
    int child_pid_ = -1;
    int64_t next_id_ = 1;
    BackendCapabilities caps_;
    std::mutex mutex_;
};

// Address from SEAL_SIDECAR, empty when unset.
std::string sidecar_address_from_env();

// Server side: answers requests with `backend` until shutdown or EOF.
// Unknown kinds and failing requests get an error reply; the loop continues.
void serve_channel(Backend & backend, LineChannel & channel);
void serve_stdio(Backend & backend);
// Accepts connections on 127.0.0.1:port one at a time. When `ready` is given
// it receives the bound port (port 0 picks a free one). Returns after a
// connection sends shutdown.
void serve_tcp(Backend & backend, uint16_t port, const std::function<void(uint16_t)> & ready = {});

// Rebuilds the typed error named in an error payload.
[[noreturn]] void throw_remote_error(const nlohmann::json & payload);

} // namespace seal
