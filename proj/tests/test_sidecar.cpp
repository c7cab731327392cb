#include "backend_contract.hpp"
#include "seal/errors.hpp"
#include "seal/sidecar.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <future>
#include <thread>

#include <csignal>

#include <unistd.h>

using namespace seal;

namespace {

struct Pipe {
    int fds[2];
    Pipe() { REQUIRE(::pipe(fds) == 0); }
};

// server thread on an ephemeral TCP port
class TcpServer {
public:
    explicit TcpServer(Backend & backend) {
        std::promise<uint16_t> bound;
        auto port = bound.get_future();
        thread_ = std::thread([&backend, p = std::move(bound)]() mutable {
            serve_tcp(backend, 0, [&](uint16_t port) { p.set_value(port); });
        });
        port_ = port.get();
    }
    ~TcpServer() { thread_.join(); }
    std::string address() const { return "tcp:127.0.0.1:" + std::to_string(port_); }

private:
    std::thread thread_;
    uint16_t port_ = 0;
};

} // namespace

TEST_CASE("messages encode to one line and decode back") {
    SidecarMessage m{"generate", 7, {{"prompt", "a\n\nb"}, {"n", 3}}};
    const auto line = encode_message(m);
    CHECK(line.find('\n') == std::string::npos);
    const auto back = decode_message(line);
    CHECK(back.kind == "generate");
    CHECK(back.id == 7);
    CHECK(back.payload == m.payload);
}

TEST_CASE("malformed and oversized messages raise ProtocolError") {
    CHECK_THROWS_AS(decode_message("{not json"), ProtocolError);
    CHECK_THROWS_AS(decode_message("{\"id\":1}"), ProtocolError);
    CHECK_THROWS_AS(decode_message("[1,2]"), ProtocolError);
    SidecarMessage big{"result", 1, {{"text", std::string(kMaxMessageBytes, 'x')}}};
    CHECK_THROWS_AS(encode_message(big), ProtocolError);
}

TEST_CASE("line channel frames lines and bounds their size") {
    Pipe p;
    LineChannel writer(-1, p.fds[1], false);
    LineChannel reader(p.fds[0], -1, false);
    writer.write_line("first");
    writer.write_line("second");
    std::string line;
    REQUIRE(reader.read_line(line));
    CHECK(line == "first");
    REQUIRE(reader.read_line(line));
    CHECK(line == "second");
    ::close(p.fds[1]);
    CHECK_FALSE(reader.read_line(line));
    ::close(p.fds[0]);

    ::signal(SIGPIPE, SIG_IGN);
    Pipe q;
    std::thread flood([fd = q.fds[1]] {
        const std::string chunk(1 << 20, 'y');
        for (size_t sent = 0; sent <= kMaxMessageBytes; sent += chunk.size()) {
            if (::write(fd, chunk.data(), chunk.size()) < 0) break;
        }
        ::close(fd);
    });
    {
        LineChannel big(q.fds[0], -1, true);
        CHECK_THROWS_AS(big.read_line(line), ProtocolError);
    }
    flood.join();
}

TEST_CASE("server answers unknown kinds and bad requests with typed errors") {
    TinyBackend tiny(testing::random_model());
    Pipe to_server, to_client;
    std::thread server([&] {
        LineChannel ch(to_server.fds[0], to_client.fds[1], true);
        serve_channel(tiny, ch);
    });
    LineChannel client(to_client.fds[0], to_server.fds[1], true);
    std::string line;
    auto ask = [&](const SidecarMessage & m) {
        client.send(m);
        REQUIRE(client.read_line(line));
        return decode_message(line);
    };
    const auto hello = ask({"hello", 1, {{"protocol", kProtocolVersion}}});
    CHECK(hello.kind == "capabilities");
    CHECK(hello.id == 1);
    CHECK(capabilities_from_json(hello.payload.at("capabilities")).d_model == 64);

    const auto wrong = ask({"hello", 2, {{"protocol", 99}}});
    CHECK(wrong.kind == "error");
    CHECK(wrong.payload.at("kind") == "ProtocolError");

    const auto unknown = ask({"teleport", 3, {}});
    CHECK(unknown.kind == "error");
    CHECK(unknown.id == 3);

    GenerationConfig bad;
    bad.tap_layer = 9;
    const auto err = ask({"generate", 4, {{"prompt", "x"}, {"config", to_json(bad)}}});
    CHECK(err.kind == "error");
    CHECK(err.payload.at("kind") == "LayerOutOfRange");
    CHECK_THROWS_AS(throw_remote_error(err.payload), LayerOutOfRange);

    client.write_line("garbage");
    REQUIRE(client.read_line(line));
    CHECK(decode_message(line).kind == "error");

    const auto tok = ask({"capabilities", 5, {{"tokenize", {"Wait"}}}});
    CHECK(tok.payload.at("tokenized").at(0).size() == 1);

    const auto bye = ask({"shutdown", 6, {}});
    CHECK(bye.kind == "shutdown");
    server.join();
}

TEST_CASE("remote error kinds map back to typed errors") {
    CHECK_THROWS_AS(throw_remote_error({{"kind", "ContextOverflow"}, {"message", "m"}}), ContextOverflow);
    CHECK_THROWS_AS(throw_remote_error({{"kind", "DimensionMismatch"}, {"message", "m"}}), DimensionMismatch);
    CHECK_THROWS_AS(throw_remote_error({{"kind", "InvalidConfig"}, {"message", "m"}}), InvalidConfig);
    CHECK_THROWS_AS(throw_remote_error({{"kind", "SomethingElse"}, {"message", "m"}}), BackendError);
}

TEST_CASE("a sidecar over TCP satisfies the backend contract and matches the local backend") {
    TinyBackend tiny(testing::trained_model());
    TcpServer server(tiny);
    {
        SidecarBackend remote(server.address());
        CHECK(remote.capabilities().model_id == tiny.capabilities().model_id);
        testing::run_backend_contract(remote);

        GenerationConfig cfg;
        cfg.tap_layer = 2;
        cfg.sampling = {SamplingMode::Temperature, 1.0, 17};
        const std::string prompt = "Problem: add 4, 9 and 2.\n\n";
        const auto local = tiny.generate(prompt, cfg);
        const auto over = remote.generate(prompt, cfg);
        CHECK(over.text == local.text);
        CHECK(over.token_ids == local.token_ids);
        REQUIRE(over.taps.size() == local.taps.size());
        for (size_t i = 0; i < local.taps.size(); ++i) CHECK(over.taps[i].vector == local.taps[i].vector);

        GenerationConfig bad;
        bad.tap_layer = 4;
        CHECK_THROWS_AS(remote.generate(prompt, bad), LayerOutOfRange);
    }
}

TEST_CASE("a sidecar over stdio runs the CLI server") {
    SidecarBackend remote(std::string("stdio:") + SEAL_CLI_PATH + " serve --model-dir " + SEAL_MODEL_DIR);
    const auto caps = remote.capabilities();
    CHECK(caps.n_layers == 4);
    CHECK(remote.single_token_id("Alternatively").has_value());
    TinyBackend tiny(testing::trained_model());
    const std::string prompt = "Problem: add 6 and 1.\n\n";
    CHECK(remote.generate(prompt, {}).text == tiny.generate(prompt, {}).text);
}

TEST_CASE("unreachable sidecars raise BackendError") {
    CHECK_THROWS_AS(SidecarBackend("tcp:127.0.0.1:1"), BackendError);
    CHECK_THROWS_AS(SidecarBackend("nonsense"), InvalidConfig);
}
