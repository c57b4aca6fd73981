#include <doctest.h>

#include "docstar/transport.hpp"

using namespace docstar;

TEST_CASE("frame round trip is byte identical") {
    Frame f;
    f.type = MsgType::kP1Ans;
    for (std::size_t i = 0; i < 16; i++) f.session[i] = static_cast<std::uint8_t>(i);
    PayloadWriter w;
    const std::vector<Fe> ans{499997, 497979, 294606};
    w.fe_vector(ans);
    f.payload = w.take();

    auto bytes = encode_frame(f);
    Frame g = decode_frame(bytes);
    CHECK(g.type == f.type);
    CHECK(g.session == f.session);
    CHECK(g.payload == f.payload);
    CHECK(encode_frame(g) == bytes);

    PayloadReader r(g.payload);
    CHECK(r.fe_vector() == ans);
    r.require_end();
}

TEST_CASE("empty hello is a 21-byte frame") {
    Frame f;
    f.type = MsgType::kHello;
    f.session.fill(0);
    CHECK(encode_frame(f).size() == 21);
}

TEST_CASE("decoder rejects malformed frames without crashing") {
    CHECK_THROWS_AS(decode_frame(std::vector<std::uint8_t>{}), FramingError);
    CHECK_THROWS_AS(decode_frame(std::vector<std::uint8_t>(10, 0)), FramingError);
    // Length says more than provided.
    std::vector<std::uint8_t> truncated{0, 0, 0, 40, 1};
    truncated.resize(25, 0);
    CHECK_THROWS_AS(decode_frame(truncated), FramingError);
    // Unknown message type.
    Frame f;
    f.type = MsgType::kHello;
    f.session.fill(7);
    auto bytes = encode_frame(f);
    bytes[4] = 0xEE;
    CHECK_THROWS_AS(decode_frame(bytes), ProtocolError);

    // Fuzz: random buffers either decode or throw one of the typed errors.
    Prng prng(31);
    for (int it = 0; it < 2000; it++) {
        std::vector<std::uint8_t> buf(prng.uniform_below(64));
        prng.fill(buf);
        try {
            (void)decode_frame(buf);
        } catch (const FramingError&) {
        } catch (const ProtocolError&) {
        }
    }
}

TEST_CASE("payload reader catches truncation and trailing bytes") {
    PayloadWriter w;
    w.u32(3);
    auto buf = w.take();
    PayloadReader r(buf);
    CHECK(r.u32() == 3);
    CHECK_THROWS_AS(r.u64(), ProtocolError);
    PayloadReader r2(buf);
    CHECK_THROWS_AS(r2.require_end(), ProtocolError);
}

TEST_CASE("loopback pair delivers frames in order and counts traffic") {
    auto [a, b] = make_loopback_pair();
    for (int i = 0; i < 5; i++) {
        Frame f;
        f.type = MsgType::kTestShare;
        f.session.fill(static_cast<std::uint8_t>(i));
        f.payload = {static_cast<std::uint8_t>(i)};
        a->send(f);
    }
    for (int i = 0; i < 5; i++) {
        auto got = b->recv(std::chrono::milliseconds(100));
        REQUIRE(got.has_value());
        CHECK(got->payload[0] == static_cast<std::uint8_t>(i));
    }
    CHECK(a->stats().frames_sent == 5);
    CHECK(b->stats().frames_received == 5);
    CHECK(a->stats().bytes_sent == 5 * 22);
    a->close();
    CHECK(!b->recv(std::chrono::milliseconds(10)).has_value());
}

TEST_CASE("tcp link round trip on localhost") {
    TcpListener listener("127.0.0.1", 0);
    auto client = tcp_connect("127.0.0.1", listener.port(),
                              std::chrono::milliseconds(1000));
    auto server = listener.accept(std::chrono::milliseconds(1000));
    REQUIRE(server != nullptr);

    Frame f;
    f.type = MsgType::kP2Vector;
    f.session.fill(9);
    PayloadWriter w;
    const std::vector<Fe> v{1, 0, 0};
    w.fe_vector(v);
    f.payload = w.take();
    client->send(f);
    auto got = server->recv(std::chrono::milliseconds(1000));
    REQUIRE(got.has_value());
    CHECK(got->type == MsgType::kP2Vector);
    CHECK(got->payload == f.payload);
    server->send(*got);
    auto back = client->recv(std::chrono::milliseconds(1000));
    REQUIRE(back.has_value());
    CHECK(back->payload == f.payload);
}
