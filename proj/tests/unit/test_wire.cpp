#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "poq/cheater.hpp"
#include "poq/errors.hpp"
#include "poq/wire.hpp"

using namespace poq;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

ProverFactory honest_factory() {
  return [](const PublicInstance& inst) { return std::make_unique<HonestProver>(inst); };
}

struct WireRun {
  SessionResult verifier;
  ProverSessionLog prover;
};

WireRun loopback_run(const KeyPair& keys, const ExperimentConfig& cfg, ProverFactory factory,
                     ProverEndpointConfig pcfg = {}) {
  auto [v_end, p_end] = make_loopback_pair();
  auto fut = std::async(std::launch::async, [&, ch = p_end.get()] { return run_prover_endpoint(*ch, pcfg, factory); });
  WireRun out;
  out.verifier = run_verifier_session(*v_end, VerifierEndpointConfig{keys, cfg, 5000ms}, "s1");
  out.prover = fut.get();
  return out;
}

Message msg(MessageKind kind, json payload, std::string session = "s1") {
  return Message{kWireVersion, std::move(session), kind, std::move(payload)};
}

// Every message kind with a valid payload.
std::vector<Message> sample_messages() {
  return {
      msg(MessageKind::hello, {{"role", "prover"}}),
      msg(MessageKind::hello, {{"role", "verifier"}, {"protocol", "lwe"}, {"instance", "paper:0"}}),
      msg(MessageKind::instance, {{"instance", public_to_json(lwe_paper_instance(0).pub)},
                                  {"mode", "delayed"},
                                  {"shots_a", 3},
                                  {"shots_b", 4},
                                  {"seed", 9},
                                  {"lwe_d_includes_b", true}}),
      msg(MessageKind::commit, {{"shot", 0}, {"w", "0101"}}),
      msg(MessageKind::challenge, {{"shot", 1}, {"stage", "branch"}, {"branch", "B"}, {"r", "011"}}),
      msg(MessageKind::challenge, {{"shot", 1}, {"stage", "basis"}, {"basis", "Z+X"}}),
      msg(MessageKind::response, {{"shot", 1}, {"d", "101"}, {"outcome", 1}}),
      msg(MessageKind::verdict, {{"shot", 1}, {"status", "kept"}, {"verdict", "accept"}}),
      msg(MessageKind::summary, {{"tally", to_json(Tally{})}}),
      msg(MessageKind::close, {{"reason", "done"}}),
      msg(MessageKind::error, {{"message", "bad"}}),
  };
}

}  // namespace

TEST(Codec, RoundTripEveryKind) {
  for (const auto& m : sample_messages()) {
    const auto line = encode(m);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(decode(line), m) << line;
  }
  EXPECT_EQ(parse_message_kind("verdict"), MessageKind::verdict);
}

TEST(Codec, RejectsMalformedLines) {
  const auto line = encode(msg(MessageKind::commit, {{"shot", 0}, {"w", "0101"}}));
  EXPECT_THROW(decode(line.substr(0, line.size() - 3)), SessionAbort);
  EXPECT_THROW(decode("not json"), SessionAbort);
  EXPECT_THROW(decode("[1,2]"), SessionAbort);
  auto j = json::parse(line);
  j["extra"] = 1;
  EXPECT_THROW(decode(j.dump()), SessionAbort);
  j = json::parse(line);
  j["payload"]["extra"] = 1;
  EXPECT_THROW(decode(j.dump()), SessionAbort);
  j = json::parse(line);
  j["payload"].erase("w");
  EXPECT_THROW(decode(j.dump()), SessionAbort);
  j = json::parse(line);
  j["payload"]["shot"] = "zero";
  EXPECT_THROW(decode(j.dump()), SessionAbort);
  j = json::parse(line);
  j["kind"] = "gossip";
  EXPECT_THROW(decode(j.dump()), SessionAbort);
}

TEST(Codec, TrapdoorFieldDetection) {
  EXPECT_TRUE(contains_trapdoor_field(keypair_to_json(lwe_paper_instance(0))));
  EXPECT_TRUE(contains_trapdoor_field(json{{"a", {{"b", json::array({json{{"p", 3}}})}}}}));
  EXPECT_FALSE(contains_trapdoor_field(public_to_json(lwe_paper_instance(0).pub)));
  EXPECT_FALSE(contains_trapdoor_field(public_to_json(paper_instance(ProtocolKind::factoring, "15").pub)));
}

TEST(Session, LoopbackLweHonestThousandShots) {
  const auto keys = lwe_paper_instance(0);
  const auto run = loopback_run(keys, ExperimentConfig{500, 500, Mode::interactive, 4, {}}, honest_factory());
  ASSERT_FALSE(run.verifier.aborted) << run.verifier.error;
  const auto& t = run.verifier.tally;
  EXPECT_EQ(t.a.n, 500U);
  EXPECT_EQ(t.a.k, t.a.n);
  EXPECT_EQ(t.b.k, t.b.n);
  EXPECT_GT(t.b.n, 400U);
  EXPECT_EQ(run.prover.shots_completed, 1000U);
  EXPECT_FALSE(run.prover.incomplete);
  ASSERT_TRUE(run.prover.summary.has_value());
  EXPECT_EQ(*run.prover.summary, t);
}

TEST(Session, WireRecordsEqualInProcessRecords) {
  for (const auto& keys : {lwe_paper_instance(1), paper_instance(ProtocolKind::factoring, "15")}) {
    for (auto mode : {Mode::interactive, Mode::delayed}) {
      const ExperimentConfig cfg{40, 80, mode, 123, {}};
      HonestProver local(keys.pub);
      const auto in_process = run_experiment(keys, cfg, local);
      const auto wire = loopback_run(keys, cfg, honest_factory());
      ASSERT_EQ(wire.verifier.records.size(), in_process.records.size());
      for (std::size_t i = 0; i < in_process.records.size(); ++i)
        EXPECT_EQ(canonical_line(wire.verifier.records[i]), canonical_line(in_process.records[i]));
      EXPECT_EQ(wire.verifier.tally, in_process.tally);
    }
  }
}

TEST(Session, VerifierNeverSendsTrapdoorFields) {
  for (const auto& keys : {lwe_paper_instance(0), paper_instance(ProtocolKind::factoring, "21")}) {
    const auto run = loopback_run(keys, ExperimentConfig{5, 10, Mode::interactive, 2, {}}, honest_factory());
    std::size_t received = 0;
    for (const auto& line : run.prover.lines) {
      if (line.rfind("< ", 0) != 0) continue;
      ++received;
      EXPECT_FALSE(contains_trapdoor_field(json::parse(line.substr(2))["payload"])) << line;
    }
    EXPECT_GT(received, 15U);
  }
}

TEST(Session, CheaterOverWireStaysClassical) {
  const auto keys = lwe_paper_instance(0);
  const auto run = loopback_run(keys, ExperimentConfig{1000, 1000, Mode::interactive, 8, {}},
                                [](const PublicInstance& inst) { return make_cheater("known_preimage", inst); });
  const auto& t = run.verifier.tally;
  const double p_a = double(t.a.k) / double(t.a.n);
  const double p_b = double(t.b.k) / double(t.b.n);
  EXPECT_EQ(p_a, 1.0);
  EXPECT_LE(p_a + 2 * p_b - 2, 4 * 2 * std::sqrt(0.25 / double(t.b.n)));
}

TEST(Session, HelloFixesProtocolAndInstance) {
  const auto keys = paper_instance(ProtocolKind::factoring, "16");
  const auto run = loopback_run(keys, ExperimentConfig{1, 1, Mode::interactive, 1, {}}, honest_factory());
  ASSERT_GE(run.prover.lines.size(), 3U);
  EXPECT_EQ(json::parse(run.prover.lines[0].substr(2))["kind"], "hello");
  const auto hello = json::parse(run.prover.lines[1].substr(2));
  EXPECT_EQ(hello["kind"], "hello");
  EXPECT_EQ(hello["payload"]["protocol"], "factoring");
  EXPECT_EQ(hello["payload"]["instance"], "N16");
}

TEST(Session, OutOfOrderResponseVoidsTheShot) {
  const auto keys = lwe_paper_instance(0);
  auto [v_end, p_end] = make_loopback_pair();
  Channel& p = *p_end;
  std::thread peer([&p] {
    auto next = [&p] { return receive_message(p, 5000ms); };
    send_message(p, msg(MessageKind::hello, {{"role", "prover"}}, ""));
    next();  // hello
    next();  // instance
    // Shot 0: answer before any challenge.
    send_message(p, msg(MessageKind::response, {{"shot", 0}, {"d", "10100"}}));
    EXPECT_EQ(next().kind, MessageKind::error);
    EXPECT_EQ(next().payload["status"], "voided");
    // Shot 1 (branch B) played correctly.
    send_message(p, msg(MessageKind::commit, {{"shot", 1}, {"w", "0100"}}));
    EXPECT_EQ(next().kind, MessageKind::challenge);
    send_message(p, msg(MessageKind::response, {{"shot", 1}, {"d", "10100"}}));
    const auto verdict = next();
    EXPECT_EQ(verdict.payload["verdict"], "accept");
    EXPECT_EQ(next().kind, MessageKind::summary);
    EXPECT_EQ(next().kind, MessageKind::close);
  });
  const auto res = run_verifier_session(*v_end, VerifierEndpointConfig{keys, {1, 1, Mode::interactive, 1, {}}, 5000ms}, "s1");
  peer.join();
  EXPECT_FALSE(res.aborted);
  ASSERT_EQ(res.records.size(), 2U);
  EXPECT_EQ(res.records[0].status, ShotStatus::voided);
  EXPECT_EQ(res.tally.voided, 1U);
  EXPECT_EQ(res.tally.b.k, 1U);
  EXPECT_EQ(res.tally.a.n, 0U);
}

TEST(Session, VersionMismatchAbortsWithErrorAndClose) {
  const auto keys = lwe_paper_instance(0);
  auto [v_end, p_end] = make_loopback_pair();
  Channel& p = *p_end;
  std::thread peer([&p] {
    p.send_line(encode(Message{kWireVersion + 1, "", MessageKind::hello, {{"role", "prover"}}}));
    EXPECT_EQ(receive_message(p, 5000ms).kind, MessageKind::error);
    EXPECT_EQ(receive_message(p, 5000ms).kind, MessageKind::close);
  });
  const auto res = run_verifier_session(*v_end, VerifierEndpointConfig{keys, {2, 2, Mode::interactive, 1, {}}, 5000ms}, "s1");
  peer.join();
  EXPECT_TRUE(res.aborted);
  EXPECT_NE(res.error.find("version"), std::string::npos);
  EXPECT_EQ(res.tally, Tally{});
}

TEST(Session, MalformedLineAbortsSession) {
  const auto keys = lwe_paper_instance(0);
  auto [v_end, p_end] = make_loopback_pair();
  Channel& p = *p_end;
  std::thread peer([&p] {
    send_message(p, msg(MessageKind::hello, {{"role", "prover"}}, ""));
    receive_message(p, 5000ms);
    receive_message(p, 5000ms);
    p.send_line("{\"v\":1,\"session\":\"s1\",\"kind\":\"commit\",\"payload\":{\"shot\":0,");
    EXPECT_EQ(receive_message(p, 5000ms).kind, MessageKind::error);
  });
  const auto res = run_verifier_session(*v_end, VerifierEndpointConfig{keys, {2, 2, Mode::interactive, 1, {}}, 5000ms}, "s1");
  peer.join();
  EXPECT_TRUE(res.aborted);
  EXPECT_TRUE(res.records.empty());
}

TEST(Session, TimeoutAbortsWithoutCorruptingTally) {
  const auto keys = lwe_paper_instance(0);
  auto [v_end, p_end] = make_loopback_pair();
  const auto res = run_verifier_session(*v_end, VerifierEndpointConfig{keys, {2, 2, Mode::interactive, 1, {}}, 50ms}, "s1");
  EXPECT_TRUE(res.aborted);
  EXPECT_EQ(res.tally, Tally{});
}

TEST(Session, ProverSeesConnectionLossAsIncomplete) {
  const auto keys = lwe_paper_instance(0);
  auto [v_end, p_end] = make_loopback_pair();
  Channel& v = *v_end;
  std::thread peer([&v, &keys] {
    receive_message(v, 5000ms);
    send_message(v, msg(MessageKind::hello, {{"role", "verifier"}}));
    send_message(v, msg(MessageKind::instance, {{"instance", public_to_json(keys.pub)},
                                                {"mode", "interactive"},
                                                {"shots_a", 2},
                                                {"shots_b", 0},
                                                {"seed", 1}}));
    receive_message(v, 5000ms);  // commit of shot 0
    v.close();
  });
  const auto log = run_prover_endpoint(*p_end, ProverEndpointConfig{std::nullopt, 2000ms}, honest_factory());
  peer.join();
  EXPECT_TRUE(log.incomplete);
  EXPECT_EQ(log.shots_completed, 0U);
  EXPECT_FALSE(log.error.empty());
}

TEST(Endpoint, TwoSequentialSessionsAreIndependent) {
  const auto keys = lwe_paper_instance(3);
  TcpListener listener("127.0.0.1:0");
  const int port = listener.bound_port();
  ASSERT_GT(port, 0);
  const ExperimentConfig cfg{30, 30, Mode::interactive, 6, {}};
  auto server = std::async(std::launch::async, [&] {
    return run_verifier_endpoint(listener, VerifierEndpointConfig{keys, cfg, 5000ms}, 2);
  });
  std::vector<ProverSessionLog> logs;
  for (int i = 0; i < 2; ++i) {
    auto ch = tcp_connect("127.0.0.1:" + std::to_string(port));
    logs.push_back(run_prover_endpoint(*ch, ProverEndpointConfig{}, honest_factory()));
  }
  const auto result = server.get();
  ASSERT_EQ(result.sessions.size(), 2U);
  EXPECT_NE(result.sessions[0].session, result.sessions[1].session);
  for (const auto& s : result.sessions) {
    EXPECT_FALSE(s.aborted) << s.error;
    EXPECT_EQ(s.records.size(), 60U);
  }
  // Same seed, same prover: identical but separately accumulated tallies.
  EXPECT_EQ(result.sessions[0].tally, result.sessions[1].tally);
  Tally merged = result.sessions[0].tally;
  merged.merge(result.sessions[1].tally);
  EXPECT_EQ(result.tally, merged);
  for (const auto& log : logs) EXPECT_EQ(log.shots_completed, 60U);
}

TEST(Endpoint, ConcurrentTcpSessionsWithDifferentSeeds) {
  const auto keys = paper_instance(ProtocolKind::factoring, "8");
  TcpListener listener("127.0.0.1:0");
  const int port = listener.bound_port();
  const ExperimentConfig cfg{20, 40, Mode::delayed, 3, {}};
  auto server = std::async(std::launch::async, [&] {
    return run_verifier_endpoint(listener, VerifierEndpointConfig{keys, cfg, 5000ms}, 2);
  });
  auto client = [&](std::uint64_t seed) {
    auto ch = tcp_connect("127.0.0.1:" + std::to_string(port));
    return run_prover_endpoint(*ch, ProverEndpointConfig{seed, 5000ms}, honest_factory());
  };
  auto c1 = std::async(std::launch::async, client, 100);
  auto c2 = std::async(std::launch::async, client, 200);
  EXPECT_EQ(c1.get().shots_completed, 60U);
  EXPECT_EQ(c2.get().shots_completed, 60U);
  const auto result = server.get();
  std::uint64_t total = 0;
  for (const auto& s : result.sessions) total += s.records.size();
  EXPECT_EQ(total, 120U);
  EXPECT_EQ(result.tally.a.total + result.tally.b.total, 120U);
}

TEST(Endpoint, BadAddressIsConfigError) {
  EXPECT_THROW(TcpListener("nonsense"), ConfigError);
  EXPECT_THROW(tcp_connect("127.0.0.1:1"), SessionAbort);
}
