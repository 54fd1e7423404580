#include "poq/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "poq/errors.hpp"

namespace poq {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<MessageKind, const char*>, 9> kKinds{{
    {MessageKind::hello, "hello"},
    {MessageKind::instance, "instance"},
    {MessageKind::commit, "commit"},
    {MessageKind::challenge, "challenge"},
    {MessageKind::response, "response"},
    {MessageKind::verdict, "verdict"},
    {MessageKind::summary, "summary"},
    {MessageKind::close, "close"},
    {MessageKind::error, "error"},
}};

enum class FieldType { string, unsigned_int, bit, boolean, object, bits };

struct Field {
  const char* name;
  FieldType type;
  bool required;
};

const std::vector<Field>& schema(MessageKind kind) {
  static const std::vector<Field> hello{{"role", FieldType::string, true},
                                        {"protocol", FieldType::string, false},
                                        {"instance", FieldType::string, false}};
  static const std::vector<Field> instance{{"instance", FieldType::object, true},
                                           {"mode", FieldType::string, true},
                                           {"shots_a", FieldType::unsigned_int, true},
                                           {"shots_b", FieldType::unsigned_int, true},
                                           {"seed", FieldType::unsigned_int, true},
                                           {"lwe_d_includes_b", FieldType::boolean, false}};
  static const std::vector<Field> commit{{"shot", FieldType::unsigned_int, true}, {"w", FieldType::bits, true}};
  static const std::vector<Field> challenge{{"shot", FieldType::unsigned_int, true},
                                            {"stage", FieldType::string, true},
                                            {"branch", FieldType::string, false},
                                            {"r", FieldType::bits, false},
                                            {"basis", FieldType::string, false}};
  static const std::vector<Field> response{{"shot", FieldType::unsigned_int, true},
                                           {"x", FieldType::bits, false},
                                           {"d", FieldType::bits, false},
                                           {"outcome", FieldType::bit, false}};
  static const std::vector<Field> verdict{{"shot", FieldType::unsigned_int, true},
                                          {"status", FieldType::string, true},
                                          {"verdict", FieldType::string, true}};
  static const std::vector<Field> summary{{"tally", FieldType::object, true}};
  static const std::vector<Field> close{{"reason", FieldType::string, false}};
  static const std::vector<Field> error{{"message", FieldType::string, true}};
  switch (kind) {
    case MessageKind::hello: return hello;
    case MessageKind::instance: return instance;
    case MessageKind::commit: return commit;
    case MessageKind::challenge: return challenge;
    case MessageKind::response: return response;
    case MessageKind::verdict: return verdict;
    case MessageKind::summary: return summary;
    case MessageKind::close: return close;
    case MessageKind::error: return error;
  }
  return error;
}

bool type_ok(const json& v, FieldType type) {
  switch (type) {
    case FieldType::string: return v.is_string();
    case FieldType::unsigned_int: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case FieldType::bit: return v.is_number_integer() && (v.get<std::int64_t>() == 0 || v.get<std::int64_t>() == 1);
    case FieldType::boolean: return v.is_boolean();
    case FieldType::object: return v.is_object();
    case FieldType::bits: {
      if (!v.is_string()) return false;
      const auto& s = v.get_ref<const std::string&>();
      return !s.empty() && s.find_first_not_of("01") == std::string::npos;
    }
  }
  return false;
}

void validate_payload(MessageKind kind, const json& payload) {
  if (!payload.is_object()) throw SessionAbort("message payload must be an object");
  const auto& fields = schema(kind);
  for (const auto& [key, value] : payload.items()) {
    const Field* f = nullptr;
    for (const auto& candidate : fields)
      if (key == candidate.name) f = &candidate;
    if (f == nullptr) throw SessionAbort("unknown field '" + key + "' in " + to_string(kind) + " payload");
    if (!type_ok(value, f->type)) throw SessionAbort("field '" + key + "' has the wrong type in " + to_string(kind));
  }
  for (const auto& f : fields)
    if (f.required && !payload.contains(f.name))
      throw SessionAbort(std::string("missing field '") + f.name + "' in " + to_string(kind) + " payload");
}

}  // namespace

std::string to_string(MessageKind kind) {
  for (const auto& [k, name] : kKinds)
    if (k == kind) return name;
  return "?";
}

MessageKind parse_message_kind(const std::string& text) {
  for (const auto& [k, name] : kKinds)
    if (text == name) return k;
  throw SessionAbort("unknown message kind '" + text + "'");
}

std::string encode(const Message& m) {
  validate_payload(m.kind, m.payload);
  return json{{"v", m.version}, {"session", m.session}, {"kind", to_string(m.kind)}, {"payload", m.payload}}.dump();
}

Message decode(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SessionAbort(std::string("malformed message line: ") + e.what());
  }
  if (!j.is_object()) throw SessionAbort("message must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "v" && key != "session" && key != "kind" && key != "payload")
      throw SessionAbort("unknown message field '" + key + "'");
  for (const char* key : {"v", "session", "kind", "payload"})
    if (!j.contains(key)) throw SessionAbort(std::string("message lacks '") + key + "'");
  if (!j["v"].is_number_integer() || !j["session"].is_string() || !j["kind"].is_string())
    throw SessionAbort("message header has the wrong types");
  Message m;
  m.version = j["v"].get<int>();
  m.session = j["session"].get<std::string>();
  m.kind = parse_message_kind(j["kind"].get<std::string>());
  m.payload = j["payload"];
  validate_payload(m.kind, m.payload);
  return m;
}

const std::vector<std::string>& trapdoor_field_names() {
  static const std::vector<std::string> names{"trapdoor", "s", "e", "p", "q"};
  return names;
}

bool contains_trapdoor_field(const json& j) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      for (const auto& name : trapdoor_field_names())
        if (key == name) return true;
      if (contains_trapdoor_field(value)) return true;
    }
  } else if (j.is_array()) {
    for (const auto& v : j)
      if (contains_trapdoor_field(v)) return true;
  }
  return false;
}

void send_message(Channel& ch, const Message& m) { ch.send_line(encode(m)); }

Message receive_message(Channel& ch, std::chrono::milliseconds timeout) { return decode(ch.receive_line(timeout)); }

// Loopback ------------------------------------------------------------------

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> lines;
  bool closed = false;
};

class LoopbackChannel final : public Channel {
 public:
  LoopbackChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out) : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackChannel() override { close(); }

  void send_line(const std::string& line) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw SessionAbort("loopback peer closed");
    out_->lines.push_back(line);
    out_->cv.notify_all();
  }

  std::string receive_line(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout, [&] { return !in_->lines.empty() || in_->closed; }))
      throw SessionAbort("timed out waiting for a message");
    if (in_->lines.empty()) throw SessionAbort("loopback peer closed");
    std::string line = std::move(in_->lines.front());
    in_->lines.pop_front();
    return line;
  }

  void close() override {
    for (auto* p : {in_.get(), out_.get()}) {
      std::lock_guard lock(p->mu);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_loopback_pair() {
  auto ab = std::make_shared<Pipe>();
  auto ba = std::make_shared<Pipe>();
  return {std::make_unique<LoopbackChannel>(ba, ab), std::make_unique<LoopbackChannel>(ab, ba)};
}

// TCP -----------------------------------------------------------------------

namespace {

std::pair<std::string, std::string> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw ConfigError("address must be host:port, got '" + address + "'");
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "127.0.0.1";
  return {host, address.substr(colon + 1)};
}

class TcpChannel final : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override { close(); }

  void send_line(const std::string& line) override {
    const std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw SessionAbort(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string receive_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw SessionAbort("timed out waiting for a message");
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw SessionAbort(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n == 0) throw SessionAbort("connection closed by peer");
      if (n < 0) {
        if (errno == EINTR) continue;
        throw SessionAbort(std::string("recv failed: ") + std::strerror(errno));
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

addrinfo* resolve(const std::string& address, bool passive) {
  const auto [host, port] = split_address(address);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw ConfigError("cannot resolve '" + address + "': " + ::gai_strerror(rc));
  return res;
}

}  // namespace

TcpListener::TcpListener(const std::string& address) {
  addrinfo* res = resolve(address, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    throw ConfigError(std::string("socket failed: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const int rc = ::bind(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0 || ::listen(fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw ConfigError("cannot listen on '" + address + "': " + why);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<Channel> TcpListener::accept() {
  for (;;) {
    if (fd_ < 0) return nullptr;
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client >= 0) return std::make_unique<TcpChannel>(client);
    if (errno == EINTR) continue;
    return nullptr;
  }
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<Channel> tcp_connect(const std::string& address) {
  addrinfo* res = resolve(address, false);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw SessionAbort(std::string("socket failed: ") + std::strerror(errno));
  }
  const int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw SessionAbort("cannot connect to '" + address + "': " + why);
  }
  return std::make_unique<TcpChannel>(fd);
}

// Verifier endpoint ---------------------------------------------------------

namespace {

/// Verifier-side stand-in for the prover: each call is a wire exchange.
class RemoteProver final : public Prover {
 public:
  RemoteProver(Channel& ch, std::string session, std::chrono::milliseconds timeout)
      : ch_(ch), session_(std::move(session)), timeout_(timeout) {}

  std::string name() const override { return "remote"; }
  void begin_shot(std::uint64_t, std::uint64_t shot) override { shot_ = shot; }

  BitString commit() override { return bits(expect(MessageKind::commit), "w"); }

  BitString answer_standard() override {
    challenge({{"stage", "branch"}, {"branch", "A"}});
    return bits(expect(MessageKind::response), "x");
  }

  BitString answer_hadamard() override {
    challenge({{"stage", "branch"}, {"branch", "B"}});
    return bits(expect(MessageKind::response), "d");
  }

  BitString answer_parity(const BitString& r) override {
    challenge({{"stage", "branch"}, {"branch", "B"}, {"r", r.str()}});
    return bits(expect(MessageKind::response), "d");
  }

  int answer_basis(Basis basis) override {
    challenge({{"stage", "basis"}, {"basis", to_string(basis)}});
    const json p = expect(MessageKind::response);
    if (!p.contains("outcome")) throw ProtocolError("response lacks 'outcome'");
    return p["outcome"].get<int>();
  }

  DelayedAnswer answer_delayed(const Challenge& c) override {
    json payload{{"stage", "full"}, {"branch", to_string(c.branch)}};
    if (!c.r.empty()) payload["r"] = c.r.str();
    if (c.basis) payload["basis"] = to_string(*c.basis);
    challenge(payload);
    DelayedAnswer out;
    out.w = bits(expect(MessageKind::commit), "w");
    const json p = expect(MessageKind::response);
    if (c.branch == Branch::standard) {
      out.response.x = bits(p, "x");
    } else {
      out.response.d = bits(p, "d");
      if (p.contains("outcome")) out.response.outcome = p["outcome"].get<int>();
    }
    return out;
  }

 private:
  void challenge(json payload) {
    payload["shot"] = shot_;
    send_message(ch_, Message{kWireVersion, session_, MessageKind::challenge, payload});
  }

  json expect(MessageKind kind) {
    const Message m = receive_message(ch_, timeout_);
    if (m.session != session_) throw SessionAbort("message for another session");
    if (m.kind == MessageKind::close) throw SessionAbort("prover closed the session");
    if (m.kind == MessageKind::error) throw ProtocolError("prover error: " + m.payload["message"].get<std::string>());
    if (m.kind != kind) throw ProtocolError("expected " + to_string(kind) + ", received " + to_string(m.kind));
    if (m.payload.value("shot", shot_ + 1) != shot_) throw ProtocolError("message refers to another shot");
    return m.payload;
  }

  static BitString bits(const json& payload, const char* field) {
    if (!payload.contains(field)) throw ProtocolError(std::string("message lacks '") + field + "'");
    return BitString::parse(payload[field].get<std::string>());
  }

  Channel& ch_;
  std::string session_;
  std::chrono::milliseconds timeout_;
  std::uint64_t shot_ = 0;
};

}  // namespace

SessionResult run_verifier_session(Channel& ch, const VerifierEndpointConfig& config, const std::string& session_id) {
  SessionResult result;
  result.session = session_id;
  auto send = [&](MessageKind kind, json payload) {
    send_message(ch, Message{kWireVersion, session_id, kind, std::move(payload)});
  };
  auto fail = [&](const std::string& why) {
    result.aborted = true;
    result.error = why;
    try {
      send(MessageKind::error, {{"message", why}});
      send(MessageKind::close, {{"reason", "aborted"}});
    } catch (const SessionAbort&) {
      // Peer already gone.
    }
  };

  try {
    const Message hello = receive_message(ch, config.timeout);
    if (hello.kind != MessageKind::hello) throw SessionAbort("session must open with hello");
    if (hello.version != kWireVersion)
      throw SessionAbort("wire version mismatch: expected " + std::to_string(kWireVersion) + ", got " +
                         std::to_string(hello.version));
    send(MessageKind::hello, {{"role", "verifier"},
                              {"protocol", to_string(kind_of(config.keys.pub))},
                              {"instance", id_of(config.keys.pub)}});
    const auto& exp = config.experiment;
    send(MessageKind::instance, {{"instance", public_to_json(config.keys.pub)},
                                 {"mode", to_string(exp.mode)},
                                 {"shots_a", exp.shots_a},
                                 {"shots_b", exp.shots_b},
                                 {"seed", exp.seed},
                                 {"lwe_d_includes_b", exp.options.lwe_d_includes_b}});

    RemoteProver remote(ch, session_id, config.timeout);
    for (std::uint64_t shot = 0; shot < exp.shots_a + exp.shots_b; ++shot) {
      ShotRecord rec = run_shot(config.keys, exp, shot, remote);
      if (rec.status == ShotStatus::voided) send(MessageKind::error, {{"message", rec.anomaly}});
      send(MessageKind::verdict, {{"shot", shot}, {"status", to_string(rec.status)}, {"verdict", to_string(rec.verdict)}});
      result.tally.add(rec);
      result.records.push_back(std::move(rec));
    }
    send(MessageKind::summary, {{"tally", to_json(result.tally)}});
    send(MessageKind::close, {{"reason", "done"}});
  } catch (const SessionAbort& e) {
    fail(e.what());
  }
  return result;
}

EndpointResult run_verifier_endpoint(Listener& listener, const VerifierEndpointConfig& config,
                                     std::size_t max_sessions) {
  EndpointResult out;
  std::mutex mu;
  std::vector<std::thread> workers;
  std::vector<std::unique_ptr<Channel>> channels;
  for (std::size_t index = 0; max_sessions == 0 || index < max_sessions; ++index) {
    auto ch = listener.accept();
    if (!ch) break;
    out.sessions.emplace_back();
    channels.push_back(std::move(ch));
    Channel* raw = channels.back().get();
    workers.emplace_back([&, raw, index] {
      SessionResult r = run_verifier_session(*raw, config, "s" + std::to_string(index + 1));
      raw->close();
      std::lock_guard lock(mu);
      out.tally.merge(r.tally);
      out.sessions[index] = std::move(r);
    });
  }
  for (auto& w : workers) w.join();
  return out;
}

// Prover endpoint -----------------------------------------------------------

ProverSessionLog run_prover_endpoint(Channel& ch, const ProverEndpointConfig& config, const ProverFactory& factory) {
  ProverSessionLog log;
  std::string session;
  auto send = [&](MessageKind kind, json payload) {
    Message m{kWireVersion, session, kind, std::move(payload)};
    const std::string line = encode(m);
    log.lines.push_back("> " + line);
    ch.send_line(line);
  };
  auto receive = [&]() {
    const std::string line = ch.receive_line(config.timeout);
    log.lines.push_back("< " + line);
    Message m = decode(line);
    if (m.kind == MessageKind::close) throw SessionAbort("verifier closed the session");
    return m;
  };

  std::uint64_t total = 0;
  std::uint64_t shot = 0;
  bool in_shot = false;
  try {
    send(MessageKind::hello, {{"role", "prover"}});
    Message hello = receive();
    if (hello.kind == MessageKind::error) throw SessionAbort(hello.payload["message"].get<std::string>());
    if (hello.kind != MessageKind::hello) throw SessionAbort("expected hello from the verifier");
    if (hello.version != kWireVersion) throw SessionAbort("wire version mismatch");
    session = hello.session;

    Message inst_msg = receive();
    if (inst_msg.kind != MessageKind::instance) throw SessionAbort("expected the instance");
    const auto& p = inst_msg.payload;
    if (contains_trapdoor_field(p)) throw SessionAbort("instance message carries trapdoor material");
    const PublicInstance inst = public_from_json(p["instance"]);
    const Mode mode = parse_mode(p["mode"].get<std::string>());
    total = p["shots_a"].get<std::uint64_t>() + p["shots_b"].get<std::uint64_t>();
    const std::uint64_t seed = config.seed.value_or(p["seed"].get<std::uint64_t>());
    std::unique_ptr<Prover> prover = factory(inst);

    for (shot = 0; shot < total; ++shot) {
      in_shot = true;
      prover->begin_shot(seed, shot);
      if (mode == Mode::interactive) send(MessageKind::commit, {{"shot", shot}, {"w", prover->commit().str()}});
      for (;;) {
        const Message m = receive();
        if (m.kind == MessageKind::verdict) break;
        if (m.kind == MessageKind::error) continue;
        if (m.kind != MessageKind::challenge) throw SessionAbort("unexpected " + to_string(m.kind) + " during a shot");
        const auto& c = m.payload;
        const std::string stage = c["stage"].get<std::string>();
        try {
          if (stage == "full") {
            Challenge ch_full;
            ch_full.branch = parse_branch(c.value("branch", "A"));
            if (c.contains("r")) ch_full.r = BitString::parse(c["r"].get<std::string>());
            if (c.contains("basis")) ch_full.basis = parse_basis(c["basis"].get<std::string>());
            const auto ans = prover->answer_delayed(ch_full);
            send(MessageKind::commit, {{"shot", shot}, {"w", ans.w.str()}});
            json resp{{"shot", shot}};
            if (!ans.response.x.empty()) resp["x"] = ans.response.x.str();
            if (!ans.response.d.empty()) resp["d"] = ans.response.d.str();
            if (ans.response.outcome) resp["outcome"] = *ans.response.outcome;
            send(MessageKind::response, resp);
          } else if (stage == "branch") {
            const Branch branch = parse_branch(c.value("branch", ""));
            if (branch == Branch::standard)
              send(MessageKind::response, {{"shot", shot}, {"x", prover->answer_standard().str()}});
            else if (c.contains("r"))
              send(MessageKind::response,
                   {{"shot", shot}, {"d", prover->answer_parity(BitString::parse(c["r"].get<std::string>())).str()}});
            else
              send(MessageKind::response, {{"shot", shot}, {"d", prover->answer_hadamard().str()}});
          } else if (stage == "basis") {
            send(MessageKind::response,
                 {{"shot", shot}, {"outcome", prover->answer_basis(parse_basis(c.value("basis", "")))}});
          } else {
            throw ProtocolError("unknown challenge stage '" + stage + "'");
          }
        } catch (const ProtocolError& e) {
          send(MessageKind::error, {{"message", e.what()}});
        } catch (const ContractViolation& e) {
          send(MessageKind::error, {{"message", e.what()}});
        }
      }
      in_shot = false;
      ++log.shots_completed;
    }
    const Message summary = receive();
    if (summary.kind == MessageKind::summary) log.summary = tally_from_json(summary.payload["tally"]);
    try {
      receive();
    } catch (const SessionAbort&) {
      // The closing message ends the session.
    }
  } catch (const SessionAbort& e) {
    log.error = e.what();
    log.incomplete = in_shot || log.shots_completed < total || total == 0;
  } catch (const ConfigError& e) {
    log.error = e.what();
    log.incomplete = true;
  }
  return log;
}

}  // namespace poq
