#pragma once

// Newline-delimited JSON messages between a verifier and a prover process,
// an in-process loopback channel, POSIX TCP transport and both endpoints.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "poq/protocol.hpp"

namespace poq {

inline constexpr int kWireVersion = 1;

/// Ends the whole session: timeout, disconnect, malformed line or version mismatch.
class SessionAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MessageKind { hello, instance, commit, challenge, response, verdict, summary, close, error };

std::string to_string(MessageKind kind);
MessageKind parse_message_kind(const std::string& text);

struct Message {
  int version = kWireVersion;
  std::string session;
  MessageKind kind = MessageKind::hello;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const Message&) const = default;
};

/// Compact JSON, no trailing newline.
std::string encode(const Message& m);
/// Strict: unknown or missing fields and payloads off-schema throw SessionAbort.
Message decode(const std::string& line);

/// Field names that never appear in verifier-to-prover traffic.
const std::vector<std::string>& trapdoor_field_names();
/// True when any object key at any depth is a trapdoor field name.
bool contains_trapdoor_field(const nlohmann::json& j);

class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Next line without its newline. Throws SessionAbort on timeout or a closed peer.
  virtual std::string receive_line(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

void send_message(Channel& ch, const Message& m);
Message receive_message(Channel& ch, std::chrono::milliseconds timeout);

/// Two connected in-process channel ends.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_loopback_pair();

class Listener {
 public:
  virtual ~Listener() = default;
  /// Blocks for the next connection; nullptr once closed.
  virtual std::unique_ptr<Channel> accept() = 0;
  virtual void close() = 0;
};

/// "host:port"; port 0 picks a free port (see bound_port).
class TcpListener final : public Listener {
 public:
  explicit TcpListener(const std::string& address);
  ~TcpListener() override;
  std::unique_ptr<Channel> accept() override;
  void close() override;
  int bound_port() const { return port_; }

 private:
  int fd_ = -1;
  int port_ = 0;
};

std::unique_ptr<Channel> tcp_connect(const std::string& address);

// Endpoints -----------------------------------------------------------------

struct VerifierEndpointConfig {
  KeyPair keys;
  ExperimentConfig experiment;
  std::chrono::milliseconds timeout{30000};
};

struct SessionResult {
  std::string session;
  Tally tally;
  std::vector<ShotRecord> records;
  bool aborted = false;
  std::string error;
};

/// One session: hello, instance, every scheduled shot, summary, close.
SessionResult run_verifier_session(Channel& ch, const VerifierEndpointConfig& config, const std::string& session_id);

/// Serves up to max_sessions connections concurrently (0 = until the listener closes).
/// Returns the merged tally and every session result in acceptance order.
struct EndpointResult {
  Tally tally;
  std::vector<SessionResult> sessions;
};
EndpointResult run_verifier_endpoint(Listener& listener, const VerifierEndpointConfig& config,
                                     std::size_t max_sessions);

using ProverFactory = std::function<std::unique_ptr<Prover>(const PublicInstance&)>;

struct ProverEndpointConfig {
  /// Prover randomness root; the seed advertised by the verifier when unset.
  std::optional<std::uint64_t> seed;
  std::chrono::milliseconds timeout{30000};
};

struct ProverSessionLog {
  std::vector<std::string> lines;  // every message, prefixed "> " sent or "< " received
  std::uint64_t shots_completed = 0;
  bool incomplete = false;
  std::string error;
  std::optional<Tally> summary;
};

ProverSessionLog run_prover_endpoint(Channel& ch, const ProverEndpointConfig& config, const ProverFactory& factory);

}  // namespace poq
