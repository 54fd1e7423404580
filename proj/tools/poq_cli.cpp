// Command-line driver: instance generation, in-process and networked runs, statistics.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "poq/cheater.hpp"
#include "poq/circuits.hpp"
#include "poq/errors.hpp"
#include "poq/protocol.hpp"
#include "poq/stats.hpp"
#include "poq/tcf.hpp"
#include "poq/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace poq;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitSelftest = 4;

struct Settings {
  std::string protocol;
  std::string instance;
  std::string mode = "interactive";
  std::string prover = "honest";
  std::string out;
  std::uint64_t shots_a = 0;
  std::uint64_t shots_b = 0;
  std::uint64_t seed = 1;
  bool direct_oracle = false;
  bool lwe_d_includes_b = true;
  std::string listen = "127.0.0.1:7777";
  std::string connect = "127.0.0.1:7777";
  std::uint64_t sessions = 1;
  std::uint64_t timeout_ms = 30000;
};

/// Registers the shared flags; `given` later tells which ones the user set.
struct SettingFlags {
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App& app, const std::string& key, const std::string& flag, auto& target, const std::string& help) {
    options.emplace_back(key, app.add_option(flag, target, help));
  }
  void add_flag(CLI::App& app, const std::string& key, const std::string& flag, bool& target, const std::string& help) {
    options.emplace_back(key, app.add_flag(flag, target, help));
  }
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

/// File values first, then every flag the user passed explicitly.
Settings merge_settings(const std::string& config_path, const Settings& cli, const SettingFlags& flags) {
  Settings s;
  if (!config_path.empty()) {
    const json j = read_json_file(config_path);
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    try {
      for (const auto& [key, v] : j.items()) {
        if (key == "protocol") s.protocol = v.get<std::string>();
        else if (key == "instance") s.instance = v.get<std::string>();
        else if (key == "mode") s.mode = v.get<std::string>();
        else if (key == "prover") s.prover = v.get<std::string>();
        else if (key == "out") s.out = v.get<std::string>();
        else if (key == "shots_a") s.shots_a = v.get<std::uint64_t>();
        else if (key == "shots_b") s.shots_b = v.get<std::uint64_t>();
        else if (key == "seed") s.seed = v.get<std::uint64_t>();
        else if (key == "direct_oracle") s.direct_oracle = v.get<bool>();
        else if (key == "lwe_d_includes_b") s.lwe_d_includes_b = v.get<bool>();
        else if (key == "listen") s.listen = v.get<std::string>();
        else if (key == "connect") s.connect = v.get<std::string>();
        else if (key == "sessions") s.sessions = v.get<std::uint64_t>();
        else if (key == "timeout_ms") s.timeout_ms = v.get<std::uint64_t>();
        else throw ConfigError("config: unknown key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  for (const auto& [key, opt] : flags.options) {
    if (opt->count() == 0) continue;
    if (key == "protocol") s.protocol = cli.protocol;
    else if (key == "instance") s.instance = cli.instance;
    else if (key == "mode") s.mode = cli.mode;
    else if (key == "prover") s.prover = cli.prover;
    else if (key == "out") s.out = cli.out;
    else if (key == "shots_a") s.shots_a = cli.shots_a;
    else if (key == "shots_b") s.shots_b = cli.shots_b;
    else if (key == "seed") s.seed = cli.seed;
    else if (key == "direct_oracle") s.direct_oracle = cli.direct_oracle;
    else if (key == "lwe_d_excludes_b") s.lwe_d_includes_b = !cli.lwe_d_includes_b;
    else if (key == "listen") s.listen = cli.listen;
    else if (key == "connect") s.connect = cli.connect;
    else if (key == "sessions") s.sessions = cli.sessions;
    else if (key == "timeout_ms") s.timeout_ms = cli.timeout_ms;
  }
  return s;
}

/// "paper:<id>" or a keypair JSON file.
KeyPair resolve_instance(const std::string& protocol, const std::string& spec) {
  if (spec.empty()) throw ConfigError("--instance is required");
  const std::string prefix = "paper:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string id = spec.substr(prefix.size());
    ProtocolKind kind;
    if (!protocol.empty())
      kind = parse_protocol_kind(protocol);
    else
      kind = (id.size() == 1 && id[0] >= '0' && id[0] <= '3') ? ProtocolKind::lwe : ProtocolKind::factoring;
    return paper_instance(kind, id);
  }
  KeyPair keys = keypair_from_json(read_json_file(spec));
  if (!protocol.empty() && parse_protocol_kind(protocol) != kind_of(keys.pub))
    throw ConfigError("--protocol does not match the instance file");
  return keys;
}

ExperimentConfig experiment_config(const Settings& s) {
  ExperimentConfig c;
  c.shots_a = s.shots_a;
  c.shots_b = s.shots_b;
  c.mode = parse_mode(s.mode);
  c.seed = s.seed;
  c.options.lwe_d_includes_b = s.lwe_d_includes_b;
  return c;
}

void add_experiment_flags(CLI::App& app, Settings& cli, SettingFlags& flags) {
  flags.add(app, "protocol", "--protocol", cli.protocol, "lwe or factoring");
  flags.add(app, "instance", "--instance", cli.instance, "instance file or paper:<id>");
  flags.add(app, "shots_a", "--shots-a", cli.shots_a, "branch A shots");
  flags.add(app, "shots_b", "--shots-b", cli.shots_b, "branch B shots");
  flags.add(app, "mode", "--mode", cli.mode, "interactive or delayed");
  flags.add(app, "seed", "--seed", cli.seed, "root seed");
  flags.add(app, "out", "--out", cli.out, "output directory");
  flags.add_flag(app, "lwe_d_excludes_b", "--lwe-d-excludes-b", cli.lwe_d_includes_b,
                 "score LWE d on the x bits only");
}

void write_outputs(const Settings& s, const KeyPair& keys, const Tally& tally, const std::vector<ShotRecord>& records,
                   const std::string& shots_name) {
  const ExperimentSummary summary = summarize(keys.pub, s.mode, tally);
  if (!s.out.empty()) {
    fs::create_directories(s.out);
    std::string lines;
    for (const auto& r : records) lines += canonical_line(r) + "\n";
    write_text(fs::path(s.out) / shots_name, lines);
    write_text(fs::path(s.out) / "tally.json", to_json(tally).dump(2) + "\n");
    write_text(fs::path(s.out) / "summary.json", to_json(summary).dump(2) + "\n");
  }
  std::cout << json{{"tally", to_json(tally)}, {"summary", to_json(summary)}}.dump(2) << "\n";
}

// Subcommands ----------------------------------------------------------------

struct KeygenArgs {
  std::string protocol;
  std::string paper;
  std::uint64_t m = 4, n = 2, modulus = 4, seed = 1;
  double sigma = 0.5;
  std::uint64_t prime_p = 0, prime_q = 0, demo = 0;
  unsigned nx = 0, ny = 0;
  bool public_only = false;
  std::string out;
};

int cmd_keygen(const KeygenArgs& a) {
  if (a.protocol.empty()) throw ConfigError("keygen needs --protocol");
  const ProtocolKind kind = parse_protocol_kind(a.protocol);
  KeyPair keys;
  if (!a.paper.empty()) {
    keys = paper_instance(kind, a.paper);
  } else if (kind == ProtocolKind::lwe) {
    keys = lwe_keygen(a.m, a.n, a.modulus, a.sigma, a.seed);
  } else {
    if (a.nx == 0 || a.ny == 0) throw ConfigError("factoring keygen needs --nx and --ny");
    keys = a.demo ? rabin_demo(a.demo, a.nx, a.ny) : rabin_keygen(a.prime_p, a.prime_q, a.nx, a.ny);
  }
  const json j = a.public_only ? public_to_json(keys.pub) : keypair_to_json(keys);
  if (a.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_text(a.out, j.dump(2) + "\n");
  return 0;
}

int cmd_run(const Settings& s) {
  const KeyPair keys = resolve_instance(s.protocol, s.instance);
  auto prover = make_prover(s.prover, keys.pub, !s.direct_oracle);
  const auto result = run_experiment(keys, experiment_config(s), *prover);
  write_outputs(s, keys, result.tally, result.records, "shots.jsonl");
  return 0;
}

int cmd_serve(const Settings& s) {
  VerifierEndpointConfig cfg{resolve_instance(s.protocol, s.instance), experiment_config(s),
                             std::chrono::milliseconds(s.timeout_ms)};
  TcpListener listener(s.listen);
  std::cerr << "listening on port " << listener.bound_port() << std::endl;
  const EndpointResult result = run_verifier_endpoint(listener, cfg, s.sessions);
  std::vector<ShotRecord> records;
  bool aborted = false;
  for (const auto& session : result.sessions) {
    if (session.aborted) {
      std::cerr << "session " << session.session << " aborted: " << session.error << "\n";
      aborted = true;
    }
    records.insert(records.end(), session.records.begin(), session.records.end());
  }
  write_outputs(s, cfg.keys, result.tally, records, "shots.jsonl");
  return aborted ? kExitProtocol : 0;
}

int cmd_prove(const Settings& s, const std::string& log_path, bool seed_given) {
  auto channel = tcp_connect(s.connect);
  ProverEndpointConfig cfg;
  if (seed_given) cfg.seed = s.seed;
  cfg.timeout = std::chrono::milliseconds(s.timeout_ms);
  const bool compiled = !s.direct_oracle;
  const std::string spec = s.prover;
  const auto log = run_prover_endpoint(*channel, cfg, [&](const PublicInstance& inst) {
    return make_prover(spec, inst, compiled);
  });
  if (!log_path.empty()) {
    std::string text;
    for (const auto& line : log.lines) text += line + "\n";
    write_text(log_path, text);
  }
  json out{{"shots_completed", log.shots_completed}, {"incomplete", log.incomplete}};
  if (log.summary) out["tally"] = to_json(*log.summary);
  if (!log.error.empty()) out["error"] = log.error;
  std::cout << out.dump(2) << "\n";
  return log.incomplete ? kExitProtocol : 0;
}

struct StatsArgs {
  std::string tally;
  std::string instance;
  std::string protocol;
  std::string mode = "interactive";
  std::vector<std::uint64_t> counts;
  double contour_sigma = 0.0;
  bool exhaustive = false;
};

int cmd_stats(const StatsArgs& a) {
  if (!a.counts.empty()) {
    if (a.counts.size() != 4) throw ConfigError("--counts takes k_A N_A k_B N_B");
    if (a.protocol.empty()) throw ConfigError("--counts needs --protocol");
    const ProtocolKind kind = parse_protocol_kind(a.protocol);
    const auto [k_a, n_a, k_b, n_b] = std::array{a.counts[0], a.counts[1], a.counts[2], a.counts[3]};
    if (k_a > n_a || k_b > n_b || n_a == 0 || n_b == 0) throw ConfigError("counts need 0 <= k <= N and N > 0");
    const auto r = significance_detail(k_a, n_a, k_b, n_b, kind,
                                       a.exhaustive ? NullSearch::exhaustive : NullSearch::refined);
    json out{{"q", r.q}, {"sigma", r.sigma}, {"log_p", r.log_p}, {"null_p_A", r.null_p_a}};
    if (a.contour_sigma > 0) {
      const auto c = contour_q_for_sigma(n_a, n_b, a.contour_sigma, kind);
      out["contour"] = c.reachable ? json{{"sigma", a.contour_sigma}, {"q", c.q}}
                                   : json{{"sigma", a.contour_sigma}, {"unreachable", true}};
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  if (a.tally.empty() || a.instance.empty()) throw ConfigError("stats needs --tally and --instance, or --counts");
  const KeyPair keys = resolve_instance(a.protocol, a.instance);
  const ExperimentSummary s = summarize(keys.pub, a.mode, tally_from_json(read_json_file(a.tally)));
  json out = to_json(s);
  if (a.contour_sigma > 0 && s.n_a > 0 && s.n_b > 0) {
    const auto c = contour_q_for_sigma(s.n_a, s.n_b, a.contour_sigma, s.protocol);
    out["contour"] = c.reachable ? json{{"sigma", a.contour_sigma}, {"q", c.q}}
                                 : json{{"sigma", a.contour_sigma}, {"unreachable", true}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& csv, const std::string& json_path) {
  if (inputs.empty()) throw ConfigError("report needs at least one --summary file");
  std::vector<ExperimentSummary> summaries;
  json all = json::array();
  for (const auto& path : inputs) {
    summaries.push_back(summary_from_json(read_json_file(path)));
    all.push_back(to_json(summaries.back()));
  }
  const std::string text = report_csv(summaries);
  if (csv.empty())
    std::cout << text;
  else
    write_text(csv, text);
  if (!json_path.empty()) write_text(json_path, all.dump(2) + "\n");
  return 0;
}

/// Quick structural and statistical checks; exit code 4 on any failure.
int cmd_selftest() {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    failures += ok ? 0 : 1;
  };

  // Published factoring N=8 interactive row.
  const double sig = significance(3899, 4096, 11862, 15267, ProtocolKind::factoring);
  check("significance N=8 interactive row within 0.2 of 4.3", std::abs(sig - 4.3) <= 0.2);

  for (const char* id : {"8", "15", "16", "21"}) {
    const KeyPair keys = paper_instance(ProtocolKind::factoring, id);
    const auto& inst = std::get<RabinInstance>(keys.pub);
    const auto a = build_factoring_commit(inst, true);
    const auto b = build_factoring_commit(inst, false);
    StateVector sa(a.n_qubits);
    StateVector sb(b.n_qubits);
    apply_unitary_steps(sa, a.steps);
    apply_unitary_steps(sb, b.steps);
    const Amplitude phase = std::polar(1.0, compute_phase_terms(inst.modulus, inst.input_bits, inst.output_bits).global_phase);
    double err = 0.0;
    for (std::size_t i = 0; i < sa.dimension(); ++i) err = std::max(err, std::abs(sa.amplitude(i) * phase - sb.amplitude(i)));
    check(std::string("compiled phase oracle matches diagonal, N=") + id, err < 1e-9);
  }

  for (int idx = 0; idx < 4; ++idx) {
    const KeyPair keys = lwe_paper_instance(idx);
    HonestProver prover(keys.pub);
    ExperimentConfig cfg;
    cfg.shots_a = 200;
    cfg.shots_b = 200;
    cfg.seed = 7;
    const auto r = run_experiment(keys, cfg, prover);
    check("honest LWE instance " + std::to_string(idx) + " passes every kept shot",
          r.tally.a.k == r.tally.a.n && r.tally.b.k == r.tally.b.n && r.tally.a.n == 200);
  }

  {
    const KeyPair keys = paper_instance(ProtocolKind::factoring, "8");
    HonestProver prover(keys.pub);
    ExperimentConfig cfg;
    cfg.shots_a = 500;
    cfg.seed = 3;
    const auto r = run_experiment(keys, cfg, prover);
    check("honest factoring N=8 branch A passes every kept shot", r.tally.a.k == r.tally.a.n && r.tally.a.n > 0);
  }
  std::cout << (failures == 0 ? "selftest passed" : "selftest failed") << "\n";
  return failures == 0 ? 0 : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proof-of-quantumness protocol simulator"};
  app.require_subcommand(1);

  Settings cli;
  std::string config_path;

  KeygenArgs keygen;
  auto* k = app.add_subcommand("keygen", "emit an instance file");
  k->add_option("--protocol", keygen.protocol, "lwe or factoring")->required();
  k->add_option("--paper", keygen.paper, "published instance id");
  k->add_option("--m", keygen.m, "LWE rows");
  k->add_option("--n", keygen.n, "LWE columns");
  k->add_option("--modulus", keygen.modulus, "LWE modulus (power of two)");
  k->add_option("--sigma", keygen.sigma, "LWE error width");
  k->add_option("--seed", keygen.seed, "LWE key seed");
  k->add_option("--prime-p", keygen.prime_p, "factoring prime p");
  k->add_option("--prime-q", keygen.prime_q, "factoring prime q");
  k->add_option("--demo", keygen.demo, "power-of-two demo modulus");
  k->add_option("--nx", keygen.nx, "x register width");
  k->add_option("--ny", keygen.ny, "y register width");
  k->add_flag("--public-only", keygen.public_only, "omit the trapdoor");
  k->add_option("--out", keygen.out, "output file (stdout when absent)");

  SettingFlags run_flags;
  auto* run = app.add_subcommand("run", "in-process experiment");
  run->add_option("--config", config_path, "JSON config file");
  add_experiment_flags(*run, cli, run_flags);
  run_flags.add(*run, "prover", "--prover", cli.prover, "honest or cheater:<name>");
  run_flags.add_flag(*run, "direct_oracle", "--direct-oracle", cli.direct_oracle, "diagonal phase oracle instead of gates");

  SettingFlags serve_flags;
  auto* serve = app.add_subcommand("serve-verifier", "verifier endpoint over TCP");
  serve->add_option("--config", config_path, "JSON config file");
  add_experiment_flags(*serve, cli, serve_flags);
  serve_flags.add(*serve, "listen", "--listen", cli.listen, "host:port");
  serve_flags.add(*serve, "sessions", "--sessions", cli.sessions, "sessions to serve (0 = unbounded)");
  serve_flags.add(*serve, "timeout_ms", "--timeout-ms", cli.timeout_ms, "per-message timeout");

  SettingFlags prove_flags;
  std::string log_path;
  auto* prove = app.add_subcommand("prove", "prover endpoint over TCP");
  prove->add_option("--config", config_path, "JSON config file");
  prove_flags.add(*prove, "connect", "--connect", cli.connect, "host:port");
  prove_flags.add(*prove, "prover", "--prover", cli.prover, "honest or cheater:<name>");
  prove_flags.add(*prove, "seed", "--seed", cli.seed, "prover seed (defaults to the verifier's)");
  prove_flags.add(*prove, "timeout_ms", "--timeout-ms", cli.timeout_ms, "per-message timeout");
  prove_flags.add_flag(*prove, "direct_oracle", "--direct-oracle", cli.direct_oracle, "diagonal phase oracle");
  prove->add_option("--log", log_path, "session transcript file");

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "q, sigma and R from a tally or raw counts");
  st->add_option("--tally", stats.tally, "tally.json");
  st->add_option("--instance", stats.instance, "instance file or paper:<id>");
  st->add_option("--protocol", stats.protocol, "lwe or factoring");
  st->add_option("--mode", stats.mode, "label for the report");
  st->add_option("--counts", stats.counts, "k_A N_A k_B N_B")->expected(4);
  st->add_option("--contour", stats.contour_sigma, "also report q' reaching this significance");
  st->add_flag("--exhaustive", stats.exhaustive, "scan every 1e-3 null");

  std::vector<std::string> report_inputs;
  std::string report_csv_path;
  std::string report_json_path;
  auto* rep = app.add_subcommand("report", "CSV and JSON from summary files");
  rep->add_option("--summary", report_inputs, "summary.json files")->required();
  rep->add_option("--csv", report_csv_path, "CSV output (stdout when absent)");
  rep->add_option("--json", report_json_path, "JSON output");

  auto* self = app.add_subcommand("selftest", "quick acceptance checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*k) return cmd_keygen(keygen);
    if (*run) return cmd_run(merge_settings(config_path, cli, run_flags));
    if (*serve) return cmd_serve(merge_settings(config_path, cli, serve_flags));
    if (*prove) {
      const Settings s = merge_settings(config_path, cli, prove_flags);
      bool seed_given = false;
      for (const auto& [key, opt] : prove_flags.options) seed_given = seed_given || (key == "seed" && opt->count() > 0);
      return cmd_prove(s, log_path, seed_given);
    }
    if (*st) return cmd_stats(stats);
    if (*rep) return cmd_report(report_inputs, report_csv_path, report_json_path);
    if (*self) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const SessionAbort& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  }
  return 0;
}
