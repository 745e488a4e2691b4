// Command-line front end over the C API.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <pthread.h>

#include "CLI11.hpp"
#include "btrads/btrads.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTransport = 3;

int exit_code(btrads_status s) {
  switch (s) {
    case BTRADS_OK: return kExitOk;
    case BTRADS_E_USAGE: return kExitUsage;
    case BTRADS_E_TRANSPORT: return kExitTransport;
    default: return kExitData;
  }
}

int report(btrads_status s) {
  if (s != BTRADS_OK) std::cerr << "btrads: " << btrads_last_error() << '\n';
  return exit_code(s);
}

struct CString {
  char* p = nullptr;
  ~CString() { btrads_free_string(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct ConfigDeleter {
  void operator()(btrads_config* c) const { btrads_config_free(c); }
};
using ConfigPtr = std::unique_ptr<btrads_config, ConfigDeleter>;

btrads_status load_config(const std::string& path, const std::string& backend, ConfigPtr& out) {
  btrads_config* raw = nullptr;
  btrads_status s = path.empty() ? btrads_config_default(&raw) : btrads_config_load(path.c_str(), &raw);
  out.reset(raw);
  if (s != BTRADS_OK || backend.empty()) return s;
  return btrads_config_set_backend(out.get(), backend.c_str());
}

std::optional<std::string> slurp(const std::string& path) {
  if (path == "-") return std::string(std::istreambuf_iterator<char>(std::cin), {});
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_score(const std::string& cases, const std::string& config_path, const std::string& out,
              const std::string& store, const std::string& backend) {
  ConfigPtr config;
  if (auto s = load_config(config_path, backend, config); s != BTRADS_OK) return report(s);
  CString summary;
  const auto s = btrads_score_file(config.get(), cases.c_str(), out.c_str(), store.empty() ? nullptr : store.c_str(),
                                   &summary.p);
  if (s != BTRADS_OK) return report(s);
  std::cout << summary.str() << '\n';
  return kExitOk;
}

int run_evaluate(const std::string& reports, const std::string& out, const std::string& tables_path) {
  CString tables;
  const auto s = btrads_evaluate_file(reports.c_str(), out.empty() ? nullptr : out.c_str(), &tables.p);
  if (s != BTRADS_OK) return report(s);
  if (!tables_path.empty()) {
    std::ofstream f(tables_path, std::ios::binary | std::ios::trunc);
    if (!(f << tables.str())) {
      std::cerr << "btrads: cannot write " << tables_path << '\n';
      return kExitData;
    }
  }
  std::cout << tables.str();
  return kExitOk;
}

int run_extract(const std::string& note_path, const std::string& backend, const std::string& config_path) {
  const auto note = slurp(note_path);
  if (!note) {
    std::cerr << "btrads: cannot read " << note_path << '\n';
    return kExitData;
  }
  ConfigPtr config;
  if (auto s = load_config(config_path, backend, config); s != BTRADS_OK) return report(s);
  CString vars;
  const auto s = btrads_extract(config.get(), note->c_str(), &vars.p);
  if (s != BTRADS_OK) return report(s);
  std::cout << vars.str() << '\n';
  return kExitOk;
}

int run_serve(const std::string& host, int port, const std::string& store_dir, const std::string& config_path,
              std::string token) {
  if (token.empty()) {
    if (const char* env = std::getenv("BTRADS_TOKEN")) token = env;
  }
  ConfigPtr config;
  if (auto s = load_config(config_path, "", config); s != BTRADS_OK) return report(s);
  btrads_store* store = nullptr;
  if (auto s = btrads_store_open(store_dir.c_str(), &store); s != BTRADS_OK) return report(s);

  // Signals are taken synchronously on this thread; the server threads
  // inherit the blocked mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  btrads_service* service = nullptr;
  const auto s = btrads_service_start(store, config.get(), host.c_str(), port, token.empty() ? nullptr : token.c_str(),
                                      &service);
  if (s != BTRADS_OK) {
    btrads_store_close(store);
    return report(s);
  }
  std::cout << "listening on http://" << host << ':' << btrads_service_port(service) << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  btrads_service_stop(service);
  btrads_service_free(service);
  btrads_store_close(store);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BT-RADS scoring, evaluation and review service"};
  app.require_subcommand(1);
  app.set_version_flag("--version", btrads_version());

  std::string cases, config_path, out, store, backend, reports, tables, note, host = "127.0.0.1", token,
      profile = "reference";
  int port = 8080;
  std::uint64_t seed = 509;

  auto* score = app.add_subcommand("score", "Score a case file and write one report per line");
  score->add_option("--cases", cases, "Cases, one JSON object per line")->required();
  score->add_option("--config", config_path, "Pipeline configuration (JSON)");
  score->add_option("--out", out, "Report file to write")->required();
  score->add_option("--store", store, "Also load the reports into a case store directory");
  score->add_option("--backend", backend, "Override the configured backend")->check(CLI::IsMember({"patterns", "llm"}));

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a report file");
  evaluate->add_option("--reports", reports, "Report file written by score")->required();
  evaluate->add_option("--out", out, "Evaluation JSON to write");
  evaluate->add_option("--tables", tables, "Also write the text tables here");

  auto* extract = app.add_subcommand("extract", "Extract clinical variables from one note");
  extract->add_option("--note", note, "Note file, or - for standard input")->required();
  extract->add_option("--backend", backend, "Extraction backend")
      ->check(CLI::IsMember({"patterns", "llm"}))
      ->default_val("patterns");
  extract->add_option("--config", config_path, "Pipeline configuration (JSON) for the LLM endpoint");

  auto* serve = app.add_subcommand("serve", "Start the HTTP review service");
  serve->add_option("--port", port, "Port, 0 for any free port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--store", store, "Case store directory")->required();
  serve->add_option("--config", config_path, "Pipeline configuration (JSON) used for rescoring");
  serve->add_option("--token", token, "Shared token required in the X-Btrads-Token header (or BTRADS_TOKEN)");

  auto* fixtures = app.add_subcommand("fixtures", "Synthetic datasets");
  fixtures->require_subcommand(1);
  auto* generate = fixtures->add_subcommand("generate", "Write cases.jsonl, volumetrics.tsv and config.json");
  generate->add_option("--profile", profile, "Dataset profile")->check(CLI::IsMember({"reference"}));
  generate->add_option("--out", out, "Output directory")->required();
  generate->add_option("--seed", seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*score) return run_score(cases, config_path, out, store, backend);
  if (*evaluate) return run_evaluate(reports, out, tables);
  if (*extract) return run_extract(note, backend, config_path);
  if (*serve) return run_serve(host, port, store, config_path, token);
  if (*generate) return report(btrads_fixtures_generate(profile.c_str(), seed, out.c_str()));
  return kExitUsage;
}
