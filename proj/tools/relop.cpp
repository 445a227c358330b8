// relop: command-line driver for the relative-opinion pipeline.
//
//   relop <stage> --config <path> [--key value ...]
//   relop config print --config <path> [--key value ...]
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pipeline.hpp"

namespace {

relop::Config load_config(const std::string& path, const std::vector<std::string>& extras) {
  if (path.empty()) throw relop::UsageError("--config is required");
  relop::Config cfg;
  std::string text;
  try {
    text = relop::read_file(path);
  } catch (const relop::DataError&) {
    throw relop::UsageError("cannot read config file: " + path);
  }
  if (cfg.load(text, path) == 0) throw relop::UsageError("config file sets no keys: " + path);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw relop::UsageError("unexpected argument: " + a);
    std::string key = a.substr(2), value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw relop::UsageError("override " + a + " needs a value");
      value = extras[++i];
    }
    cfg.set(key, value);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relative opinion pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<CLI::App*> stage_cmds;
  for (const auto& name : relop::cli::stage_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " stage");
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->allow_extras();
    stage_cmds.push_back(sub);
  }
  auto* config_cmd = app.add_subcommand("config", "configuration utilities");
  auto* print_cmd = config_cmd->add_subcommand("print", "print the canonical configuration");
  print_cmd->add_option("--config", config_path, "config file (key = value lines)");
  print_cmd->allow_extras();
  config_cmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (print_cmd->parsed()) {
      const auto cfg = load_config(config_path, print_cmd->remaining());
      std::cout << cfg.dump();
      return 0;
    }
    for (auto* sub : stage_cmds) {
      if (!sub->parsed()) continue;
      const auto cfg = load_config(config_path, sub->remaining());
      relop::cli::run_stage(sub->get_name(), cfg, std::cerr);
      return 0;
    }
    return 1;
  } catch (const relop::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const relop::cli::VerificationFailure& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const relop::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
