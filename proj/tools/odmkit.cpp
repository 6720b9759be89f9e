#include <iostream>

#include "CLI11.hpp"
#include "odm/cli/commands.hpp"
#include "odm/errors.hpp"
#include "odm/util/io.hpp"

// Pipeline driver: one command per invocation, everything else declared in
// the JSON experiment config. Exit codes: 0 success, 1 configuration
// failure, 2 runtime failure.

int main(int argc, char** argv) {
  CLI::App app{"on-device model backdoor research kit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  long long seed_override = -1;
  bool verbose = false;

  const std::vector<std::string> commands = {"scan",   "analyze",  "convert", "train-gen",
                                             "attack", "evaluate", "report"};
  const std::vector<std::string> help = {
      "scan app packages into an inventory",
      "recover model structure, I/O signatures, labels and task",
      "reconstruct a trainable model and verify equivalence",
      "train the steganographic trigger generator",
      "poison the dataset and retrain the victim",
      "measure BA/ASR/BAC and stealth metrics",
      "assemble report tables and plots",
  };
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto* sub = app.add_subcommand(commands[i], help[i]);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--output", output_override, "override output directory");
    sub->add_option("--seed", seed_override, "override config seed");
    sub->add_flag("--verbose", verbose, "chatty progress logging");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string sub_name = app.get_subcommands().front()->get_name();

  try {
    auto cfg = odm::cli::load_config_file(config_path);
    bool reresolve = false;
    if (seed_override >= 0) {
      // Seed participates in the digest; rebuild the resolved config.
      auto doc = nlohmann::json::parse(odm::util::read_text_file(config_path));
      doc["seed"] = static_cast<std::uint64_t>(seed_override);
      cfg = odm::cli::validate_config(doc.dump());
      reresolve = true;
    }
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (verbose) cfg.verbose = true;
    (void)reresolve;

    const auto cmd = odm::cli::command_from_string(sub_name);
    if (!cmd) throw odm::ConfigInvalid("unknown command: " + sub_name);
    if (cfg.verbose) {
      std::cerr << "config digest: " << cfg.digest << "\nseed: " << cfg.seed << "\n";
    }
    return odm::cli::execute_command(*cmd, cfg, std::cout);
  } catch (const odm::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const odm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
