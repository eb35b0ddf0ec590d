#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "gsaug/error.hpp"
#include "run.hpp"

namespace {

namespace fs = std::filesystem;
using gsaug::cli::ExperimentConfig;

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Invocation {
  std::string command;
  fs::path config;
  std::vector<std::string> overrides;
};

int run(const Invocation& inv) {
  ExperimentConfig cfg = ExperimentConfig::from_file(inv.config);
  for (const auto& o : inv.overrides) cfg.set(o, fs::current_path());
  cfg.validate();
  const fs::path dir = cfg.run_dir();
  gsaug::cli::RunLock lock(dir);
  gsaug::cli::echo_config(cfg, dir);

  const auto start = std::chrono::steady_clock::now();
  std::ostream& log = std::cout;
  log << inv.command << " in " << dir.string() << '\n';
  const std::vector<std::string> steps =
      inv.command == "all" ? std::vector<std::string>{"collect", "pretrain", "guide-train", "augment", "eval"}
                           : std::vector<std::string>{inv.command};
  for (const auto& step : steps) {
    if (step == "collect") {
      gsaug::cli::cmd_collect(cfg, log);
    } else if (step == "pretrain") {
      gsaug::cli::cmd_pretrain(cfg, log);
    } else if (step == "guide-train") {
      gsaug::cli::cmd_guide_train(cfg, log);
    } else if (step == "augment") {
      gsaug::cli::cmd_augment(cfg, log);
    } else {
      gsaug::cli::cmd_eval(cfg, log);
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::fprintf(stdout, "%s done in %.1f s\n", inv.command.c_str(), secs);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph structure augmentation with a pre-trained discrete diffusion model"};
  app.require_subcommand(1);
  Invocation inv;

  auto add_command = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", inv.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("-s,--set", inv.overrides, "override a key, as section.key=value (repeatable)");
    sub->callback([&inv, name] { inv.command = name; });
    return sub;
  };
  std::vector<CLI::App*> subs = {
      add_command("collect", "filter, sample and cluster the pre-training corpus"),
      add_command("pretrain", "train the denoiser on the collected corpus"),
      add_command("guide-train", "train guidance heads on the downstream training split"),
      add_command("augment", "generate and export augmented training data"),
      add_command("eval", "train and score the downstream model"),
      add_command("all", "collect, pretrain, guide-train, augment and eval in order"),
  };
  // Every config key is also a flag: --denoiser.epochs 1 equals --set denoiser.epochs=1.
  std::vector<std::vector<std::string>> key_values(subs.size() * gsaug::cli::known_keys().size());
  std::size_t slot = 0;
  for (CLI::App* sub : subs) {
    for (const auto& spec : gsaug::cli::known_keys()) {
      const std::string key(spec.key);
      auto& values = key_values[slot++];
      sub->add_option("--" + key, values, std::string(spec.help))->group("Config keys")->each(
          [&inv, key](const std::string& v) { inv.overrides.push_back(key + "=" + v); });
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    return run(inv);
  } catch (const gsaug::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const gsaug::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const gsaug::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
