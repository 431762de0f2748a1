#pragma once

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latentbridge/cli/commands.hpp"

#ifndef LATENTBRIDGE_VERSION
#define LATENTBRIDGE_VERSION "0.1.0"
#endif

namespace latentbridge::cli {

inline std::string version_text() {
  std::ostringstream s;
  s << "latentbridge " << LATENTBRIDGE_VERSION << "\n"
    << "config format " << kConfigFormatVersion << "\n"
    << "bank format " << EmbeddingBank::kVersion << "\n"
    << "checkpoint format " << kCheckpointVersion << "\n";
  return s.str();
}

/// Config file (if any) with `key=value` overrides applied on top.
inline Config layered_config(const std::string& path, const std::vector<std::string>& sets) {
  Config c = path.empty() ? Config{} : Config::load(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("cli", "--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

inline std::vector<GenerationMode> parse_modes(const std::string& list) {
  std::vector<GenerationMode> modes;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) modes.push_back(parse_generation_mode(item));
  if (modes.empty()) throw InputError("cli", "no modes given");
  return modes;
}

/// Runs one subcommand. Returns 0 on success, 2 on usage errors and 1 on
/// runtime errors (one diagnostic line on `err`).
inline int dispatch(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Text-free trained CVAE adapter for frozen generators", "latentbridge"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print toolkit and file format versions");

  std::string config_path;
  std::vector<std::string> sets;
  auto config_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "Override a config key (key=value), repeatable");
  };

  commands::MakeToyDataArgs toy;
  auto* toy_cmd = app.add_subcommand("make-toy-data", "Sample toy-world training images");
  config_opts(toy_cmd);
  toy_cmd->add_option("--out", toy.out, "Output directory")->required();
  toy_cmd->add_option("-n,--count", toy.count, "Number of images");
  toy_cmd->add_option("--seed", toy.seed, "Sampling seed");

  commands::BuildBankArgs bank;
  std::uint64_t bank_seed = 0;
  auto* bank_cmd = app.add_subcommand("build-bank", "Embed a directory of images into a bank file");
  config_opts(bank_cmd);
  bank_cmd->add_option("--backend", bank.backend, "Embedding backend")->check(CLI::IsMember({"toy", "real"}));
  bank_cmd->add_option("--input", bank.input, "Directory of PNG images")->required();
  bank_cmd->add_option("--out", bank.out, "Bank file to write")->required();
  auto* bank_seed_opt = bank_cmd->add_option("--seed", bank_seed, "Embedder seed");

  commands::TrainArgs tr;
  std::optional<int> iterations;
  std::optional<std::uint64_t> train_seed;
  auto* train_cmd = app.add_subcommand("train", "Train the adapter on a directory of images");
  config_opts(train_cmd);
  train_cmd->get_option("--config")->required();
  train_cmd->add_option("--data", tr.data, "Directory of PNG images")->required();
  train_cmd->add_option("--out", tr.out, "Output directory for checkpoints and logs")->required();
  train_cmd->add_option("--iterations", iterations, "Override train.iterations");
  train_cmd->add_option("--seed", train_seed, "Override train.seed");
  train_cmd->add_flag("-v,--verbose", tr.verbose, "Print losses every 100 iterations");

  commands::GenerateArgs gen;
  std::string mode = "full";
  std::optional<int> prior_k, prior_m;
  std::optional<double> prior_alpha;
  std::optional<std::uint64_t> prior_seed;
  auto* gen_cmd = app.add_subcommand("generate", "Generate images for a text prompt");
  gen_cmd->add_option("--set", sets, "Override a config key (key=value), repeatable");
  gen_cmd->add_option("--mode", mode, "full, pt or img")->check(CLI::IsMember({"full", "pt", "img"}));
  gen_cmd->add_option("--prompt", gen.prompt, "Text prompt")->required();
  gen_cmd->add_option("--guidance", gen.guidance, "Guidance image (img mode)")->check(CLI::ExistingFile);
  gen_cmd->add_option("-n", gen.n, "Number of images")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generation seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--checkpoint", gen.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--bank", gen.bank, "Embedding bank (full and img modes)")->check(CLI::ExistingFile);
  gen_cmd->add_flag("--grid", gen.grid, "Also write a contact sheet");
  gen_cmd->add_option("--prior-k", prior_k, "Nearest neighbors retrieved");
  gen_cmd->add_option("--prior-m", prior_m, "Neighbors combined per sample");
  gen_cmd->add_option("--prior-alpha", prior_alpha, "Dirichlet concentration");
  gen_cmd->add_option("--prior-seed", prior_seed, "Prior sampling seed");

  commands::EvaluateArgs ev;
  std::string modes = "full,pt,img";
  auto* eval_cmd = app.add_subcommand("evaluate", "Retrieval accuracy, identity diversity and timing");
  eval_cmd->add_option("--set", sets, "Override a config key (key=value), repeatable");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--bank", ev.bank, "Embedding bank")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--captions", ev.captions, "Caption file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.out, "Report directory")->required();
  eval_cmd->add_option("--modes", modes, "Comma-separated modes");
  eval_cmd->add_option("--images-per-caption", ev.images_per_caption, "Images per caption");
  eval_cmd->add_option("--negatives", ev.negatives_per_query, "Negatives per query");
  eval_cmd->add_option("--negatives-dir", ev.negatives_dir, "Negative image directory")->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--seed", ev.seed, "Protocol seed");

  commands::NnReportArgs nn;
  auto* nn_cmd = app.add_subcommand("nn-report", "Nearest bank entries of generated images");
  config_opts(nn_cmd);
  nn_cmd->add_option("--bank", nn.bank, "Embedding bank")->required()->check(CLI::ExistingFile);
  nn_cmd->add_option("--images", nn.images, "Directory of generated PNGs")->required();
  nn_cmd->add_option("--out", nn.out, "Report directory")->required();
  nn_cmd->add_option("--top", nn.top, "Neighbors per image");
  nn_cmd->add_flag("--grid", nn.grid, "Also write a neighbor contact sheet");
  nn_cmd->add_option("--bank-images", nn.bank_images, "Bank image directory (for --grid)");

  commands::AblateArgs ab;
  auto* ab_cmd = app.add_subcommand("ablate", "Train and compare the four architecture variants");
  config_opts(ab_cmd);
  ab_cmd->add_option("--data", ab.data, "Directory of PNG images")->required();
  ab_cmd->add_option("--captions", ab.captions, "Caption file")->required()->check(CLI::ExistingFile);
  ab_cmd->add_option("--out", ab.out, "Report directory")->required();
  ab_cmd->add_option("--images-per-caption", ab.images_per_caption, "Images per caption");
  ab_cmd->add_option("--seed", ab.seed, "Protocol seed");

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }
  if (show_version) {
    out << version_text();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    err << "error: a subcommand is required\n" << app.help();
    return 2;
  }

  try {
    if (toy_cmd->parsed()) {
      toy.config = layered_config(config_path, sets);
      const auto d = commands::make_toy_data(toy);
      out << "wrote " << d.ids.size() << " images to " << toy.out << "\n";
    } else if (bank_cmd->parsed()) {
      bank.config = layered_config(config_path, sets);
      if (bank_seed_opt->count() > 0) bank.seed = bank_seed;
      const auto b = commands::build_bank_command(bank);
      out << "wrote bank with " << b.size() << " entries of dim " << b.dim() << " to " << bank.out << "\n";
    } else if (train_cmd->parsed()) {
      tr.config = layered_config(config_path, sets);
      if (iterations) tr.config.set("train.iterations", std::to_string(*iterations));
      if (train_seed) tr.config.set("train.seed", std::to_string(*train_seed));
      const auto report = commands::train_command(tr);
      out << "trained " << report.history.size() << " iterations in " << report.wall_seconds << " s; checkpoint "
          << report.final_checkpoint << "\n";
    } else if (gen_cmd->parsed()) {
      gen.mode = parse_generation_mode(mode);
      gen.overrides = layered_config("", sets);
      if (prior_k) gen.overrides.set("prior.k", std::to_string(*prior_k));
      if (prior_m) gen.overrides.set("prior.m", std::to_string(*prior_m));
      if (prior_alpha) {
        std::ostringstream a;
        a << std::setprecision(17) << *prior_alpha;
        gen.overrides.set("prior.alpha", a.str());
      }
      if (prior_seed) gen.overrides.set("prior.seed", std::to_string(*prior_seed));
      const auto batch = commands::generate_command(gen);
      out << "wrote " << batch.images.size() << " images to " << gen.out << "\n";
    } else if (eval_cmd->parsed()) {
      ev.modes = parse_modes(modes);
      ev.overrides = layered_config("", sets);
      out << format_table(commands::evaluate_command(ev));
    } else if (nn_cmd->parsed()) {
      nn.config = layered_config(config_path, sets);
      commands::nn_report_command(nn);
      out << "wrote " << (std::filesystem::path(nn.out) / "nn_report.csv").string() << "\n";
    } else if (ab_cmd->parsed()) {
      ab.config = layered_config(config_path, sets);
      out << format_table(commands::ablate_command(ab));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: [cli] " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int dispatch(int argc, char** argv) { return dispatch(std::vector<std::string>(argv, argv + argc)); }

}  // namespace latentbridge::cli
