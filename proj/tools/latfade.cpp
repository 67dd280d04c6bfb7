#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "latfade/experiments.hpp"

namespace {

struct Options {
  std::string model = "rayleigh";
  std::size_t nt = 1;
  std::string nr = "1";
  std::size_t users = 0;
  std::optional<std::string> snr_db;
  std::uint64_t samples = 0;
  std::optional<std::uint64_t> seed;
  double epsilon = latfade::kDefaultEpsilon;
  std::string out = ".";
  std::size_t block_len = 4;
  std::int64_t p = 5;
  std::size_t k = 1;
  bool all = false;
};

std::string default_snr(const std::string& command) {
  if (command == "mac-region") return "-6";
  if (command == "siso-curves" || command == "mac-gap") return "-10..30:2";
  if (command == "simulate-ptp" || command == "simulate-mac") return "0..6:6";
  return "0..40:5";
}

std::size_t default_users(const std::string& command) {
  return command.rfind("mac", 0) == 0 || command == "simulate-mac" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice coding over ergodic fading channels: rates, gaps and coded simulations"};
  app.require_subcommand(1);
  Options o;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"rate-mimo", "Rate, ergodic capacity and gap of the N_t x N_r link against SNR"},
      {"gap-bounds", "Closed-form gap bounds against N_r (single user or K-user MAC)"},
      {"siso-curves", "Single-antenna rate, capacity, gap, SNR penalty and bounds against SNR"},
      {"mac-region", "Corner points of every decoding order and the sum capacity"},
      {"mac-gap", "Sum-rate gap of the MAC against SNR and N_r with bounds"},
      {"simulate-ptp", "Coded point-to-point trials with sphere and Euclidean decoders"},
      {"simulate-mac", "Coded successive-cancellation trials for the MAC"},
      {"verify-lemmas", "Empirical checks of the lattice and random-matrix lemmas"}};

  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--model", o.model, "rayleigh | nakagami:m=<val> | fixed:<matrix file>");
    sub->add_option("--nt", o.nt, "Transmit antennas (per user)")->check(CLI::PositiveNumber);
    sub->add_option("--nr", o.nr, "Receive antennas, a value or a range a..b");
    sub->add_option("--users", o.users, "Number of users")->check(CLI::PositiveNumber);
    sub->add_option("--snr-db", o.snr_db, "SNR grid in dB: start..end:step or a single value");
    sub->add_option("--samples", o.samples, "Monte Carlo samples or coded trials (0 = command default)");
    auto* seed = sub->add_option("--seed", o.seed, "Seed for every random stream");
    if (name != "gap-bounds") seed->required();
    sub->add_option("--epsilon", o.epsilon, "Decision sphere slack")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", o.out, "Output directory for the CSV file");
    sub->add_option("--block-len", o.block_len, "Channel uses per coded block")->check(CLI::PositiveNumber);
    sub->add_option("--p", o.p, "Construction-A prime");
    sub->add_option("--k", o.k, "Construction-A message length")->check(CLI::PositiveNumber);
    sub->add_flag("--all", o.all, "Run every check, including the coded-trial ones");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    latfade::ExperimentSpec spec;
    spec.command = command;
    spec.model_key = o.model;
    spec.n_t = o.nt;
    spec.n_r = latfade::parse_count_range(o.nr);
    spec.users = o.users ? o.users : default_users(command);
    spec.snr_db = latfade::parse_snr_grid(o.snr_db.value_or(default_snr(command)));
    spec.samples = o.samples;
    spec.seed = o.seed;
    spec.epsilon = o.epsilon;
    spec.block_len = o.block_len;
    spec.p = o.p;
    spec.k = o.k;
    spec.all = o.all;

    const latfade::ExperimentResult res = latfade::run_experiment(spec);
    std::filesystem::create_directories(o.out);
    const std::string path = (std::filesystem::path(o.out) / (command + ".csv")).string();
    res.table.write_file(path);
    for (const auto& line : res.summary) std::cout << line << '\n';
    std::cout << "wrote " << path << '\n';
    if (!res.failures.empty()) {
      for (const auto& f : res.failures) std::cerr << "FAILED: " << f << '\n';
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
