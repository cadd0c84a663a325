// Experiment driver: `qcadapt run` and `qcadapt oracle`.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "qcadapt/config.hpp"
#include "qcadapt/experiment.hpp"
#include "qcadapt/oracles.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("not an integer: " + item);
    out.push_back(v);
  }
  return out;
}

std::vector<qcadapt::Strategy> strategies_for(const std::string& name, const qcadapt::ExperimentConfig& cfg) {
  using qcadapt::IndicatorKind;
  using qcadapt::Strategy;
  if (name != "all") return {qcadapt::strategy_from_string(name)};
  std::vector<Strategy> out{Strategy::apriori};
  if (cfg.indicator != IndicatorKind::energy) out.push_back(Strategy::adaptive_gradient);
  if (cfg.indicator != IndicatorKind::gradient) out.push_back(Strategy::adaptive_energy);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive atomistic-to-continuum coupling experiments"};
  app.set_version_flag("--version", qcadapt::version_string());
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the refinement strategies against the exact atomistic solution");
  std::string config_path;
  std::string out_dir;
  std::string strategy = "all";
  int n_half = 0;
  std::size_t max_dof = 0;
  std::string radii;
  run->add_option("--config", config_path, "TOML config file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides [output].dir)");
  run->add_option("--strategy", strategy, "all, apriori, grad or energy; all honours [adapt].indicator")
      ->check(CLI::IsMember({"all", "apriori", "grad", "energy"}));
  run->add_option("--n-half", n_half, "Half the number of atoms per period")->check(CLI::PositiveNumber);
  run->add_option("--max-dof", max_dof, "Degree-of-freedom budget")->check(CLI::PositiveNumber);
  run->add_option("--apriori-radii", radii, "Comma-separated atomistic radii for the a priori sequence");

  auto* oracle = app.add_subcommand("oracle", "Randomized brute-force checks on small instances");
  std::uint64_t seed = 20240607;
  std::string sizes = "8,12,16";
  oracle->add_option("--seed", seed, "RNG seed");
  oracle->add_option("--sizes", sizes, "Comma-separated values of N");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      qcadapt::ExperimentConfig cfg;
      if (!config_path.empty()) cfg = qcadapt::load_config(config_path);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (n_half > 0) cfg.n_half = n_half;
      if (max_dof > 0) cfg.adapt.max_dof = max_dof;
      if (!radii.empty()) cfg.apriori_radii = parse_int_list(radii);
      const auto result = qcadapt::run_experiment(cfg, strategies_for(strategy, cfg));
      std::cout << result.summary.dump(2) << '\n';
      for (const auto& s : result.strategies)
        if (!s.error.empty()) return 2;
      return 0;
    }
    const auto report = qcadapt::oracle_suite(seed, parse_int_list(sizes));
    std::cout << report.to_json().dump(2) << '\n';
    return report.passed() ? 0 : 1;
  } catch (const qcadapt::ConfigError& e) {
    std::cerr << "qcadapt: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "qcadapt: " << e.what() << '\n';
    return 1;
  }
}
