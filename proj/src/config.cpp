#include "qcadapt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace qcadapt {

namespace {

void reject_unknown(const toml::table& t, std::string_view section, const std::set<std::string_view>& known) {
  for (const auto& [key, value] : t) {
    if (!known.count(key.str()))
      throw ConfigError("unknown key '" + std::string(key.str()) + "' in [" + std::string(section) + "]");
  }
}

template <class T>
T require(const toml::node_view<const toml::node>& node, std::string_view name) {
  auto v = node.value<T>();
  if (!v) throw ConfigError("key '" + std::string(name) + "' has the wrong type");
  return *v;
}

template <class T>
void read(const toml::table& t, std::string_view key, T& out) {
  const auto node = toml::node_view<const toml::node>(t.get(key));
  if (node) out = require<T>(node, key);
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " at " << e.source().begin;
    throw ConfigError(os.str());
  }
  reject_unknown(root, "", {"model", "adapt", "apriori", "output"});
  ExperimentConfig cfg;

  if (const auto* model = root["model"].as_table()) {
    reject_unknown(*model, "model", {"n_half", "stretch", "alpha", "force_amplitude"});
    std::int64_t n = cfg.n_half;
    read(*model, "n_half", n);
    cfg.n_half = static_cast<int>(n);
    read(*model, "stretch", cfg.stretch);
    read(*model, "alpha", cfg.alpha);
    read(*model, "force_amplitude", cfg.force_amplitude);
  }
  if (const auto* adapt = root["adapt"].as_table()) {
    reject_unknown(*adapt, "adapt",
                   {"indicator", "dorfler_fraction", "max_dof", "initial_continuum_nodes_per_half",
                    "initial_atom_radius", "initial_spacing", "warm_start", "singular_force_mode"});
    std::string indicator = "both";
    read(*adapt, "indicator", indicator);
    if (indicator != "both") {
      try {
        cfg.indicator = indicator_from_string(indicator);
      } catch (const std::invalid_argument&) {
        throw ConfigError("adapt.indicator must be 'gradient', 'energy' or 'both'");
      }
    }
    read(*adapt, "dorfler_fraction", cfg.adapt.dorfler_fraction);
    std::int64_t max_dof = static_cast<std::int64_t>(cfg.adapt.max_dof);
    read(*adapt, "max_dof", max_dof);
    if (max_dof <= 0) throw ConfigError("max_dof must be positive");
    cfg.adapt.max_dof = static_cast<std::size_t>(max_dof);
    std::int64_t extra = cfg.adapt.initial_continuum_nodes_per_half;
    read(*adapt, "initial_continuum_nodes_per_half", extra);
    cfg.adapt.initial_continuum_nodes_per_half = static_cast<int>(extra);
    std::int64_t radius = cfg.adapt.initial_atom_radius;
    read(*adapt, "initial_atom_radius", radius);
    cfg.adapt.initial_atom_radius = static_cast<int>(radius);
    std::string spacing = "graded";
    read(*adapt, "initial_spacing", spacing);
    if (spacing == "graded") cfg.adapt.initial_spacing = InitialSpacing::graded;
    else if (spacing == "uniform") cfg.adapt.initial_spacing = InitialSpacing::uniform;
    else throw ConfigError("initial_spacing must be 'graded' or 'uniform'");
    read(*adapt, "warm_start", cfg.adapt.warm_start);
    read(*adapt, "singular_force_mode", cfg.adapt.estimator.singular_force_mode);
  }
  if (const auto* apriori = root["apriori"].as_table()) {
    reject_unknown(*apriori, "apriori", {"radii"});
    if (const auto* radii = apriori->get_as<toml::array>("radii")) {
      cfg.apriori_radii.clear();
      for (const auto& r : *radii) {
        auto v = r.value<std::int64_t>();
        if (!v) throw ConfigError("apriori.radii must be integers");
        cfg.apriori_radii.push_back(static_cast<int>(*v));
      }
    }
  }
  if (const auto* output = root["output"].as_table()) {
    reject_unknown(*output, "output", {"dir", "formats"});
    std::string dir = cfg.out_dir.string();
    read(*output, "dir", dir);
    cfg.out_dir = dir;
    if (const auto* formats = output->get_as<toml::array>("formats")) {
      cfg.formats.clear();
      for (const auto& f : *formats) {
        auto v = f.value<std::string>();
        if (!v || (*v != "csv" && *v != "json")) throw ConfigError("output.formats entries must be 'csv' or 'json'");
        cfg.formats.push_back(*v);
      }
    }
  }
  if (cfg.n_half < 8) throw ConfigError("model.n_half must be at least 8");
  if (!(cfg.stretch > 0.0)) throw ConfigError("model.stretch must be positive");
  if (!(cfg.alpha > 0.0)) throw ConfigError("model.alpha must be positive");
  try {
    cfg.adapt.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("adapt: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace qcadapt
