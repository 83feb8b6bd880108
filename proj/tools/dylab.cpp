#include <CLI11.hpp>
#include <iostream>

#include "dylab/runner.hpp"

using namespace dylab;

namespace {

std::string flag_name(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

struct Subcommand {
  CLI::App* app = nullptr;
  std::map<std::string, std::pair<CLI::Option*, std::string>> fields;
  std::vector<std::string> positional;
  std::string config, out;
  std::uint64_t seed = 1;
  int digits = 10;
  CLI::Option *seed_opt = nullptr, *digits_opt = nullptr;
};

const std::map<std::string, std::string> descriptions = {
    {"cf", "continued fraction, convergents and Brjuno sum"},
    {"circle", "renormalization estimates for a circle lift"},
    {"dy-verify", "band estimate along orbits, Euclidean and hyperbolic"},
    {"qicurve", "quasi-invariant curve: invariance, return, cover"},
    {"hedgehog", "grid approximation of the hedgehog of a germ"},
    {"recur", "recurrence profile along convergent denominators"},
    {"probe", "orbits that enter a small disk and do not come back"},
    {"holonomy", "holonomy of a foliation germ and its germ fit"},
    {"suite", "run several config files and aggregate"}};

json raw_config(const std::string& kind, Subcommand& s) {
  json raw = {{"kind", kind}, {"params", json::object()}};
  for (auto& [name, entry] : s.fields)
    if (entry.first->count() > 0) raw["params"][name] = entry.second;
  if (kind == "suite" && !s.positional.empty()) raw["params"]["configs"] = s.positional;
  if (s.seed_opt->count() > 0) raw["seed"] = s.seed;
  if (s.digits_opt->count() > 0) raw["precision"] = {{"digits", s.digits}};
  if (s.config.empty()) return raw;
  // Values from the file win over flags.
  const json file = read_json_file(s.config);
  if (!file.is_object()) throw ValidationError(s.config, "config must be a JSON object");
  if (file.contains("kind") && file["kind"] != kind)
    throw ValidationError("kind", "config is for " + file["kind"].dump() + ", not \"" + kind + "\"");
  for (const auto& [k, v] : file.items()) {
    if (k == "params" && v.is_object()) {
      for (const auto& [pk, pv] : v.items()) raw["params"][pk] = pv;
    } else if (k != "kind") {
      raw[k] = v;
    }
  }
  return raw;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dylab: small-divisor and hedgehog experiments"};
  app.require_subcommand(1);
  std::map<std::string, Subcommand> subs;
  for (const std::string& kind : experiment_kinds()) {
    Subcommand& s = subs[kind];
    s.app = app.add_subcommand(kind, descriptions.at(kind));
    for (const auto& f : schema(kind)) {
      if (kind == "suite") continue;
      auto& slot = s.fields[f.name];
      slot.first = s.app->add_option(flag_name(f.name), slot.second, f.help);
    }
    if (kind == "suite") s.app->add_option("configs", s.positional, "config files to run");
    s.app->add_option("--config", s.config, "JSON config; its values override flags");
    s.app->add_option("--out", s.out, std::string("output root (default $") + output_root_env + " or ./runs)");
    s.seed_opt = s.app->add_option("--seed", s.seed, "random seed");
    s.digits_opt = s.app->add_option("--digits", s.digits, "certified digits for decimal rotation numbers");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& [kind, s] : subs) {
    if (!s.app->parsed()) continue;
    try {
      const ExperimentConfig cfg = validate_config(raw_config(kind, s));
      const RunOutcome o = run(cfg, output_root(s.out));
      for (const auto& c : o.checks)
        std::cout << c.name << ": " << to_string(c.status) << (c.note.empty() ? "" : "  (" + c.note + ")") << "\n";
      std::cout << "status: " << to_string(o.status) << "\nrun: " << o.dir.string() << "\n";
      return exit_code(o.status);
    } catch (const ValidationError& e) {
      std::cerr << "validation error: " << e.what() << "\n";
      return 2;
    } catch (const PartialRunError& e) {
      std::cerr << "run failed: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}
