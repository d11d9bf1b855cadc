#include "qrf/scenario.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace sc = qrf::scenario;

int main(int argc, char** argv) {
  CLI::App app{"qrf-lab: relational subsystem scenarios in two frame perspectives"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list built-in scenarios");

  auto* run = app.add_subcommand("run", "run a built-in scenario or a JSON config file");
  std::string target;
  std::vector<std::string> sets;
  std::string format = "csv";
  std::string out_path;
  int jobs = 1;
  run->add_option("scenario", target, "built-in name or path to a JSON config")->required();
  run->add_option("--set", sets, "override a parameter or dotted config path, key=value");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--out", out_path, "output file (default stdout)");
  run->add_option("--jobs", jobs, "worker threads over time points")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& b : sc::catalog()) std::cout << b.name << "\t" << b.reproduces << "\n";
    return 0;
  }

  try {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw sc::ConfigError("--set", "expected key=value, got \"" + s + "\"");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    const auto outcome = sc::run_named(target, kv, jobs);

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) throw qrf::Error("cannot open " + out_path + " for writing");
    }
    std::ostream& os = out_path.empty() ? std::cout : file;
    if (format == "json") {
      os << sc::to_json(outcome.config, outcome.result).dump(2) << "\n";
    } else {
      sc::write_csv(outcome.result, os);
      os.flush();
      sc::write_summary_lines(outcome.result.summary, std::cerr);
    }
    return 0;
  } catch (const std::exception& e) {
    sc::json err{{"error", e.what()}, {"scenario", target}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
}
