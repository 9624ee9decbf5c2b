// Copyright 2026 The zodiac-pb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line runner. Settings are resolved in this order, later wins:
// preset, config file, ZODIAC_SEED_SALT, explicit flags.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zodiac/zodiac.hpp"

namespace {

namespace harness = zodiac::harness;

struct Flag {
  const char* key;
  const char* help;
  std::string value;
  CLI::Option* option = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed zeroth-order primal-dual optimization with powerball acceleration"};
  app.option_defaults()->always_capture_default(false);

  std::vector<Flag> flags{
      {"preset", "paper-sigmoid | desk-sigmoid | rate-sweep | attack-desk", {}},
      {"problem", "sigmoid_ls | synthetic_nonconvex | attack_surrogate", {}},
      {"n-agents", "number of agents", {}},
      {"dim", "problem dimension p", {}},
      {"topology", "er | path | complete | cycle | star", {}},
      {"er-prob", "Erdos-Renyi edge probability", {}},
      {"topology-seed", "seed of the random graph", {}},
      {"gamma", "powerball exponent in [0.5, 1]", {}},
      {"nc", "coordinates sampled per estimate", {}},
      {"mode", "forward | central", {}},
      {"t", "horizon T", {}},
      {"sweep-t", "horizons for rate-sweep, e.g. 2000,8000,32000", {}},
      {"seeds", "seed list: 3 | 1,2,7 | 1..5", {}},
      {"record-every", "metrics interval in rounds", {}},
      {"out", "output directory", {}},
      {"heterogeneity", "synthetic center offset h", {}},
      {"kappa-nc", "synthetic sine amplitude", {}},
      {"zeta", "synthetic noise half-width", {}},
      {"samples-per-agent", "sigmoid training samples per agent", {}},
      {"test-size", "sigmoid held-out samples", {}},
      {"dataset", "sigmoid dataset CSV to import", {}},
      {"n-classes", "attack classifier classes", {}},
      {"c-penalty", "attack hinge weight", {}},
      {"images-per-agent", "attack images per agent", {}},
      {"kappa1-margin", "kappa1 multiplier (> 1)", {}},
      {"kappa2-frac", "kappa2 fraction of its window, in (0,1)", {}},
      {"kappa-delta", "smoothing schedule scale", {}},
      {"init", "normal | zeros", {}},
      {"threads", "worker threads per round", {}},
  };
  for (auto& f : flags) f.option = app.add_option(std::string("--") + f.key, f.value, f.help);

  bool paper_delta = false, wall_clock = false, allow_short = false;
  auto* paper_delta_opt = app.add_flag("--paper-delta", paper_delta, "constant smoothing 10/sqrt(T d)");
  auto* wall_clock_opt = app.add_flag("--wall-clock", wall_clock, "fill wall_ms (output no longer reproducible)");
  auto* allow_short_opt = app.add_flag("--allow-short-horizon", allow_short, "accept T <= n^3/p");
  std::string config_path, export_path;
  app.add_option("--config", config_path, "flat key=value config file")->check(CLI::ExistingFile);
  app.add_option("--export-dataset", export_path, "write the dataset of the first seed to this CSV and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    harness::Settings settings;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot read config " + config_path);
      settings = harness::parse_settings(in);
    }
    if (const char* salt = std::getenv("ZODIAC_SEED_SALT")) settings.emplace_back("salt", salt);
    for (const auto& f : flags) {
      if (f.option->count() > 0) settings.emplace_back(f.key, f.value);
    }
    if (paper_delta_opt->count() > 0) settings.emplace_back("paper-delta", paper_delta ? "true" : "false");
    if (wall_clock_opt->count() > 0) settings.emplace_back("wall-clock", wall_clock ? "true" : "false");
    if (allow_short_opt->count() > 0) settings.emplace_back("enforce-horizon", allow_short ? "false" : "true");

    const harness::ExperimentConfig config = harness::resolve_config(settings);
    if (!export_path.empty()) {
      config.validate();
      const auto problem = harness::build_problem(config.problem, config.seeds.front());
      std::ostringstream csv;
      zodiac::write_dataset_csv(*problem, csv);
      harness::write_file(export_path, csv.str());
      std::cout << "wrote " << export_path << '\n';
      return 0;
    }
    std::cout << harness::execute(config) << '\n' << "output in " << config.out_dir << '\n';
  } catch (const zodiac::HorizonTooShortError& e) {
    std::cerr << "zodiac: error: " << e.what() << " (use --t " << e.min_horizon()
              << " or --allow-short-horizon)\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "zodiac: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
