#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/simulator.hpp"
#include "fedsim/state.hpp"
#include "fedsim/variance.hpp"

namespace fs = std::filesystem;
using namespace fedsim;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kInfeasible = 4 };

void report(const ExperimentConfig& cfg, const ExperimentResult& res) {
  if (res.records.empty()) {
    std::cout << cfg.name << ": no rounds run\n";
    return;
  }
  const auto s = summarize(res.records, cfg.params.target_accuracy, cfg.run.patience);
  std::cout << cfg.name << " [" << to_string(cfg.policy) << "] rounds=" << s.rounds
            << " final_acc=" << s.final_accuracy << "% energy=" << s.total_energy_j << "J";
  if (s.convergence_round)
    std::cout << " converged@" << *s.convergence_round << " ppw=" << *s.ppw;
  else
    std::cout << " not converged";
  std::cout << '\n';
}

int run_one(const fs::path& path) {
  const auto cfg = load_config(path);
  const auto res = run_experiment(cfg);
  write_outputs(cfg, res);
  report(cfg, res);
  return kOk;
}

int oracle_one(const fs::path& path) {
  const auto cfg = load_config(path);
  const auto world = build_world(cfg);
  if (!oracle_combinations(world.fleet, cfg.params.participants, world.actions))
    throw InfeasibleInstance("instance too large for exhaustive search (N=" +
                             std::to_string(world.fleet.size()) +
                             ", K=" + std::to_string(cfg.params.participants) + ")");
  RoundSettings rs;
  rs.alpha = cfg.controller.alpha;
  rs.beta = cfg.controller.beta;
  rs.energy_scale = cfg.controller.energy_scale;
  rs.train_seed = cfg.seeds.train;
  rs.exec = cfg.training.exec;
  const auto model = init_model(world.nn.trainable, cfg.seeds.train);
  const double acc = evaluate(world.nn.trainable, model, world.test);
  RoundEngine engine(world, rs, model, acc,
                     sample_round_conditions(cfg.variance, world.fleet.size(), 0, cfg.seeds.variance),
                     0);
  const auto best = oracle_search(world.fleet, cfg.params.participants, world.actions,
                                  [&](auto p, auto a) { return engine.score(p, a); });
  std::cout << "evaluations=" << best.evaluations << " reward=" << best.reward << '\n';
  for (std::size_t i = 0; i < best.participants.size(); ++i)
    std::cout << "device " << best.participants[i] << " ("
              << to_string(world.fleet[best.participants[i]].tier) << ") "
              << world.actions.name(best.actions[i]) << '\n';
  return kOk;
}

int guarded(const std::function<int()>& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const InfeasibleInstance& e) {
    std::cerr << "oracle: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning fleet simulator"};
  app.require_subcommand(1);

  fs::path config;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config, "Experiment config (YAML)")->required();

  fs::path dir;
  auto* sweep = app.add_subcommand("sweep", "Run every *.yaml config in a directory");
  sweep->add_option("--configs", dir, "Directory of configs")->required();

  fs::path records, baseline;
  double target = 90.0;
  std::size_t patience = 5;
  auto* summ = app.add_subcommand("summarize", "Summarize a records CSV, optionally against a baseline");
  summ->add_option("--records", records, "Records CSV")->required();
  summ->add_option("--baseline", baseline, "Baseline records CSV");
  summ->add_option("--target", target, "Target accuracy (percent)");
  summ->add_option("--patience", patience, "Rounds the target must hold");

  auto* oracle = app.add_subcommand("oracle", "Exhaustive best selection for one round");
  oracle->add_option("--config", config, "Experiment config (YAML)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  if (*run) return guarded([&] { return run_one(config); });
  if (*oracle) return guarded([&] { return oracle_one(config); });
  if (*sweep)
    return guarded([&] {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".yaml" || e.path().extension() == ".yml") files.push_back(e.path());
      if (files.empty()) throw ConfigError("no configs in " + dir.string());
      std::sort(files.begin(), files.end());
      int worst = kOk;
      for (const auto& f : files) {
        const int rc = guarded([&] { return run_one(f); });
        if (rc != kOk) std::cerr << f.string() << ": failed (exit " << rc << ")\n";
        worst = std::max(worst, rc);
      }
      return worst;
    });
  return guarded([&] {
    const auto recs = read_records_csv(records);
    if (recs.empty()) throw ConfigError(records.string() + " has no records");
    Summary s = baseline.empty() ? summarize(recs, target, patience)
                                 : summarize(recs, read_records_csv(baseline), target, patience);
    std::cout << summary_json(s) << '\n';
    return kOk;
  });
}
