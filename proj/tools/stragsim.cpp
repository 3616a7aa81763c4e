// stragsim: simulate jobs, fit the learners, and run the comparison
// experiments from the command line.

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "strag/bench.hpp"
#include "strag/cluster_sim.hpp"
#include "strag/estimators.hpp"
#include "strag/history.hpp"
#include "strag/strategies.hpp"
#include "strag/text.hpp"

namespace {

using namespace strag;

struct CommonOptions {
  std::string config;
  std::size_t nodes = 4;
  std::size_t containers = 1;
  std::string workload = "wordcount";
  std::string block_size = "128M";
  double noise = 0.1;
  double straggler_fraction = 0.0;
  double straggler_multiplier = 1.0;
  std::uint64_t straggler_seed = 0;
  std::size_t reduce_tasks = 0;
  double tick = 1.0;
  std::size_t epochs = 100;
  double lr = 0.05;
  StrategyParams params;
};

void add_cluster_options(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "key=value cluster file; flags given explicitly override it");
  app->add_option("--containers", o.containers, "containers per node")->check(CLI::PositiveNumber);
  app->add_option("--workload", o.workload, "wordcount | sort")->check(CLI::IsMember({"wordcount", "sort"}));
  app->add_option("--block-size", o.block_size, "block size, e.g. 128M");
  app->add_option("--noise", o.noise, "uniform duration noise amplitude");
  app->add_option("--straggler-fraction", o.straggler_fraction, "share of nodes slowed down");
  app->add_option("--straggler-multiplier", o.straggler_multiplier, "speed multiplier of slowed nodes");
  app->add_option("--straggler-seed", o.straggler_seed, "picks which nodes are slowed");
  app->add_option("--reduce-tasks", o.reduce_tasks, "reduce task count (0: one per node)");
  app->add_option("--tick", o.tick, "seconds between strategy evaluations");
}

void add_learner_options(CLI::App* app, CommonOptions& o) {
  app->add_option("--epochs", o.epochs, "training epochs")->capture_default_str();
  app->add_option("--lr", o.lr, "learning rate")->capture_default_str();
  app->add_option("--k", o.params.k, "k-means clusters")->capture_default_str();
}

void add_strategy_options(CLI::App* app, CommonOptions& o) {
  app->add_option("--speculative-cap", o.params.speculative_cap, "backup cap as a share of the job's tasks")
      ->capture_default_str();
  app->add_option("--stt", o.params.stt, "SAMR slow-task time threshold")->capture_default_str();
  app->add_option("--bp", o.params.bp, "SAMR backup bound")->capture_default_str();
  app->add_option("--stac", o.params.stac, "SAMR slow-task rate threshold")->capture_default_str();
  app->add_option("--min-elapsed", o.params.min_elapsed, "seconds before a task may be judged")
      ->capture_default_str();
}

/// Config file first, then every flag the user actually passed.
ClusterConfig build_cluster(const CLI::App* app, const CommonOptions& o, const char* nodes_flag) {
  ClusterConfig c;
  c.nodes = uniform_nodes(o.nodes, o.containers);
  if (!o.config.empty()) c = load_cluster_config(o.config, c);
  auto given = [&](const char* flag) { return app->count(flag) > 0; };
  if (given(nodes_flag)) c.nodes = uniform_nodes(o.nodes, o.containers);
  if (given("--containers")) {
    for (auto& node : c.nodes) node.containers = o.containers;
  }
  if (given("--workload") || o.config.empty()) c.workload = parse_workload(o.workload);
  if (given("--block-size") || o.config.empty()) c.block_size = text::parse_size(o.block_size);
  if (given("--noise") || o.config.empty()) c.noise = o.noise;
  if (given("--straggler-fraction")) c.straggler.fraction = o.straggler_fraction;
  if (given("--straggler-multiplier")) c.straggler.multiplier = o.straggler_multiplier;
  if (given("--straggler-seed")) c.straggler.seed = o.straggler_seed;
  if (given("--reduce-tasks")) c.reduce_tasks = o.reduce_tasks;
  if (given("--tick")) c.tick = o.tick;
  c.validate();
  return c;
}

LearnerConfig learner_config(const CommonOptions& o) {
  LearnerConfig l;
  l.train.epochs = o.epochs;
  l.train.learning_rate = o.lr;
  l.k = o.params.k;
  return l;
}

void write_kmeans(const std::filesystem::path& path, const KmeansModel& m) {
  std::ofstream out(path);
  if (!out) throw StorageError("cannot write " + path.string());
  save_kmeans(out, m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Straggler-detection simulator for MapReduce speculative execution"};
  app.require_subcommand(1);

  // simulate ----------------------------------------------------------------
  CommonOptions sim;
  std::string sim_strategy = "late";
  std::string sim_input = "1G";
  std::uint64_t sim_seed = 1;
  std::string sim_history;
  std::string sim_models;
  auto* simulate = app.add_subcommand("simulate", "run one job and print its makespan");
  simulate->add_option("--strategy", sim_strategy, "none | naive | late | samr | esamr | nn")->capture_default_str();
  simulate->add_option("--nodes", sim.nodes, "worker nodes")->capture_default_str();
  simulate->add_option("--input-size", sim_input, "job input, e.g. 1G")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "run seed")->capture_default_str();
  simulate->add_option("--history", sim_history, "history file; completed tasks are appended to it");
  simulate->add_option("--models", sim_models, "directory of trained NN models (else trained from history)");
  add_cluster_options(simulate, sim);
  add_learner_options(simulate, sim);
  add_strategy_options(simulate, sim);

  // train -------------------------------------------------------------------
  CommonOptions tr;
  std::string tr_history;
  std::string tr_models = "models";
  auto* train = app.add_subcommand("train", "fit the NN models and k-means clusters from a history file");
  train->add_option("--history", tr_history, "history file")->required();
  train->add_option("--models", tr_models, "output directory")->capture_default_str();
  add_learner_options(train, tr);

  // experiment --------------------------------------------------------------
  CommonOptions ex;
  std::string ex_id = "sweep";
  std::vector<std::string> ex_strategies;
  std::vector<std::size_t> ex_nodes;
  std::vector<std::string> ex_inputs;
  std::size_t ex_reps = 5;
  std::uint64_t ex_seed = 1;
  std::size_t ex_warmup = 10;
  std::size_t ex_sampled = 20;
  std::string ex_history;
  std::string ex_out = "results.csv";
  auto* experiment = app.add_subcommand("experiment", "run an experiment and write CSV metrics");
  experiment->add_option("id", ex_id, "weights | tte | makespan | sweep")
      ->check(CLI::IsMember({"weights", "tte", "makespan", "sweep"}))
      ->capture_default_str();
  experiment->add_option("--strategy", ex_strategies, "strategies to compare (default: all)")->delimiter(',');
  experiment->add_option("--nodes", ex_nodes, "node counts to sweep (default: 2,3,4)")->delimiter(',');
  experiment->add_option("--input-size", ex_inputs, "input sizes to sweep (default: 256M,1G,4G)")->delimiter(',');
  experiment->add_option("--reps", ex_reps, "repetitions; seeds are seed..seed+reps-1")->capture_default_str();
  experiment->add_option("--seed", ex_seed, "first seed")->capture_default_str();
  experiment->add_option("--warmup", ex_warmup, "non-speculative warm-up jobs")->capture_default_str();
  experiment->add_option("--sampled-tasks", ex_sampled, "tasks per phase scored for time to end")
      ->capture_default_str();
  experiment->add_option("--history", ex_history, "history file to start from");
  experiment->add_option("--out", ex_out, "CSV path; the summary goes to <out>.summary.txt")->capture_default_str();
  experiment->add_option("--cluster-nodes", ex.nodes, "cluster size when no --config is given")
      ->capture_default_str();
  add_cluster_options(experiment, ex);
  add_learner_options(experiment, ex);
  add_strategy_options(experiment, ex);

  // report ------------------------------------------------------------------
  std::string rp_in;
  std::string rp_out;
  auto* report = app.add_subcommand("report", "re-emit CSV and summary from stored rows");
  report->add_option("--in", rp_in, "CSV written by experiment")->required();
  report->add_option("--out", rp_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      ClusterConfig cfg = build_cluster(simulate, sim, "--nodes");
      cfg.input_bytes = text::parse_size(sim_input);
      cfg.seed = sim_seed;
      HistoryStore history = sim_history.empty() ? HistoryStore{} : HistoryStore::open(sim_history);
      double start = 0.0;
      for (Phase p : {Phase::Map, Phase::Reduce}) {
        for (const auto& r : history.records(p)) start = std::max(start, r.finished_at);
      }
      cfg.start_clock = start;

      const StrategyKind kind = parse_strategy(sim_strategy);
      Knowledge k;
      if (sim_models.empty()) {
        k = build_knowledge(history, learner_config(sim), {kind == StrategyKind::Nn, kind == StrategyKind::Esamr});
      } else {
        k = build_knowledge(history, learner_config(sim), {false, kind == StrategyKind::Esamr});
        k.nn = load_nn_models(sim_models, history);
      }
      auto strategy = make_strategy(kind, sim.params, std::make_shared<const Knowledge>(std::move(k)));
      const SimResult res = run_simulation(cfg, *strategy, sim_history.empty() ? nullptr : &history);
      history.flush();

      std::cout << "strategy " << to_string(kind) << '\n'
                << "makespan_s " << text::format_double(res.makespan) << '\n'
                << "tasks " << res.records.size() << '\n'
                << "decisions " << res.decisions.size() << '\n'
                << "cancelled_work_s " << text::format_double(res.cancelled_work) << '\n';
      for (const auto& d : res.decisions) {
        std::cout << "backup t=" << text::format_double(d.clock) << " task=" << d.task_id
                  << " from=" << d.original_node << " to=" << d.target_node
                  << " tte=" << text::format_double(d.estimated_tte) << '\n';
      }
    } else if (*train) {
      const HistoryStore history = HistoryStore::load(tr_history);
      if (history.empty()) throw Error("history " + tr_history + " has no records");
      const Knowledge k = build_knowledge(history, learner_config(tr));
      save_nn_models(k.nn, tr_models);
      if (k.clusters.map) write_kmeans(std::filesystem::path(tr_models) / "kmeans.map.txt", *k.clusters.map);
      if (k.clusters.reduce) write_kmeans(std::filesystem::path(tr_models) / "kmeans.reduce.txt", *k.clusters.reduce);
      std::cout << "trained on " << history.size() << " records from " << history.nodes().size() << " nodes into "
                << tr_models << '\n';
    } else if (*experiment) {
      ExperimentSpec spec;
      spec.kind = parse_experiment(ex_id);
      if (experiment->count("--cluster-nodes") == 0 && !ex_nodes.empty()) {
        ex.nodes = *std::max_element(ex_nodes.begin(), ex_nodes.end());
      }
      spec.cluster = build_cluster(experiment, ex, "--cluster-nodes");
      if (ex.config.empty() && spec.cluster.nodes.size() != ex.nodes) {
        spec.cluster.nodes = uniform_nodes(ex.nodes, ex.containers);
      }
      if (!ex_strategies.empty()) {
        spec.strategies.clear();
        for (const auto& s : ex_strategies) spec.strategies.push_back(parse_strategy(s));
      }
      if (!ex_nodes.empty()) spec.node_counts = ex_nodes;
      if (!ex_inputs.empty()) {
        spec.input_sizes.clear();
        for (const auto& s : ex_inputs) spec.input_sizes.push_back(text::parse_size(s));
      }
      spec.reps = ex_reps;
      spec.base_seed = ex_seed;
      spec.warmup_jobs = ex_warmup;
      spec.sampled_tasks = ex_sampled;
      spec.history = ex_history;
      spec.params = ex.params;
      spec.learner = learner_config(ex);
      const auto rows = run_experiment(spec);
      emit_report(rows, ex_out);
      std::cout << "wrote " << rows.size() << " rows to " << ex_out << '\n';
    } else if (*report) {
      const auto rows = read_rows(rp_in);
      emit_report(rows, rp_out);
      std::cout << "wrote " << rows.size() << " rows to " << rp_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "stragsim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
