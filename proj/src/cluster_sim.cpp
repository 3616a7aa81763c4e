#include "strag/cluster_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>

#include "strag/text.hpp"

namespace strag {

std::string_view to_string(Workload w) {
  return w == Workload::WordCountLike ? "wordcount" : "sort";
}

Workload parse_workload(std::string_view name) {
  if (name == "wordcount" || name == "WordCountLike") return Workload::WordCountLike;
  if (name == "sort" || name == "SortLike") return Workload::SortLike;
  throw ConfigError("unknown workload '" + std::string(name) + "'");
}

std::array<double, kStageCount> base_profile(Workload w) {
  if (w == Workload::WordCountLike) return {8.0, 2.0, 6.0, 2.0, 2.0};
  return {4.0, 1.0, 12.0, 6.0, 3.0};
}

void ClusterConfig::validate() const {
  if (nodes.empty()) throw ConfigError("cluster has no nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].validate();
    if (nodes[i].node_id != i) throw ConfigError("node ids must be 0..n-1 in order");
    if (nodes[i].containers == 0) throw ConfigError("node " + std::to_string(i) + " has no containers");
  }
  if (block_size == 0) throw ConfigError("block size must be positive");
  if (input_bytes == 0) throw ConfigError("input size must be positive");
  if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("noise amplitude must lie in [0,1)");
  if (!(straggler.fraction >= 0.0 && straggler.fraction < 1.0)) {
    throw ConfigError("straggler fraction must lie in [0,1)");
  }
  if (!(straggler.multiplier > 0.0 && straggler.multiplier <= 1.0)) {
    throw ConfigError("straggler multiplier must lie in (0,1]");
  }
  if (!(tick > 0.0)) throw ConfigError("tick must be positive");
  if (!std::isfinite(start_clock)) throw ConfigError("start clock must be finite");
}

std::vector<NodeSpec> uniform_nodes(std::size_t count, std::size_t containers) {
  std::vector<NodeSpec> nodes(count);
  for (std::size_t i = 0; i < count; ++i) {
    nodes[i].node_id = static_cast<NodeId>(i);
    nodes[i].containers = containers;
  }
  return nodes;
}

ClusterConfig parse_cluster_config(std::string_view text, ClusterConfig base) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (std::string_view line : text::split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    kv[std::string(text::trim(line.substr(0, eq)))] = std::string(text::trim(line.substr(eq + 1)));
  }

  ClusterConfig c = std::move(base);
  auto take = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  try {
    std::size_t containers = c.nodes.empty() ? 1 : c.nodes.front().containers;
    if (auto v = take("containers")) containers = text::parse_u64(*v);
    if (auto v = take("nodes")) {
      c.nodes = uniform_nodes(text::parse_u64(*v), containers);
    } else if (take("containers")) {
      for (auto& n : c.nodes) n.containers = containers;
    }
    if (auto v = take("block_size")) c.block_size = text::parse_size(*v);
    if (auto v = take("workload")) c.workload = parse_workload(*v);
    if (auto v = take("input_size")) c.input_bytes = text::parse_size(*v);
    if (auto v = take("noise")) c.noise = text::parse_double(*v);
    if (auto v = take("straggler_fraction")) c.straggler.fraction = text::parse_double(*v);
    if (auto v = take("straggler_multiplier")) c.straggler.multiplier = text::parse_double(*v);
    if (auto v = take("straggler_seed")) c.straggler.seed = text::parse_u64(*v);
    if (auto v = take("seed")) c.seed = text::parse_u64(*v);
    if (auto v = take("reduce_tasks")) c.reduce_tasks = text::parse_u64(*v);
    if (auto v = take("tick")) c.tick = text::parse_double(*v);

    for (const auto& [key, value] : kv) {
      if (key.rfind("node.", 0) != 0) continue;
      const auto parts = text::split(key, '.');
      if (parts.size() != 3) throw ConfigError("bad key '" + key + "'");
      const auto id = text::parse_u64(parts[1]);
      if (id >= c.nodes.size()) throw ConfigError("key '" + key + "' names a node beyond 'nodes'");
      NodeSpec& node = c.nodes[id];
      if (parts[2] == "speed") {
        const auto values = text::split(value, ',');
        if (values.size() != kStageCount) throw ConfigError("'" + key + "' needs five speeds");
        for (std::size_t s = 0; s < kStageCount; ++s) node.speed[s] = text::parse_double(text::trim(values[s]));
      } else if (parts[2] == "containers") {
        node.containers = text::parse_u64(value);
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    }
    static const std::set<std::string> known{"containers", "nodes", "block_size", "workload", "input_size",
                                             "noise", "straggler_fraction", "straggler_multiplier",
                                             "straggler_seed", "seed", "reduce_tasks", "tick"};
    for (const auto& [key, _] : kv) {
      if (key.rfind("node.", 0) != 0 && !known.contains(key)) throw ConfigError("unknown key '" + key + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ClusterConfig load_cluster_config(const std::filesystem::path& path, ClusterConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_cluster_config(ss.str(), std::move(base));
}

std::size_t split_job(std::uint64_t input_bytes, std::uint64_t block_size) {
  if (input_bytes == 0) throw ConfigError("job has no input");
  if (block_size == 0) throw ConfigError("block size must be positive");
  return static_cast<std::size_t>((input_bytes + block_size - 1) / block_size);
}

double stage_duration(Workload workload, Stage stage, std::uint64_t task_input_bytes, const NodeSpec& node,
                      Rng& rng, double noise, std::uint64_t block_size) {
  const double u = rng.uniform(-noise, noise);
  const double blocks = static_cast<double>(task_input_bytes) / static_cast<double>(block_size);
  return base_profile(workload)[ordinal(stage)] * blocks / node.speed[ordinal(stage)] * (1.0 + u);
}

std::set<NodeId> straggler_nodes(const ClusterConfig& config) {
  const std::size_t n = config.nodes.size();
  const auto count = static_cast<std::size_t>(std::llround(config.straggler.fraction * static_cast<double>(n)));
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  Rng rng(derive_seed(config.straggler.seed, {0x57a9}));
  for (std::size_t i = 0; i < count && i < n; ++i) {
    std::swap(ids[i], ids[i + rng.below(n - i)]);
  }
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(count, n))};
}

std::vector<NodeSpec> effective_nodes(const ClusterConfig& config) {
  std::vector<NodeSpec> nodes = config.nodes;
  for (NodeId id : straggler_nodes(config)) {
    for (double& s : nodes[id].speed) s *= config.straggler.multiplier;
  }
  return nodes;
}

std::uint64_t pairs_for(std::uint64_t input_bytes, std::uint64_t block_size) {
  const double pairs = static_cast<double>(kPairsPerBlock) * static_cast<double>(input_bytes) /
                       static_cast<double>(block_size);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(pairs)));
}

TaskSnapshot snapshot_attempt(const AttemptView& a, JobId job, double clock) {
  TaskSnapshot s;
  s.task_id = a.task_id;
  s.job_id = job;
  s.phase = a.phase;
  s.total_pairs = a.total_pairs;
  s.input_bytes = a.input_bytes;
  s.node_id = a.node_id;
  s.is_backup = a.is_backup;
  s.attempt = a.attempt;
  s.elapsed = clock - a.start;

  double stage_start = a.start;
  std::size_t idx = 0;
  while (idx + 1 < a.durations.size() && clock >= stage_start + a.durations[idx]) {
    stage_start += a.durations[idx];
    ++idx;
  }
  const double d = a.durations.empty() ? 0.0 : a.durations[idx];
  const double frac = d > 0.0 ? std::clamp((clock - stage_start) / d, 0.0, 1.0) : 0.0;
  s.current_stage = stage_at(a.phase, idx);
  s.processed_pairs = std::min(
      a.total_pairs, static_cast<std::uint64_t>(std::floor(static_cast<double>(a.total_pairs) * frac + 1e-9)));
  return s;
}

std::vector<TaskSnapshot> snapshot_tasks(std::span<const AttemptView> running, JobId job, double clock) {
  std::vector<TaskSnapshot> out;
  out.reserve(running.size());
  for (const auto& a : running) out.push_back(snapshot_attempt(a, job, clock));
  return out;
}

namespace {

struct Attempt {
  AttemptView view;
  std::size_t stage = 0;
  double stage_start = 0.0;
  bool started = false;
  bool active = true;
  bool holds_container = true;
};

enum class TaskState : std::uint8_t { Waiting, Pending, Running, Done };

struct Task {
  TaskId id = 0;
  Phase phase = Phase::Map;
  std::uint64_t bytes = 0;
  std::uint64_t pairs = 1;
  TaskState state = TaskState::Waiting;
  std::vector<std::size_t> attempts;  // indices into Simulation::attempts_
  double finished = 0.0;
};

struct Later {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    return std::tie(a.time, a.kind, a.task_id, a.seq) > std::tie(b.time, b.kind, b.task_id, b.seq);
  }
};

class Simulation {
 public:
  Simulation(const ClusterConfig& config, const Strategy& strategy, HistoryStore* history, const SimOptions& options)
      : cfg_(config), strategy_(strategy), history_(history), opts_(options), actual_(effective_nodes(config)) {
    for (const auto& n : cfg_.nodes) nodes_.push_back({n, n.containers});

    const std::size_t maps = split_job(cfg_.input_bytes, cfg_.block_size);
    const std::size_t reduces = cfg_.reduce_task_count();
    for (std::size_t i = 0; i < maps; ++i) {
      const std::uint64_t bytes = i + 1 < maps ? cfg_.block_size : cfg_.input_bytes - cfg_.block_size * (maps - 1);
      add_task(Phase::Map, bytes);
    }
    for (std::size_t i = 0; i < reduces; ++i) {
      const std::uint64_t bytes = cfg_.input_bytes / reduces + (i < cfg_.input_bytes % reduces ? 1 : 0);
      add_task(Phase::Reduce, std::max<std::uint64_t>(bytes, 1));
    }
    map_count_ = maps;
    result_.tasks.resize(tasks_.size());
  }

  SimResult run() {
    for (std::size_t i = 0; i < map_count_; ++i) make_pending(i);
    dispatch(cfg_.start_clock);
    push(cfg_.start_clock + cfg_.tick, SimEventKind::StrategyTick, 0, 0);

    while (!done_) {
      if (queue_.empty()) throw Error("simulation stalled with unfinished tasks");
      const SimEvent ev = queue_.top();
      queue_.pop();
      if (opts_.trace_events) result_.events.push_back(ev);
      switch (ev.kind) {
        case SimEventKind::TaskLaunch:
        case SimEventKind::BackupLaunch: start_attempt(ev); break;
        case SimEventKind::TaskStageComplete: stage_complete(ev); break;
        case SimEventKind::StrategyTick: tick(ev.time); break;
        case SimEventKind::TaskCancel:
          release(attempts_[ev.seq]);
          dispatch(ev.time);
          break;
        case SimEventKind::JobComplete:
          result_.makespan = ev.time - cfg_.start_clock;
          done_ = true;
          break;
      }
    }
    for (auto& log : result_.estimates) {
      log.realized_remaining = tasks_[log.estimate.task_id].finished - log.clock;
    }
    return std::move(result_);
  }

 private:
  void add_task(Phase phase, std::uint64_t bytes) {
    Task t;
    t.id = tasks_.size();
    t.phase = phase;
    t.bytes = bytes;
    t.pairs = pairs_for(bytes, cfg_.block_size);
    tasks_.push_back(t);
  }

  void push(double time, SimEventKind kind, TaskId task, std::uint64_t seq) {
    // For attempt events seq is the global attempt index, which also breaks
    // ties between a task's original and its backup.
    const auto attempt = kind == SimEventKind::StrategyTick || kind == SimEventKind::JobComplete
                             ? 0u
                             : attempts_[seq].view.attempt;
    queue_.push({time, kind, task, attempt, seq});
  }

  void make_pending(std::size_t task) {
    tasks_[task].state = TaskState::Pending;
    pending_.push_back(task);
  }

  std::size_t reserve(std::size_t task, NodeId node, bool backup) {
    Task& t = tasks_[task];
    Attempt a;
    a.view.task_id = t.id;
    a.view.phase = t.phase;
    a.view.input_bytes = t.bytes;
    a.view.total_pairs = t.pairs;
    a.view.node_id = node;
    a.view.is_backup = backup;
    a.view.attempt = static_cast<std::uint32_t>(t.attempts.size());
    --nodes_[node].free_containers;
    attempts_.push_back(std::move(a));
    t.attempts.push_back(attempts_.size() - 1);
    ++result_.launched_attempts;
    return attempts_.size() - 1;
  }

  void release(Attempt& a) {
    if (!a.holds_container) return;
    a.holds_container = false;
    ++nodes_[a.view.node_id].free_containers;
  }

  void dispatch(double clock) {
    for (auto& node : nodes_) {
      while (node.free_containers > 0 && !pending_.empty()) {
        const std::size_t task = pending_.front();
        pending_.pop_front();
        tasks_[task].state = TaskState::Running;
        const std::size_t idx = reserve(task, node.spec.node_id, false);
        push(clock, SimEventKind::TaskLaunch, task, idx);
      }
    }
  }

  void start_attempt(const SimEvent& ev) {
    Attempt& a = attempts_[ev.seq];
    if (!a.active) return;
    a.started = true;
    a.view.start = ev.time;
    Rng rng(derive_seed(cfg_.seed, {a.view.task_id, a.view.attempt}));
    const NodeSpec& node = actual_[a.view.node_id];
    for (std::size_t s = 0; s < stage_count(a.view.phase); ++s) {
      a.view.durations.push_back(stage_duration(cfg_.workload, stage_at(a.view.phase, s), a.view.input_bytes, node,
                                                rng, cfg_.noise, cfg_.block_size));
    }
    a.stage = 0;
    a.stage_start = ev.time;
    push(ev.time + a.view.durations[0], SimEventKind::TaskStageComplete, a.view.task_id, ev.seq);
  }

  void stage_complete(const SimEvent& ev) {
    Attempt& a = attempts_[ev.seq];
    if (!a.active) return;
    ++a.stage;
    if (a.stage < a.view.durations.size()) {
      a.stage_start = ev.time;
      push(ev.time + a.view.durations[a.stage], SimEventKind::TaskStageComplete, a.view.task_id, ev.seq);
      return;
    }
    finish_task(ev.seq, ev.time);
  }

  void finish_task(std::size_t winner, double clock) {
    Attempt& w = attempts_[winner];
    Task& t = tasks_[w.view.task_id];
    t.state = TaskState::Done;
    t.finished = clock;
    w.active = false;
    release(w);

    ExecutionRecord rec =
        make_record(cfg_.job_id, t.id, w.view.node_id, t.phase, t.bytes, w.view.durations, clock);
    if (history_ != nullptr) history_->append(rec);
    result_.records.push_back(std::move(rec));
    result_.tasks[t.id] = {t.id, t.phase, w.view.node_id, w.view.start, clock, w.view.is_backup};

    for (std::size_t idx : t.attempts) {
      Attempt& other = attempts_[idx];
      if (idx == winner || !other.active) continue;
      other.active = false;
      if (other.started) result_.cancelled_work += clock - other.view.start;
      push(clock, SimEventKind::TaskCancel, t.id, idx);
    }

    ++finished_;
    if (finished_ == map_count_) {
      for (std::size_t i = map_count_; i < tasks_.size(); ++i) make_pending(i);
    }
    if (finished_ == tasks_.size()) push(clock, SimEventKind::JobComplete, 0, 0);
    dispatch(clock);
  }

  void tick(double clock) {
    if (finished_ == tasks_.size()) return;

    std::vector<AttemptView> running;
    std::size_t originals = 0;
    std::size_t backups = 0;
    for (const auto& a : attempts_) {
      if (!a.active) continue;
      (a.view.is_backup ? backups : originals) += 1;
      if (a.started) running.push_back(a.view);
    }
    std::sort(running.begin(), running.end(), [](const AttemptView& x, const AttemptView& y) {
      return std::tie(x.task_id, x.attempt) < std::tie(y.task_id, y.attempt);
    });
    const auto snapshots = snapshot_tasks(running, cfg_.job_id, clock);

    EvaluationContext ctx;
    ctx.clock = clock;
    ctx.snapshots = snapshots;
    ctx.nodes = nodes_;
    ctx.job = {cfg_.job_id, map_count_, tasks_.size() - map_count_, result_.records};
    ctx.running_backups = backups;

    Evaluation ev = strategy_.evaluate(ctx);
    if (opts_.log_estimates) {
      for (const auto& e : ev.estimates) result_.estimates.push_back({strategy_.kind(), false, clock, e, 0.0});
    }
    for (const Strategy* obs : opts_.observers) {
      for (const auto& e : obs->estimate_all(ctx)) {
        if (e.elapsed >= opts_.observe_min_elapsed) result_.estimates.push_back({obs->kind(), true, clock, e, 0.0});
      }
    }

    for (const auto& d : ev.decisions) {
      const Task& t = tasks_.at(d.task_id);
      const bool has_backup = std::any_of(t.attempts.begin(), t.attempts.end(), [&](std::size_t i) {
        return attempts_[i].active && attempts_[i].view.is_backup;
      });
      if (t.state != TaskState::Running || has_backup || d.target_node >= nodes_.size() ||
          nodes_[d.target_node].free_containers == 0) {
        throw Error("strategy requested an impossible backup for task " + std::to_string(d.task_id));
      }
      const std::size_t idx = reserve(d.task_id, d.target_node, true);
      push(clock, SimEventKind::BackupLaunch, d.task_id, idx);
      result_.decisions.push_back(d);
      ++backups;
    }
    if (strategy_.kind() != StrategyKind::NoSpeculate) {
      result_.cap_trace.push_back({clock, originals, backups, tasks_.size(), ev.decisions.size()});
    }
    push(clock + cfg_.tick, SimEventKind::StrategyTick, 0, 0);
  }

  const ClusterConfig& cfg_;
  const Strategy& strategy_;
  HistoryStore* history_;
  const SimOptions& opts_;
  std::vector<NodeSpec> actual_;
  std::vector<NodeState> nodes_;
  std::vector<Task> tasks_;
  std::vector<Attempt> attempts_;
  std::deque<std::size_t> pending_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::size_t map_count_ = 0;
  std::size_t finished_ = 0;
  bool done_ = false;
  SimResult result_;
};

}  // namespace

SimResult run_simulation(const ClusterConfig& config, const Strategy& strategy, HistoryStore* history,
                         const SimOptions& options) {
  config.validate();
  return Simulation(config, strategy, history, options).run();
}

}  // namespace strag
