#include "strag/task_model.hpp"

#include <cmath>
#include <numeric>

namespace strag {

std::string_view to_string(Phase p) {
  return p == Phase::Map ? "map" : "reduce";
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::MapCopy: return "copy";
    case Stage::MapCombine: return "combine";
    case Stage::ReduceShuffle: return "shuffle";
    case Stage::ReduceSort: return "sort";
    case Stage::ReduceReduce: return "reduce";
  }
  return "?";
}

Phase parse_phase(std::string_view text) {
  if (text == "map") return Phase::Map;
  if (text == "reduce") return Phase::Reduce;
  throw ConfigError("unknown phase '" + std::string(text) + "'");
}

double StageWeights::at(Stage s) const {
  switch (s) {
    case Stage::MapCopy: return m1;
    case Stage::MapCombine: return m2;
    case Stage::ReduceShuffle: return r1;
    case Stage::ReduceSort: return r2;
    case Stage::ReduceReduce: return r3;
  }
  return 0.0;
}

std::vector<double> StageWeights::phase(Phase p) const {
  if (p == Phase::Map) return {m1, m2};
  return {r1, r2, r3};
}

void StageWeights::set_phase(Phase p, std::span<const double> values) {
  if (values.size() != stage_count(p)) {
    throw DimensionError("weight count does not match phase stage count");
  }
  if (p == Phase::Map) {
    m1 = values[0];
    m2 = values[1];
  } else {
    r1 = values[0];
    r2 = values[1];
    r3 = values[2];
  }
}

bool StageWeights::valid(double tol) const {
  for (double w : {m1, m2, r1, r2, r3}) {
    if (!(w >= -tol && w <= 1.0 + tol)) return false;
  }
  return std::abs(m1 + m2 - 1.0) <= tol && std::abs(r1 + r2 + r3 - 1.0) <= tol;
}

void StageWeights::validate(double tol) const {
  if (!valid(tol)) throw DegenerateInputError("stage weights must sum to 1 per phase");
}

double TaskSnapshot::subps() const {
  if (total_pairs == 0) throw DegenerateInputError("N_a must be at least 1");
  return static_cast<double>(processed_pairs) / static_cast<double>(total_pairs);
}

void TaskSnapshot::validate() const {
  if (total_pairs == 0) throw DegenerateInputError("N_a must be at least 1");
  if (processed_pairs > total_pairs) throw DegenerateInputError("N_f exceeds N_a");
  if (!(elapsed >= 0.0)) throw DegenerateInputError("negative elapsed time");
  if (phase_of(current_stage) != phase) throw PhaseError("stage does not belong to snapshot phase");
}

void ExecutionRecord::validate() const {
  if (stage_durations.size() != stage_count(phase) ||
      realized_weights.size() != stage_count(phase)) {
    throw DimensionError("record stage vectors do not match its phase");
  }
  double sum = std::accumulate(stage_durations.begin(), stage_durations.end(), 0.0);
  if (std::abs(sum - total_time) > 1e-6) {
    throw DegenerateInputError("stage durations do not sum to total time");
  }
  for (std::size_t k = 0; k < stage_durations.size(); ++k) {
    if (std::abs(realized_weights[k] - stage_durations[k] / total_time) > 1e-9) {
      throw DegenerateInputError("realized weights disagree with durations");
    }
  }
}

ExecutionRecord make_record(JobId job, TaskId task, NodeId node, Phase phase,
                            std::uint64_t input_bytes,
                            std::vector<double> stage_durations,
                            double finished_at) {
  if (stage_durations.size() != stage_count(phase)) {
    throw DimensionError("duration count does not match phase stage count");
  }
  ExecutionRecord r;
  r.job_id = job;
  r.task_id = task;
  r.node_id = node;
  r.phase = phase;
  r.input_bytes = input_bytes;
  r.realized_weights = realized_weights_from_durations(stage_durations);
  r.total_time = std::accumulate(stage_durations.begin(), stage_durations.end(), 0.0);
  r.stage_durations = std::move(stage_durations);
  r.finished_at = finished_at;
  return r;
}

double NodeSpec::mean_speed() const {
  return std::accumulate(speed.begin(), speed.end(), 0.0) / static_cast<double>(speed.size());
}

void NodeSpec::validate() const {
  for (double s : speed) {
    if (!(s > 0.0)) throw ConfigError("node speed factors must be positive");
  }
  if (containers < 1) throw ConfigError("node needs at least one container");
}

std::vector<double> realized_weights_from_durations(std::span<const double> durations) {
  if (durations.empty()) throw DegenerateInputError("no stage durations");
  double sum = 0.0;
  for (double d : durations) {
    if (!(d >= 0.0)) throw DegenerateInputError("negative stage duration");
    sum += d;
  }
  if (!(sum > 0.0)) throw DegenerateInputError("all stage durations are zero");
  std::vector<double> w;
  w.reserve(durations.size());
  for (double d : durations) w.push_back(d / sum);
  return w;
}

}  // namespace strag
