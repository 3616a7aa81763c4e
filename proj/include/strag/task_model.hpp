#pragma once

// Domain types shared by the estimators, the strategies and the simulator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace strag {

using NodeId = std::uint32_t;
using TaskId = std::uint64_t;
using JobId = std::uint64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that makes a formula undefined (zero totals, empty lists, t <= 0).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A stage or snapshot belonging to the other phase than the one expected.
class PhaseError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

/// No node can host a backup attempt.
class NoTargetError : public Error {
 public:
  using Error::Error;
};

enum class Phase : std::uint8_t { Map, Reduce };

// Ordinal order is execution order.
enum class Stage : std::uint8_t {
  MapCopy = 0,
  MapCombine = 1,
  ReduceShuffle = 2,
  ReduceSort = 3,
  ReduceReduce = 4,
};

inline constexpr std::size_t kStageCount = 5;

constexpr std::size_t ordinal(Stage s) { return static_cast<std::size_t>(s); }

constexpr Phase phase_of(Stage s) {
  return ordinal(s) < 2 ? Phase::Map : Phase::Reduce;
}

constexpr std::size_t stage_count(Phase p) { return p == Phase::Map ? 2 : 3; }

constexpr Stage first_stage(Phase p) {
  return p == Phase::Map ? Stage::MapCopy : Stage::ReduceShuffle;
}

/// Position of the stage inside its phase (0 for copy and shuffle).
constexpr std::size_t index_in_phase(Stage s) {
  return phase_of(s) == Phase::Map ? ordinal(s) : ordinal(s) - 2;
}

constexpr Stage stage_at(Phase p, std::size_t index) {
  return static_cast<Stage>(ordinal(first_stage(p)) + index);
}

std::string_view to_string(Phase p);
std::string_view to_string(Stage s);
Phase parse_phase(std::string_view text);

/// Per-stage fractions of phase execution time. Map and reduce weights are
/// independent: m1 + m2 = 1 and r1 + r2 + r3 = 1.
struct StageWeights {
  double m1 = 1.0;
  double m2 = 0.0;
  double r1 = 1.0 / 3.0;
  double r2 = 1.0 / 3.0;
  double r3 = 1.0 / 3.0;

  /// Constant weights used by Hadoop's default estimator and by LATE.
  static constexpr StageWeights naive() { return {}; }

  double at(Stage s) const;
  std::vector<double> phase(Phase p) const;
  void set_phase(Phase p, std::span<const double> values);

  bool valid(double tol = 1e-9) const;
  void validate(double tol = 1e-9) const;

  bool operator==(const StageWeights&) const = default;
};

/// Live observables of one running task attempt.
struct TaskSnapshot {
  TaskId task_id = 0;
  JobId job_id = 0;
  Phase phase = Phase::Map;
  Stage current_stage = Stage::MapCopy;
  std::uint64_t processed_pairs = 0;  // N_f, counted within the current stage
  std::uint64_t total_pairs = 1;      // N_a
  double elapsed = 0.0;               // seconds since the attempt started
  std::uint64_t input_bytes = 0;
  NodeId node_id = 0;
  bool is_backup = false;
  std::uint32_t attempt = 0;

  double subps() const;
  void validate() const;

  bool operator==(const TaskSnapshot&) const = default;
};

/// A completed task as stored in the history repository.
struct ExecutionRecord {
  JobId job_id = 0;
  TaskId task_id = 0;
  NodeId node_id = 0;
  Phase phase = Phase::Map;
  std::uint64_t input_bytes = 0;
  std::vector<double> stage_durations;
  std::vector<double> realized_weights;
  double total_time = 0.0;
  double finished_at = 0.0;

  void validate() const;

  bool operator==(const ExecutionRecord&) const = default;
};

/// Builds a record, deriving realized weights and total time from durations.
ExecutionRecord make_record(JobId job, TaskId task, NodeId node, Phase phase,
                            std::uint64_t input_bytes,
                            std::vector<double> stage_durations,
                            double finished_at);

struct NodeSpec {
  NodeId node_id = 0;
  std::array<double, kStageCount> speed{1.0, 1.0, 1.0, 1.0, 1.0};
  std::size_t containers = 1;

  double mean_speed() const;
  void validate() const;

  bool operator==(const NodeSpec&) const = default;
};

/// Fraction of total time spent in each stage.
std::vector<double> realized_weights_from_durations(
    std::span<const double> durations);

}  // namespace strag
