#pragma once

// Per-node repository of completed task executions. One JSON object per line
// with fields job_id, task_id, node_id, phase, input_bytes, stage_durations,
// weights, total_time, finished_at.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "strag/task_model.hpp"

namespace strag {

class HistoryStore {
 public:
  HistoryStore() = default;

  /// Loads `path` when it exists; later flush() calls append to it.
  static HistoryStore open(const std::filesystem::path& path);
  static HistoryStore load(const std::filesystem::path& path);
  static HistoryStore from_jsonl(const std::string& text);

  /// Records of a node must arrive with non-decreasing finished_at.
  void append(ExecutionRecord record);

  /// All records of `node` in `phase`, oldest first; the most recent
  /// node_cap records when a cap is set.
  std::vector<ExecutionRecord> records_for_node(NodeId node, Phase phase) const;
  std::vector<ExecutionRecord> records(Phase phase) const;
  std::optional<ExecutionRecord> latest(NodeId node, Phase phase) const;
  std::vector<NodeId> nodes() const;

  std::size_t size() const;
  bool empty() const { return size() == 0; }

  void set_node_cap(std::optional<std::size_t> cap) { node_cap_ = cap; }
  std::optional<std::size_t> node_cap() const { return node_cap_; }

  std::string to_jsonl() const;
  void save(const std::filesystem::path& path) const;

  /// Appends records added since the last flush to the backing file.
  void flush();
  const std::filesystem::path& backing_path() const { return backing_; }

  /// Content equality; backing path and cap are not compared.
  bool operator==(const HistoryStore& other) const { return by_node_ == other.by_node_; }

 private:
  std::map<NodeId, std::vector<ExecutionRecord>> by_node_;
  std::vector<ExecutionRecord> pending_;
  std::filesystem::path backing_;
  std::optional<std::size_t> node_cap_;
};

std::string record_to_json(const ExecutionRecord& r);
ExecutionRecord record_from_json(const std::string& line);

}  // namespace strag
