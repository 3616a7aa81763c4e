#include "strag/history.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace strag {

using json = nlohmann::ordered_json;

std::string record_to_json(const ExecutionRecord& r) {
  json j;
  j["job_id"] = r.job_id;
  j["task_id"] = r.task_id;
  j["node_id"] = r.node_id;
  j["phase"] = std::string(to_string(r.phase));
  j["input_bytes"] = r.input_bytes;
  j["stage_durations"] = r.stage_durations;
  j["weights"] = r.realized_weights;
  j["total_time"] = r.total_time;
  j["finished_at"] = r.finished_at;
  return j.dump();
}

ExecutionRecord record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    ExecutionRecord r;
    r.job_id = j.at("job_id").get<JobId>();
    r.task_id = j.at("task_id").get<TaskId>();
    r.node_id = j.at("node_id").get<NodeId>();
    r.phase = parse_phase(j.at("phase").get<std::string>());
    r.input_bytes = j.at("input_bytes").get<std::uint64_t>();
    r.stage_durations = j.at("stage_durations").get<std::vector<double>>();
    r.realized_weights = j.at("weights").get<std::vector<double>>();
    r.total_time = j.at("total_time").get<double>();
    r.finished_at = j.at("finished_at").get<double>();
    r.validate();
    return r;
  } catch (const json::exception& e) {
    throw StorageError(std::string("malformed history line: ") + e.what());
  }
}

HistoryStore HistoryStore::open(const std::filesystem::path& path) {
  HistoryStore store = std::filesystem::exists(path) ? load(path) : HistoryStore{};
  store.backing_ = path;
  return store;
}

HistoryStore HistoryStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open history file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  HistoryStore store = from_jsonl(ss.str());
  store.backing_ = path;
  return store;
}

HistoryStore HistoryStore::from_jsonl(const std::string& text) {
  HistoryStore store;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    store.append(record_from_json(line));
  }
  store.pending_.clear();
  return store;
}

void HistoryStore::append(ExecutionRecord record) {
  record.validate();
  auto& list = by_node_[record.node_id];
  if (!list.empty() && record.finished_at < list.back().finished_at) {
    throw StorageError("history records must be appended in finish order per node");
  }
  list.push_back(record);
  pending_.push_back(std::move(record));
}

std::vector<ExecutionRecord> HistoryStore::records_for_node(NodeId node, Phase phase) const {
  std::vector<ExecutionRecord> out;
  auto it = by_node_.find(node);
  if (it == by_node_.end()) return out;
  for (const auto& r : it->second) {
    if (r.phase == phase) out.push_back(r);
  }
  if (node_cap_ && out.size() > *node_cap_) {
    out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(*node_cap_));
  }
  return out;
}

std::vector<ExecutionRecord> HistoryStore::records(Phase phase) const {
  std::vector<ExecutionRecord> out;
  for (const auto& [node, _] : by_node_) {
    auto part = records_for_node(node, phase);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::optional<ExecutionRecord> HistoryStore::latest(NodeId node, Phase phase) const {
  auto it = by_node_.find(node);
  if (it == by_node_.end()) return std::nullopt;
  for (auto r = it->second.rbegin(); r != it->second.rend(); ++r) {
    if (r->phase == phase) return *r;
  }
  return std::nullopt;
}

std::vector<NodeId> HistoryStore::nodes() const {
  std::vector<NodeId> out;
  for (const auto& [node, _] : by_node_) out.push_back(node);
  return out;
}

std::size_t HistoryStore::size() const {
  std::size_t n = 0;
  for (const auto& [_, list] : by_node_) n += list.size();
  return n;
}

std::string HistoryStore::to_jsonl() const {
  std::string out;
  for (const auto& [_, list] : by_node_) {
    for (const auto& r : list) {
      out += record_to_json(r);
      out += '\n';
    }
  }
  return out;
}

void HistoryStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write history file " + path.string());
  out << to_jsonl();
  if (!out) throw StorageError("failed writing history file " + path.string());
}

void HistoryStore::flush() {
  if (backing_.empty() || pending_.empty()) {
    pending_.clear();
    return;
  }
  std::ofstream out(backing_, std::ios::binary | std::ios::app);
  if (!out) throw StorageError("cannot append to history file " + backing_.string());
  for (const auto& r : pending_) out << record_to_json(r) << '\n';
  if (!out) throw StorageError("failed appending to history file " + backing_.string());
  pending_.clear();
}

}  // namespace strag
