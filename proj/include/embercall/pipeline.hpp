#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "embercall/util.hpp"
#include "nlohmann/json.hpp"

namespace embercall {

/// A unit of work with file targets. The action must write every declared
/// output (atomically) and nothing else.
struct Task {
  std::string id;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::function<void()> action;
};

/// Tasks plus the dependency edges implied by their files: a task depends on
/// the producer of each of its inputs. Inputs nobody produces are external.
class TaskGraph {
 public:
  /// Throws ValidationError on a duplicate id or an output already claimed by
  /// another task.
  void add(Task task);

  const std::vector<Task>& tasks() const { return tasks_; }
  std::size_t size() const { return tasks_.size(); }
  /// Index of the task with this id; throws ValidationError if absent.
  std::size_t index_of(std::string_view id) const;
  /// Producer indices for each task's inputs, ascending and de-duplicated.
  const std::vector<std::vector<std::size_t>>& dependencies() const { return deps_; }
  /// Kahn order, ties broken by insertion order. Throws ValidationError
  /// naming the tasks on a cycle.
  std::vector<std::size_t> topological_order() const;

 private:
  void link();

  std::vector<Task> tasks_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<fs::path, std::size_t> producer_;
  std::vector<std::vector<std::size_t>> deps_;
};

struct RunReport {
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  std::vector<std::string> failed;
  std::map<std::string, std::string> errors;  // failed id -> message
  std::map<std::string, double> seconds;      // executed id -> wall time
  double total_seconds = 0.0;

  bool ok() const { return failed.empty(); }
  nlohmann::json to_json() const;
  /// "executed: 3, skipped: 7, failed: 0" or "skipped: all (10 tasks)".
  std::string summary() const;
};

struct ExecuteOptions {
  int workers = 1;
  bool resume = true;
  /// Records input/output hashes of completed tasks; required for resume.
  fs::path state_file;
};

/// Runs the graph in dependency order on a pool of `workers` threads; the
/// scheduling itself is single-threaded. With resume, a task is skipped when
/// its recorded outputs exist with the recorded hashes, its inputs still hash
/// to what they were when it last ran, and no upstream task ran in this
/// execution. Failed tasks fail their dependents; independent branches
/// continue. A cyclic graph throws before anything runs.
RunReport execute(const TaskGraph& graph, const ExecuteOptions& options);

}  // namespace embercall
