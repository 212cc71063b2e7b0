#include "embercall/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <thread>

namespace embercall {

using Json = nlohmann::json;

void TaskGraph::add(Task task) {
  if (task.id.empty()) throw ValidationError("task graph: empty task id");
  if (by_id_.count(task.id)) throw ValidationError("task graph: duplicate task id '" + task.id + "'");
  const std::size_t index = tasks_.size();
  for (const auto& out : task.outputs) {
    auto [it, inserted] = producer_.emplace(out.lexically_normal(), index);
    if (!inserted)
      throw ValidationError("task graph: output " + out.string() + " of '" + task.id + "' is already produced by '" +
                            tasks_[it->second].id + "'");
  }
  by_id_.emplace(task.id, index);
  tasks_.push_back(std::move(task));
  link();
}

void TaskGraph::link() {
  // Producers can be added after consumers, so edges are recomputed in full.
  deps_.assign(tasks_.size(), {});
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    std::set<std::size_t> d;
    for (const auto& in : tasks_[i].inputs)
      if (auto it = producer_.find(in.lexically_normal()); it != producer_.end()) d.insert(it->second);
    deps_[i].assign(d.begin(), d.end());
  }
}

std::size_t TaskGraph::index_of(std::string_view id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ValidationError("task graph: no task '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::size_t> TaskGraph::topological_order() const {
  const std::size_t n = tasks_.size();
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<std::size_t>> dependents(n);
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = deps_[i].size();
    for (std::size_t d : deps_[i]) dependents[d].push_back(i);
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (pending[i] == 0) ready.push(i);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t j : dependents[i])
      if (--pending[j] == 0) ready.push(j);
  }
  if (order.size() != n) {
    std::string msg = "task graph has a cycle through:";
    for (std::size_t i = 0; i < n; ++i)
      if (pending[i] > 0) msg += " " + tasks_[i].id;
    throw ValidationError(msg);
  }
  return order;
}

Json RunReport::to_json() const {
  return {{"executed", executed}, {"skipped", skipped}, {"failed", failed},
          {"errors", errors},     {"seconds", seconds}, {"total_seconds", total_seconds}};
}

std::string RunReport::summary() const {
  const std::size_t total = executed.size() + skipped.size() + failed.size();
  if (total > 0 && skipped.size() == total) return "skipped: all (" + std::to_string(total) + " tasks)";
  return "executed: " + std::to_string(executed.size()) + ", skipped: " + std::to_string(skipped.size()) +
         ", failed: " + std::to_string(failed.size());
}

namespace {

class WorkerPool {
 public:
  explicit WorkerPool(int workers) {
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { loop(); });
  }
  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }
  void submit(std::function<void()> job) {
    {
      std::lock_guard lock(mu_);
      jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
  }

 private:
  void loop() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      job();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  std::vector<std::thread> threads_;
  bool stop_ = false;
};

struct Completion {
  std::size_t task = 0;
  std::optional<std::string> error;
  double seconds = 0.0;
};

Json load_state(const fs::path& path) {
  if (path.empty() || !fs::exists(path)) return Json::object();
  try {
    auto j = Json::parse(read_file(path));
    if (j.is_object() && j.contains("tasks") && j["tasks"].is_object()) return j["tasks"];
  } catch (const Json::exception&) {
  }
  return Json::object();  // unreadable state only costs a full rerun
}

}  // namespace

RunReport execute(const TaskGraph& graph, const ExecuteOptions& options) {
  if (options.workers < 1) throw ValidationError("execute: workers must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const auto order = graph.topological_order();
  const auto& tasks = graph.tasks();
  const auto& deps = graph.dependencies();
  const std::size_t n = tasks.size();

  Json state = options.resume ? load_state(options.state_file) : Json::object();
  std::map<fs::path, std::string> hash_cache;
  auto hash_of = [&](const fs::path& p) -> std::optional<std::string> {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) return std::nullopt;
    auto it = hash_cache.find(p);
    if (it == hash_cache.end()) it = hash_cache.emplace(p, sha256_file(p)).first;
    return it->second;
  };
  auto save_state = [&] {
    if (!options.state_file.empty()) atomic_write_bytes(options.state_file, Json{{"tasks", state}}.dump(1) + "\n");
  };

  enum class Status { Pending, Running, Executed, Skipped, Failed };
  std::vector<Status> status(n, Status::Pending);
  std::vector<std::size_t> waiting(n);
  std::vector<std::vector<std::size_t>> dependents(n);
  for (std::size_t i = 0; i < n; ++i) {
    waiting[i] = deps[i].size();
    for (std::size_t d : deps[i]) dependents[d].push_back(i);
  }
  std::vector<std::size_t> rank(n);
  for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
  auto by_rank = [&](std::size_t a, std::size_t b) { return rank[a] > rank[b]; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_rank)> ready(by_rank);
  for (std::size_t i = 0; i < n; ++i)
    if (waiting[i] == 0) ready.push(i);

  RunReport report;
  std::mutex done_mu;
  std::condition_variable done_cv;
  std::deque<Completion> done;
  std::size_t running = 0;
  std::size_t finished = 0;

  auto can_skip = [&](std::size_t i) {
    if (!options.resume) return false;
    for (std::size_t d : deps[i])
      if (status[d] != Status::Skipped) return false;
    const auto it = state.find(tasks[i].id);
    if (it == state.end()) return false;
    const Json& rec = *it;
    for (const char* key : {"inputs", "outputs"}) {
      const auto& files = key[0] == 'i' ? tasks[i].inputs : tasks[i].outputs;
      if (!rec.contains(key) || rec[key].size() != files.size()) return false;
      for (const auto& f : files) {
        const auto h = hash_of(f);
        if (!h || !rec[key].contains(f.string()) || rec[key][f.string()] != *h) return false;
      }
    }
    return true;
  };

  auto settle = [&](std::size_t i, Status s) {
    status[i] = s;
    ++finished;
    for (std::size_t j : dependents[i])
      if (--waiting[j] == 0) ready.push(j);
  };

  {
    WorkerPool pool(options.workers);
    while (finished < n) {
      while (!ready.empty()) {
        const std::size_t i = ready.top();
        ready.pop();
        const Task& t = tasks[i];
        const auto failed_dep = std::find_if(deps[i].begin(), deps[i].end(), [&](std::size_t d) { return status[d] == Status::Failed; });
        if (failed_dep != deps[i].end()) {
          report.failed.push_back(t.id);
          report.errors[t.id] = "upstream task '" + tasks[*failed_dep].id + "' failed";
          settle(i, Status::Failed);
          continue;
        }
        if (can_skip(i)) {
          report.skipped.push_back(t.id);
          settle(i, Status::Skipped);
          continue;
        }
        std::string missing;
        for (const auto& in : t.inputs)
          if (!fs::exists(in)) missing += " " + in.string();
        if (!missing.empty()) {
          report.failed.push_back(t.id);
          report.errors[t.id] = "missing input(s):" + missing;
          settle(i, Status::Failed);
          continue;
        }
        status[i] = Status::Running;
        ++running;
        pool.submit([&, i] {
          Completion c{i, std::nullopt, 0.0};
          const auto t0 = std::chrono::steady_clock::now();
          try {
            tasks[i].action();
          } catch (const std::exception& e) {
            c.error = e.what();
          } catch (...) {
            c.error = "unknown exception";
          }
          c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          {
            std::lock_guard lock(done_mu);
            done.push_back(std::move(c));
          }
          done_cv.notify_one();
        });
      }
      if (running == 0) break;

      Completion c;
      {
        std::unique_lock lock(done_mu);
        done_cv.wait(lock, [&] { return !done.empty(); });
        c = std::move(done.front());
        done.pop_front();
      }
      --running;
      const Task& t = tasks[c.task];
      if (!c.error) {
        for (const auto& out : t.outputs)
          if (!fs::is_regular_file(out)) {
            c.error = "did not write declared output " + out.string();
            break;
          }
      }
      if (c.error) {
        state.erase(t.id);
        report.failed.push_back(t.id);
        report.errors[t.id] = *c.error;
        settle(c.task, Status::Failed);
        continue;
      }
      Json rec = {{"inputs", Json::object()}, {"outputs", Json::object()}};
      for (const auto& out : t.outputs) hash_cache.erase(out);
      for (const auto& in : t.inputs)
        if (auto h = hash_of(in)) rec["inputs"][in.string()] = *h;
      for (const auto& out : t.outputs) rec["outputs"][out.string()] = *hash_of(out);
      state[t.id] = std::move(rec);
      save_state();
      report.executed.push_back(t.id);
      report.seconds[t.id] = c.seconds;
      settle(c.task, Status::Executed);
    }
  }
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace embercall
