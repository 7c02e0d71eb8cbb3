#include "twincheck/twin.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

#include "json.hpp"
#include "twincheck/errors.hpp"
#include "twincheck/stats.hpp"

namespace twincheck {

TwinDataset generate_twin_dataset(const TrajectoryDataset& d, std::vector<int> actions,
                                  TwinFactory& twin, long m, std::uint64_t seed,
                                  const TwinGenOptions& opts) {
  const int t = static_cast<int>(actions.size());
  if (t < 1 || t > d.schema.horizon)
    throw ValidationError("twin action sequence length outside [1, T]");
  for (int s = 0; s < t; ++s) {
    const int card = d.schema.action_cardinalities[static_cast<std::size_t>(s)];
    if (actions[static_cast<std::size_t>(s)] < 0 || actions[static_cast<std::size_t>(s)] >= card)
      throw ValidationError("twin action index out of range at step " + std::to_string(s + 1));
  }
  if (m < 0) throw ValidationError("twin dataset size must be nonnegative");
  if (m > static_cast<long>(d.records.size()))
    throw ValidationError("twin dataset size exceeds available initial states");

  TwinDataset out;
  out.actions = std::move(actions);
  out.schema = d.schema;
  out.twin_id = twin.id();
  out.seed = seed;
  if (m == 0) return out;

  // Each X0 initializes at most one session.
  std::vector<std::size_t> idx(d.records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, 0x5e1ec7));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());

  std::vector<std::vector<double>> raw_by_step(static_cast<std::size_t>(t));
  if (opts.binning != nullptr)
    for (int s = 0; s < t; ++s)
      raw_by_step[static_cast<std::size_t>(s)] =
          representative_doses(*opts.binning, out.actions[static_cast<std::size_t>(s)]);

  std::vector<std::optional<TwinRecord>> results(idx.size());
  auto run_session = [&](std::size_t i) {
    try {
      const auto& x0 = d.records[idx[i]].x0;
      auto session = twin.make_session(mix_seed(seed, i + 1));
      session->init(x0);
      TwinRecord rec;
      rec.x0 = x0;
      rec.steps.reserve(static_cast<std::size_t>(t));
      for (int s = 0; s < t; ++s) {
        auto x = session->step(out.actions[static_cast<std::size_t>(s)],
                               raw_by_step[static_cast<std::size_t>(s)]);
        if (x.size() != d.schema.step_features.size())
          throw StageError("emitted " + std::to_string(x.size()) + " features, expected " +
                           std::to_string(d.schema.step_features.size()));
        rec.steps.push_back(std::move(x));
      }
      results[i] = std::move(rec);
    } catch (const std::exception& e) {
      throw StageError("twin session " + std::to_string(i) + ": " + e.what());
    }
  };

  const int workers = std::max(1, std::min<int>(opts.parallelism, static_cast<int>(idx.size())));
  std::vector<long> failed(idx.size(), -1);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&](int wid) {
    for (std::size_t i = static_cast<std::size_t>(wid); i < idx.size();
         i += static_cast<std::size_t>(workers)) {
      try {
        run_session(i);
      } catch (const std::exception&) {
        if (opts.keep_going_on_failure) {
          failed[i] = static_cast<long>(i);
        } else {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    }
  };
  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int wid = 0; wid < workers; ++wid) pool.emplace_back(worker, wid);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Aggregation order follows session index, not completion order.
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].has_value())
      out.records.push_back(std::move(*results[i]));
    else
      out.failed_sessions.push_back(failed[i]);
  }
  return out;
}

void save_twin_dataset(const TwinDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write twin dataset file: " + path);
  nlohmann::json header = {{"actions", d.actions},
                           {"twin_id", d.twin_id},
                           {"seed", d.seed},
                           {"failed_sessions", d.failed_sessions}};
  out << header.dump() << "\n";
  for (const auto& rec : d.records) {
    nlohmann::json j = {{"x0", rec.x0}, {"steps", rec.steps}};
    out << j.dump() << "\n";
  }
}

TwinDataset load_twin_dataset(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open twin dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("twin dataset file is missing its header");

  TwinDataset d;
  d.schema = schema;
  try {
    const auto header = nlohmann::json::parse(line);
    d.actions = header.at("actions").get<std::vector<int>>();
    d.twin_id = header.value("twin_id", std::string{});
    d.seed = header.value("seed", std::uint64_t{0});
    d.failed_sessions = header.value("failed_sessions", std::vector<long>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad twin dataset header: ") + e.what());
  }

  const std::size_t t = d.actions.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TwinRecord rec;
      rec.x0 = j.at("x0").get<std::vector<double>>();
      rec.steps = j.at("steps").get<std::vector<std::vector<double>>>();
      if (rec.x0.size() != schema.x0_features.size())
        throw ValidationError("x0 feature count mismatch");
      if (rec.steps.size() != t) throw ValidationError("step count does not match the action tag");
      for (const auto& x : rec.steps)
        if (x.size() != schema.step_features.size())
          throw ValidationError("step feature count mismatch");
      d.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw ValidationError("twin dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return d;
}

}  // namespace twincheck
