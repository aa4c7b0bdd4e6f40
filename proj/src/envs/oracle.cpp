#include <limits>
#include <unordered_map>

#include "nca/envs/grid_env.hpp"
#include "nca/envs/path_env.hpp"

namespace nca {

std::unique_ptr<Env> make_env(const std::string& id, int lock_level) {
  if (id == "path") return std::make_unique<PathEnv>(lock_level);
  if (id == "grid") return std::make_unique<GridEnv>(lock_level);
  fail("unknown environment '" + id + "' (expected 'path' or 'grid')");
}

namespace {

double optimal_value(const Env& env, std::unordered_map<uint64_t, double>& memo) {
  if (env.done()) return 0;
  const uint64_t key = env.state_key();
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < env.num_actions(); ++a) {
    auto next = env.clone();
    auto res = next->step(a);
    best = std::max(best, (double)res.reward + optimal_value(*next, memo));
  }
  memo[key] = best;
  return best;
}

}  // namespace

OracleResult env_oracle(const Env& env) {
  auto work = env.clone();
  work->set_render(false);
  std::unordered_map<uint64_t, double> memo;
  OracleResult out;
  out.total_reward = optimal_value(*work, memo);
  while (!work->done()) {
    int best_action = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < work->num_actions(); ++a) {
      auto next = work->clone();
      auto res = next->step(a);
      const double v = (double)res.reward + optimal_value(*next, memo);
      if (v > best) {
        best = v;
        best_action = a;
      }
    }
    out.actions.push_back(best_action);
    work->step(best_action);
  }
  return out;
}

}  // namespace nca
