#pragma once

// Common surface for the two pixel environments. Instances are cheap value
// types behind this interface; the oracle explores them by cloning.

#include <memory>
#include <string>

#include "nca/frame.hpp"

namespace nca {

struct StepResult {
  Frame frame;
  float reward = 0;
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;

  virtual Frame reset() = 0;
  virtual StepResult step(int action) = 0;
  virtual bool done() const = 0;

  virtual int num_actions() const = 0;
  virtual int num_levels() const = 0;
  virtual int lock_level() const = 0;
  virtual void set_lock_level(int level) = 0;
  virtual double solve_threshold(int level) const = 0;

  virtual std::unique_ptr<Env> clone() const = 0;
  virtual uint64_t state_key() const = 0;
  virtual std::string id() const = 0;

  // every distinct frame the environment can emit
  virtual std::vector<Frame> frame_dictionary() const = 0;

  // skip rasterization during search
  virtual void set_render(bool on) = 0;
};

std::unique_ptr<Env> make_env(const std::string& id, int lock_level);

// reward-optimal action sequence and its exact cumulative reward, found by
// exhaustive memoized search over the finite state space
struct OracleResult {
  std::vector<int> actions;
  double total_reward = 0;
};

OracleResult env_oracle(const Env& env);

}  // namespace nca
