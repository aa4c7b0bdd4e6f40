#pragma once

// Directional path navigation: numbered tiles 0..29 in three levels of ten.
// Partially observable; the frame shows only the current tile number. The
// agent must hit each goal tile (9/19/29) in the minimum number of steps from
// level entry to unlock the next level.

#include "nca/envs/env.hpp"

namespace nca {

class PathEnv : public Env {
 public:
  static constexpr int kMaxSteps = 50;
  static constexpr int kLevels = 3;
  enum Action { kUp = 0, kDown = 1 };

  explicit PathEnv(int lock_level = kLevels);

  Frame reset() override;
  StepResult step(int action) override;
  bool done() const override { return done_; }

  int num_actions() const override { return 2; }
  int num_levels() const override { return kLevels; }
  int lock_level() const override { return lock_; }
  void set_lock_level(int level) override;
  double solve_threshold(int level) const override;

  std::unique_ptr<Env> clone() const override { return std::make_unique<PathEnv>(*this); }
  uint64_t state_key() const override;
  std::string id() const override { return "path"; }
  std::vector<Frame> frame_dictionary() const override;
  void set_render(bool on) override { render_ = on; }

  int tile() const { return tile_; }
  int level() const { return level_; }

  static int goal_tile(int level) { return 10 * level - 1; }
  static int min_steps(int level) { return level == 1 ? 9 : 10; }

 private:
  Frame observe() const;

  int lock_ = kLevels;
  int tile_ = 0;
  int level_ = 1;  // level whose goal is currently ahead
  int steps_in_level_ = 0;
  int total_steps_ = 0;
  bool done_ = false;
  bool render_ = true;
};

}  // namespace nca
