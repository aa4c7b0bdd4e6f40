#pragma once

// Obstacle-based grid navigation: 5x5 grid, start top-left, goal bottom-right.
// Level 2 adds a vertical 3-cell obstacle in the middle column; level 3 adds
// a horizontal 3-cell obstacle through the middle row (crossing at the
// center). Fully observable frames. Reaching the goal in the minimum number
// of steps advances the level.

#include "nca/envs/env.hpp"

namespace nca {

class GridEnv : public Env {
 public:
  static constexpr int kSize = 5;
  static constexpr int kMaxSteps = 50;
  static constexpr int kLevels = 3;
  enum Action { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

  explicit GridEnv(int lock_level = kLevels);

  Frame reset() override;
  StepResult step(int action) override;
  bool done() const override { return done_; }

  int num_actions() const override { return 4; }
  int num_levels() const override { return kLevels; }
  int lock_level() const override { return lock_; }
  void set_lock_level(int level) override;
  double solve_threshold(int level) const override;

  std::unique_ptr<Env> clone() const override { return std::make_unique<GridEnv>(*this); }
  uint64_t state_key() const override;
  std::string id() const override { return "grid"; }
  std::vector<Frame> frame_dictionary() const override;
  void set_render(bool on) override { render_ = on; }

  int row() const { return row_; }
  int col() const { return col_; }
  int level() const { return level_; }
  int min_steps(int level) const { return min_steps_[level - 1]; }

  static std::vector<std::pair<int, int>> obstacles(int level);
  static bool blocked(int level, int r, int c);

 private:
  Frame observe() const;
  static int bfs_distance(int level);

  int lock_ = kLevels;
  int row_ = 0, col_ = 0;
  int level_ = 1;
  int steps_in_level_ = 0;
  int total_steps_ = 0;
  bool done_ = false;
  bool render_ = true;
  int min_steps_[kLevels];
};

}  // namespace nca
