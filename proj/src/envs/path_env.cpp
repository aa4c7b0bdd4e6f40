#include "nca/envs/path_env.hpp"

#include "nca/render.hpp"

namespace nca {

PathEnv::PathEnv(int lock_level) { set_lock_level(lock_level); }

void PathEnv::set_lock_level(int level) {
  require(level >= 1 && level <= kLevels, "path: lock level out of range");
  lock_ = level;
}

double PathEnv::solve_threshold(int level) const {
  require(level >= 1 && level <= kLevels, "path: level out of range");
  return (double)(level + 1);  // +2, +3, +4
}

Frame PathEnv::reset() {
  tile_ = 0;
  level_ = 1;
  steps_in_level_ = 0;
  total_steps_ = 0;
  done_ = false;
  return observe();
}

Frame PathEnv::observe() const {
  return render_ ? render_number_frame(tile_) : Frame();
}

StepResult PathEnv::step(int action) {
  require(!done_, "path: step after episode end");
  require(action == kUp || action == kDown, "path: invalid action " + std::to_string(action));
  ++total_steps_;
  ++steps_in_level_;

  float reward;
  const int goal = goal_tile(level_);
  const int target = tile_ + (action == kUp ? 1 : -1);
  if (target < 0) {
    reward = -1;  // bottom of the path, stay on tile 0
  } else if (action == kUp && tile_ == goal) {
    reward = -1;  // goal tile blocks until unlocked
  } else {
    tile_ = target;
    if (tile_ == goal) {
      if (steps_in_level_ == min_steps(level_)) {
        reward = 10;
        if (level_ == lock_ || level_ == kLevels) {
          done_ = true;
        } else {
          ++level_;
          steps_in_level_ = 0;
        }
      } else {
        reward = 0.1f;
      }
    } else {
      reward = -1;
    }
  }
  if (total_steps_ >= kMaxSteps) done_ = true;
  return {observe(), reward, done_};
}

uint64_t PathEnv::state_key() const {
  return (uint64_t)tile_ | (uint64_t)level_ << 6 | (uint64_t)steps_in_level_ << 9 |
         (uint64_t)total_steps_ << 16 | (uint64_t)done_ << 23;
}

std::vector<Frame> PathEnv::frame_dictionary() const {
  std::vector<Frame> frames;
  for (int t = 0; t < 10 * kLevels; ++t) frames.push_back(render_number_frame(t));
  return frames;
}

}  // namespace nca
