#include "nca/envs/grid_env.hpp"

#include <deque>

#include "nca/render.hpp"

namespace nca {

namespace {
constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};
}  // namespace

GridEnv::GridEnv(int lock_level) {
  set_lock_level(lock_level);
  for (int l = 1; l <= kLevels; ++l) min_steps_[l - 1] = bfs_distance(l);
}

void GridEnv::set_lock_level(int level) {
  require(level >= 1 && level <= kLevels, "grid: lock level out of range");
  lock_ = level;
}

double GridEnv::solve_threshold(int level) const {
  require(level >= 1 && level <= kLevels, "grid: level out of range");
  return 9.3 * level;  // +9.3, +18.6, +27.9
}

std::vector<std::pair<int, int>> GridEnv::obstacles(int level) {
  std::vector<std::pair<int, int>> cells;
  if (level >= 2)
    for (int r = 1; r <= 3; ++r) cells.emplace_back(r, 2);
  if (level >= 3)
    for (int c = 1; c <= 3; ++c)
      if (c != 2) cells.emplace_back(2, c);  // (2,2) already present
  return cells;
}

bool GridEnv::blocked(int level, int r, int c) {
  if (level >= 2 && c == 2 && r >= 1 && r <= 3) return true;
  if (level >= 3 && r == 2 && c >= 1 && c <= 3) return true;
  return false;
}

int GridEnv::bfs_distance(int level) {
  std::deque<std::pair<int, int>> queue{{0, 0}};
  int dist[kSize][kSize];
  for (auto& row : dist)
    for (int& d : row) d = -1;
  dist[0][0] = 0;
  while (!queue.empty()) {
    auto [r, c] = queue.front();
    queue.pop_front();
    for (int a = 0; a < 4; ++a) {
      int nr = r + kDr[a], nc = c + kDc[a];
      if (nr < 0 || nr >= kSize || nc < 0 || nc >= kSize || blocked(level, nr, nc) ||
          dist[nr][nc] >= 0)
        continue;
      dist[nr][nc] = dist[r][c] + 1;
      queue.emplace_back(nr, nc);
    }
  }
  require(dist[kSize - 1][kSize - 1] > 0, "grid: goal unreachable");
  return dist[kSize - 1][kSize - 1];
}

Frame GridEnv::reset() {
  row_ = col_ = 0;
  level_ = 1;
  steps_in_level_ = 0;
  total_steps_ = 0;
  done_ = false;
  return observe();
}

Frame GridEnv::observe() const {
  return render_ ? render_grid_frame(row_, col_, kSize - 1, kSize - 1, obstacles(level_)) : Frame();
}

StepResult GridEnv::step(int action) {
  require(!done_, "grid: step after episode end");
  require(action >= 0 && action < 4, "grid: invalid action " + std::to_string(action));
  ++total_steps_;
  ++steps_in_level_;

  float reward;
  const int nr = row_ + kDr[action], nc = col_ + kDc[action];
  if (nr < 0 || nr >= kSize || nc < 0 || nc >= kSize || blocked(level_, nr, nc)) {
    reward = -1;  // out of bounds or into an obstacle, stay put
  } else {
    row_ = nr;
    col_ = nc;
    if (nr == kSize - 1 && nc == kSize - 1) {
      if (steps_in_level_ == min_steps_[level_ - 1]) {
        reward = 10;
        if (level_ == lock_ || level_ == kLevels) {
          done_ = true;
        } else {
          ++level_;
          row_ = col_ = 0;
          steps_in_level_ = 0;
        }
      } else {
        reward = 0.1f;
      }
    } else {
      reward = -0.1f;
    }
  }
  if (total_steps_ >= kMaxSteps) done_ = true;
  return {observe(), reward, done_};
}

uint64_t GridEnv::state_key() const {
  return (uint64_t)(row_ * kSize + col_) | (uint64_t)level_ << 5 |
         (uint64_t)steps_in_level_ << 8 | (uint64_t)total_steps_ << 15 | (uint64_t)done_ << 22;
}

std::vector<Frame> GridEnv::frame_dictionary() const {
  std::vector<Frame> frames;
  for (int l = 1; l <= kLevels; ++l)
    for (int r = 0; r < kSize; ++r)
      for (int c = 0; c < kSize; ++c)
        if (!blocked(l, r, c)) frames.push_back(render_grid_frame(r, c, kSize - 1, kSize - 1, obstacles(l)));
  return frames;
}

}  // namespace nca
