#pragma once

// Frame rasterization for the environments and collages: 7-segment style
// tile numbers, grid cells, and a tiny caption font for figure labels.

#include <string>

#include "nca/frame.hpp"

namespace nca {

// 64x64 frame showing the tile number (0..99), white on black
Frame render_number_frame(int value);

// 5x5 grid into 64x64: 12px cells separated by 1px border lines.
// intensities: empty 0.0, border 0.2, obstacle 0.4, goal 0.7, agent 1.0
Frame render_grid_frame(int agent_row, int agent_col, int goal_row, int goal_col,
                        const std::vector<std::pair<int, int>>& obstacles);

// 3x5 caption font; supports digits, '.', '-', '+', '=', 'r', 'd', 'e', space
void draw_tiny_text(Frame& canvas, int x, int y, const std::string& text, float intensity = 1.0f);

}  // namespace nca
