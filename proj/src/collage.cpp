#include "nca/collage.hpp"

#include <cmath>
#include <cstdio>

#include "nca/render.hpp"

namespace nca {

namespace {
constexpr int kGap = 2, kCaption = 8, kRowGap = 6;
}

std::string format_caption(float reward, float done_prob) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "r=%+.1f d=%.2f", reward, done_prob);
  return buf;
}

Frame compose_collage(const std::vector<CollageRow>& rows, int per_row) {
  require(per_row > 0, "collage: per_row must be positive");
  int cell_h = 0, cell_w = 0;
  std::vector<std::pair<int, int>> wrapped;  // (row index, line count)
  for (const auto& row : rows) {
    require(!row.frames.empty(), "collage: empty row");
    for (const auto& f : row.frames) {
      cell_h = std::max(cell_h, (int)f.rows());
      cell_w = std::max(cell_w, (int)f.cols());
    }
  }
  int total_lines = 0;
  for (const auto& row : rows) total_lines += ((int)row.frames.size() + per_row - 1) / per_row;

  const int line_h = kCaption + cell_h + kGap;
  const int width = per_row * (cell_w + kGap) - kGap;
  const int height = total_lines * line_h + ((int)rows.size() - 1) * kRowGap;
  Frame canvas = Frame::Zero(height, width);

  int y = 0;
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.frames.size(); ++i) {
      const int line = (int)i / per_row, col = (int)i % per_row;
      const int fy = y + line * line_h + kCaption;
      const int fx = col * (cell_w + kGap);
      const Frame& f = row.frames[i];
      canvas.block(fy, fx, f.rows(), f.cols()) = f;
      if (i < row.captions.size() && !row.captions[i].empty())
        draw_tiny_text(canvas, fx, fy - kCaption + 1, row.captions[i]);
    }
    y += (((int)row.frames.size() + per_row - 1) / per_row) * line_h + kRowGap;
  }
  return canvas;
}

}  // namespace nca
