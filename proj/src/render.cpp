#include "nca/render.hpp"

namespace nca {

namespace {

// segment bits: 0 top, 1 top-right, 2 bottom-right, 3 bottom, 4 bottom-left,
// 5 top-left, 6 middle
constexpr uint8_t kSegments[10] = {
    0b0111111,  // 0
    0b0000110,  // 1
    0b1011011,  // 2
    0b1001111,  // 3
    0b1100110,  // 4
    0b1101101,  // 5
    0b1111101,  // 6
    0b0000111,  // 7
    0b1111111,  // 8
    0b1101111,  // 9
};

void fill_rect(Frame& f, int y0, int x0, int h, int w, float v) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x)
      if (y >= 0 && y < f.rows() && x >= 0 && x < f.cols()) f(y, x) = v;
}

// glyph box 22 wide, 38 tall, stroke 4
void draw_digit(Frame& f, int digit, int y0, int x0) {
  const int w = 22, h = 38, t = 4;
  const uint8_t seg = kSegments[digit];
  const int mid = y0 + (h - t) / 2;
  if (seg & 0b0000001) fill_rect(f, y0, x0 + t, t, w - 2 * t, 1.0f);            // top
  if (seg & 0b0000010) fill_rect(f, y0 + t, x0 + w - t, mid - y0 - t, t, 1.0f); // top-right
  if (seg & 0b0000100) fill_rect(f, mid + t, x0 + w - t, y0 + h - mid - 2 * t, t, 1.0f);
  if (seg & 0b0001000) fill_rect(f, y0 + h - t, x0 + t, t, w - 2 * t, 1.0f);    // bottom
  if (seg & 0b0010000) fill_rect(f, mid + t, x0, y0 + h - mid - 2 * t, t, 1.0f);
  if (seg & 0b0100000) fill_rect(f, y0 + t, x0, mid - y0 - t, t, 1.0f);         // top-left
  if (seg & 0b1000000) fill_rect(f, mid, x0 + t, t, w - 2 * t, 1.0f);           // middle
}

constexpr int kTinyW = 3, kTinyH = 5;

// 3x5 bitmaps, rows top to bottom, 3 bits each
uint16_t tiny_glyph(char c) {
  switch (c) {
    case '0': return 0b111101101101111;
    case '1': return 0b010110010010111;
    case '2': return 0b111001111100111;
    case '3': return 0b111001111001111;
    case '4': return 0b101101111001001;
    case '5': return 0b111100111001111;
    case '6': return 0b111100111101111;
    case '7': return 0b111001010010010;
    case '8': return 0b111101111101111;
    case '9': return 0b111101111001111;
    case '.': return 0b000000000000010;
    case '-': return 0b000000111000000;
    case '+': return 0b000010111010000;
    case '=': return 0b000111000111000;
    case 'r': return 0b000000110101100;
    case 'd': return 0b001001111101111;
    case 'e': return 0b000111111100111;
    default: return 0;
  }
}

}  // namespace

Frame render_number_frame(int value) {
  Frame f = Frame::Zero(kFrameSize, kFrameSize);
  const int y0 = 13;
  if (value < 10) {
    draw_digit(f, value, y0, 21);
  } else {
    draw_digit(f, value / 10, y0, 8);
    draw_digit(f, value % 10, y0, 34);
  }
  return f;
}

Frame render_grid_frame(int agent_row, int agent_col, int goal_row, int goal_col,
                        const std::vector<std::pair<int, int>>& obstacles) {
  Frame f = Frame::Zero(kFrameSize, kFrameSize);
  const int cell = 12, stride = 13;  // 5*12 + 4 border lines = 64
  for (int k = 1; k < 5; ++k) {
    fill_rect(f, k * stride - 1, 0, 1, kFrameSize, 0.2f);
    fill_rect(f, 0, k * stride - 1, kFrameSize, 1, 0.2f);
  }
  auto paint = [&](int r, int c, float v) { fill_rect(f, r * stride, c * stride, cell, cell, v); };
  for (auto [r, c] : obstacles) paint(r, c, 0.4f);
  paint(goal_row, goal_col, 0.7f);
  paint(agent_row, agent_col, 1.0f);
  return f;
}

void draw_tiny_text(Frame& canvas, int x, int y, const std::string& text, float intensity) {
  for (char c : text) {
    const uint16_t bits = tiny_glyph(c);
    for (int r = 0; r < kTinyH; ++r)
      for (int col = 0; col < kTinyW; ++col)
        if (bits >> ((kTinyH - 1 - r) * kTinyW + (kTinyW - 1 - col)) & 1) {
          int yy = y + r, xx = x + col;
          if (yy >= 0 && yy < canvas.rows() && xx >= 0 && xx < canvas.cols())
            canvas(yy, xx) = intensity;
        }
    x += kTinyW + 1;
  }
}

}  // namespace nca
