#pragma once

// Rollout collages: rows of frames with reward/done captions, for the
// live-vs-simulated comparison figures.

#include <string>

#include "nca/frame.hpp"

namespace nca {

struct CollageRow {
  std::vector<Frame> frames;
  std::vector<std::string> captions;  // one per frame, may be empty
};

// frames wrap at per_row columns; each gets a caption strip above it
Frame compose_collage(const std::vector<CollageRow>& rows, int per_row = 10);

std::string format_caption(float reward, float done_prob);

}  // namespace nca
