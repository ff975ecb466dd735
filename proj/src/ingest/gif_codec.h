#ifndef MMKG_SRC_INGEST_GIF_CODEC_H_
#define MMKG_SRC_INGEST_GIF_CODEC_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mmkg/ingest/image_codec.h"

namespace mmkg::ingest::gif {

struct Parsed {
  int width = 0;
  int height = 0;
  int frame_count = 0;
  std::optional<RgbImage> first_frame;
};

// Walks every block. Throws DecodeError on malformed or truncated input.
Parsed Parse(std::string_view bytes, bool decode_first_frame);

std::string Encode(std::span<const RgbImage> frames);

}  // namespace mmkg::ingest::gif

#endif  // MMKG_SRC_INGEST_GIF_CODEC_H_
