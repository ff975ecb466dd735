#ifndef MMKG_INGEST_IMAGE_CODEC_H_
#define MMKG_INGEST_IMAGE_CODEC_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmkg/ingest/manifest.h"

namespace mmkg::ingest {

// 8-bit RGB, rows top to bottom, 3 bytes per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<size_t>(y) * width + x) * 3];
  }
};

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The file exists but could not be read (permissions, not a regular file).
class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ImageVerdict { kOk, kCorrupt, kAnimated };

struct ImageCheck {
  ImageVerdict verdict = ImageVerdict::kCorrupt;
  ImageFormat format = ImageFormat::kUnknown;
  int width = 0;
  int height = 0;
  std::string reason;  // why the file is corrupt or animated
};

// Format by magic number.
ImageFormat SniffFormat(std::string_view bytes);

// Decodes the header and first frame. Multi-frame GIFs, APNGs with more than
// one frame and WebPs with the animation flag are animated; truncated or
// undecodable data is corrupt. WebP is checked structurally (chunk layout,
// frame header) since no WebP decoder is linked.
ImageCheck CheckImageBytes(std::string_view bytes);
ImageCheck ValidateImage(const std::filesystem::path& path);

// First frame as RGB. Throws DecodeError. WebP is not decodable.
RgbImage DecodeImage(std::string_view bytes);

// Reads a whole file; throws ImageIoError when it cannot.
std::string ReadFileBytes(const std::filesystem::path& path);

// Encoders used by the synthetic corpus and by test fixtures. Output is a
// deterministic function of the pixels.
std::string EncodePng(const RgbImage& image);
std::string EncodeJpeg(const RgbImage& image, int quality = 90);
std::string EncodeBmp(const RgbImage& image);
// One frame per image (all the same size), colors quantized to a fixed
// 3-3-2 palette.
std::string EncodeGif(std::span<const RgbImage> frames);

}  // namespace mmkg::ingest

#endif  // MMKG_INGEST_IMAGE_CODEC_H_
