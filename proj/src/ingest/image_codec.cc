#include "mmkg/ingest/image_codec.h"

#include <jpeglib.h>
#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gif_codec.h"

namespace mmkg::ingest {

namespace {

constexpr int kMaxDimension = 1 << 15;

std::uint32_t Be32(std::string_view b, size_t at) {
  return (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at])) << 24) |
         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at + 3]));
}

std::uint32_t Le32(std::string_view b, size_t at) {
  return static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at])) |
         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at + 3])) << 24);
}

std::uint16_t Le16(std::string_view b, size_t at) {
  return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[at]) |
                                    (static_cast<std::uint8_t>(b[at + 1]) << 8));
}

void CheckDimensions(int w, int h) {
  if (w <= 0 || h <= 0 || w > kMaxDimension || h > kMaxDimension) {
    throw DecodeError("implausible dimensions " + std::to_string(w) + "x" + std::to_string(h));
  }
}

// ---------------------------------------------------------------- PNG

// Number of frames declared by an acTL chunk before the first IDAT, or 1.
std::uint32_t PngFrameCount(std::string_view bytes) {
  size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = Be32(bytes, pos);
    const std::string_view type = bytes.substr(pos + 4, 4);
    if (type == "IDAT") break;
    if (type == "acTL" && len >= 8 && pos + 16 <= bytes.size()) return Be32(bytes, pos + 8);
    if (len > bytes.size()) break;
    pos += 12 + static_cast<size_t>(len);
  }
  return 1;
}

RgbImage DecodePng(std::string_view bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("PNG: " + msg);
  }
  image.format = PNG_FORMAT_RGB;
  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  try {
    CheckDimensions(w, h);
  } catch (...) {
    png_image_free(&image);
    throw;
  }
  RgbImage out(w, h);
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&image, &black, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("PNG: " + msg);
  }
  png_image_free(&image);
  return out;
}

// ---------------------------------------------------------------- JPEG

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
  int warnings;
};

void JpegErrorExit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void JpegEmitMessage(j_common_ptr cinfo, int level) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  if (level < 0) {
    // Corrupt-data warnings (premature end, bad Huffman codes, ...).
    if (err->warnings++ == 0) (*cinfo->err->format_message)(cinfo, err->message);
  }
}

void JpegSilence(j_common_ptr) {}

RgbImage DecodeJpeg(std::string_view bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = JpegErrorExit;
  err.base.emit_message = JpegEmitMessage;
  err.base.output_message = JpegSilence;
  // Everything touched after setjmp lives outside the jump scope.
  RgbImage* volatile result = nullptr;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    delete result;
    throw DecodeError(std::string("JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width), h = static_cast<int>(cinfo.output_height);
  if (w <= 0 || h <= 0 || w > kMaxDimension || h > kMaxDimension ||
      cinfo.output_components != 3) {
    std::snprintf(err.message, sizeof(err.message), "unsupported geometry");
    std::longjmp(err.jump, 1);
  }
  result = new RgbImage(w, h);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = result->at(0, static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  RgbImage out = std::move(*result);
  delete result;
  if (err.warnings > 0) throw DecodeError(std::string("JPEG: ") + err.message);
  return out;
}

// ---------------------------------------------------------------- BMP

RgbImage DecodeBmp(std::string_view b) {
  if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') throw DecodeError("BMP: header truncated");
  const std::uint32_t data_offset = Le32(b, 10);
  const std::uint32_t dib_size = Le32(b, 14);
  if (dib_size < 40 || 14 + dib_size > b.size()) throw DecodeError("BMP: bad info header");
  const auto width = static_cast<std::int32_t>(Le32(b, 18));
  const auto raw_height = static_cast<std::int32_t>(Le32(b, 22));
  const int planes = Le16(b, 26);
  const int bpp = Le16(b, 28);
  const std::uint32_t compression = Le32(b, 30);
  std::uint32_t colors_used = Le32(b, 46);
  const bool top_down = raw_height < 0;
  const int height = top_down ? -raw_height : raw_height;
  CheckDimensions(width, height);
  if (planes != 1) throw DecodeError("BMP: planes != 1");
  if (bpp != 8 && bpp != 24 && bpp != 32) {
    throw DecodeError("BMP: unsupported bit depth " + std::to_string(bpp));
  }
  if (compression != 0 && !(compression == 3 && bpp == 32)) {
    throw DecodeError("BMP: compressed bitmaps are not supported");
  }
  std::vector<std::array<std::uint8_t, 3>> palette;
  if (bpp == 8) {
    if (colors_used == 0) colors_used = 256;
    if (colors_used > 256) throw DecodeError("BMP: palette too large");
    const size_t pal_at = 14 + dib_size;
    if (pal_at + colors_used * 4 > b.size()) throw DecodeError("BMP: palette truncated");
    for (std::uint32_t i = 0; i < colors_used; ++i) {
      const size_t at = pal_at + i * 4;
      palette.push_back({static_cast<std::uint8_t>(b[at + 2]), static_cast<std::uint8_t>(b[at + 1]),
                         static_cast<std::uint8_t>(b[at])});
    }
  }
  const size_t stride = ((static_cast<size_t>(bpp) * width + 31) / 32) * 4;
  if (data_offset > b.size() || stride * height > b.size() - data_offset) {
    throw DecodeError("BMP: pixel data truncated");
  }
  RgbImage out(width, height);
  for (int row = 0; row < height; ++row) {
    const int y = top_down ? row : height - 1 - row;
    const auto* src = reinterpret_cast<const std::uint8_t*>(b.data()) + data_offset + row * stride;
    for (int x = 0; x < width; ++x) {
      std::uint8_t* dst = out.at(x, y);
      if (bpp == 8) {
        if (src[x] >= palette.size()) throw DecodeError("BMP: palette index out of range");
        std::copy(palette[src[x]].begin(), palette[src[x]].end(), dst);
      } else {
        const std::uint8_t* px = src + x * (bpp / 8);
        dst[0] = px[2];
        dst[1] = px[1];
        dst[2] = px[0];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- WebP

struct WebpInfo {
  int width = 0;
  int height = 0;
  bool animated = false;
};

// Structural check of the RIFF container and the first frame header.
WebpInfo InspectWebp(std::string_view b) {
  if (b.size() < 20) throw DecodeError("WebP: header truncated");
  const std::uint32_t riff_size = Le32(b, 4);
  if (static_cast<size_t>(riff_size) + 8 > b.size()) throw DecodeError("WebP: file truncated");
  WebpInfo info;
  bool have_frame = false;
  size_t pos = 12;
  const size_t end = static_cast<size_t>(riff_size) + 8;
  while (pos + 8 <= end) {
    const std::string_view tag = b.substr(pos, 4);
    const std::uint32_t len = Le32(b, pos + 4);
    const size_t body = pos + 8;
    if (body + len > end) throw DecodeError("WebP: chunk overruns file");
    if (tag == "VP8X") {
      if (len < 10) throw DecodeError("WebP: short VP8X chunk");
      const auto flags = static_cast<std::uint8_t>(b[body]);
      info.animated = info.animated || (flags & 0x02) != 0;
      info.width = static_cast<int>((Le32(b, body + 4) & 0xFFFFFF) + 1);
      info.height = static_cast<int>((Le32(b, body + 7) & 0xFFFFFF) + 1);
    } else if (tag == "ANIM" || tag == "ANMF") {
      info.animated = true;
    } else if (tag == "VP8 " && !have_frame) {
      if (len < 10) throw DecodeError("WebP: short VP8 chunk");
      if (static_cast<std::uint8_t>(b[body + 3]) != 0x9D ||
          static_cast<std::uint8_t>(b[body + 4]) != 0x01 ||
          static_cast<std::uint8_t>(b[body + 5]) != 0x2A) {
        throw DecodeError("WebP: bad VP8 start code");
      }
      if (info.width == 0) {
        info.width = Le16(b, body + 6) & 0x3FFF;
        info.height = Le16(b, body + 8) & 0x3FFF;
      }
      have_frame = true;
    } else if (tag == "VP8L" && !have_frame) {
      if (len < 5 || static_cast<std::uint8_t>(b[body]) != 0x2F) {
        throw DecodeError("WebP: bad VP8L signature");
      }
      const std::uint32_t bits = Le32(b, body + 1);
      if (info.width == 0) {
        info.width = static_cast<int>((bits & 0x3FFF) + 1);
        info.height = static_cast<int>(((bits >> 14) & 0x3FFF) + 1);
      }
      have_frame = true;
    }
    pos = body + len + (len & 1);
  }
  if (!have_frame && !info.animated) throw DecodeError("WebP: no image data");
  CheckDimensions(info.width, info.height);
  return info;
}

}  // namespace

ImageFormat SniffFormat(std::string_view b) {
  if (b.size() >= 8 && b.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8)) {
    return ImageFormat::kPng;
  }
  if (b.size() >= 3 && static_cast<std::uint8_t>(b[0]) == 0xFF &&
      static_cast<std::uint8_t>(b[1]) == 0xD8 && static_cast<std::uint8_t>(b[2]) == 0xFF) {
    return ImageFormat::kJpeg;
  }
  if (b.size() >= 6 && (b.substr(0, 6) == "GIF87a" || b.substr(0, 6) == "GIF89a")) {
    return ImageFormat::kGif;
  }
  if (b.size() >= 12 && b.substr(0, 4) == "RIFF" && b.substr(8, 4) == "WEBP") {
    return ImageFormat::kWebp;
  }
  if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return ImageFormat::kBmp;
  return ImageFormat::kUnknown;
}

ImageCheck CheckImageBytes(std::string_view bytes) {
  ImageCheck check;
  check.format = SniffFormat(bytes);
  if (bytes.empty()) {
    check.reason = "empty file";
    return check;
  }
  try {
    switch (check.format) {
      case ImageFormat::kUnknown:
        check.reason = "unrecognized image format";
        return check;
      case ImageFormat::kGif: {
        gif::Parsed parsed = gif::Parse(bytes, false);
        check.width = parsed.width;
        check.height = parsed.height;
        if (parsed.frame_count > 1) {
          check.verdict = ImageVerdict::kAnimated;
          check.reason = std::to_string(parsed.frame_count) + " frames";
          return check;
        }
        break;
      }
      case ImageFormat::kWebp: {
        WebpInfo info = InspectWebp(bytes);
        check.width = info.width;
        check.height = info.height;
        if (info.animated) {
          check.verdict = ImageVerdict::kAnimated;
          check.reason = "animated WebP";
          return check;
        }
        break;
      }
      case ImageFormat::kPng: {
        RgbImage img = DecodePng(bytes);
        check.width = img.width;
        check.height = img.height;
        if (std::uint32_t frames = PngFrameCount(bytes); frames > 1) {
          check.verdict = ImageVerdict::kAnimated;
          check.reason = "APNG with " + std::to_string(frames) + " frames";
          return check;
        }
        break;
      }
      case ImageFormat::kJpeg:
      case ImageFormat::kBmp: {
        RgbImage img = DecodeImage(bytes);
        check.width = img.width;
        check.height = img.height;
        break;
      }
    }
  } catch (const DecodeError& e) {
    check.verdict = ImageVerdict::kCorrupt;
    check.reason = e.what();
    return check;
  }
  check.verdict = ImageVerdict::kOk;
  return check;
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ImageIoError("not a readable regular file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw ImageIoError("read error on " + path.string());
  return buffer.str();
}

ImageCheck ValidateImage(const std::filesystem::path& path) {
  return CheckImageBytes(ReadFileBytes(path));
}

RgbImage DecodeImage(std::string_view bytes) {
  switch (SniffFormat(bytes)) {
    case ImageFormat::kPng:
      return DecodePng(bytes);
    case ImageFormat::kJpeg:
      return DecodeJpeg(bytes);
    case ImageFormat::kBmp:
      return DecodeBmp(bytes);
    case ImageFormat::kGif: {
      gif::Parsed parsed = gif::Parse(bytes, true);
      return std::move(*parsed.first_frame);
    }
    case ImageFormat::kWebp:
      throw DecodeError("WebP pixel decoding is not available in this build");
    case ImageFormat::kUnknown:
      break;
  }
  throw DecodeError("unrecognized image format");
}

std::string EncodePng(const RgbImage& image) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("PNG encode: ") + png.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("PNG encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

std::string EncodeJpeg(const RgbImage& image, int quality) {
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width);
  cinfo.image_height = static_cast<JDIMENSION>(image.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPROW>(image.at(0, static_cast<int>(cinfo.next_scanline)));
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::string out(reinterpret_cast<const char*>(buffer), size);
  std::free(buffer);
  return out;
}

std::string EncodeBmp(const RgbImage& image) {
  const size_t stride = ((24 * static_cast<size_t>(image.width) + 31) / 32) * 4;
  const size_t data_size = stride * image.height;
  std::string out(54 + data_size, '\0');
  auto put32 = [&](size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  };
  out[0] = 'B';
  out[1] = 'M';
  put32(2, static_cast<std::uint32_t>(out.size()));
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<std::uint32_t>(image.width));
  put32(22, static_cast<std::uint32_t>(image.height));
  out[26] = 1;
  out[28] = 24;
  put32(34, static_cast<std::uint32_t>(data_size));
  for (int row = 0; row < image.height; ++row) {
    const int y = image.height - 1 - row;
    for (int x = 0; x < image.width; ++x) {
      const std::uint8_t* p = image.at(x, y);
      const size_t at = 54 + row * stride + x * 3;
      out[at] = static_cast<char>(p[2]);
      out[at + 1] = static_cast<char>(p[1]);
      out[at + 2] = static_cast<char>(p[0]);
    }
  }
  return out;
}

std::string EncodeGif(std::span<const RgbImage> frames) { return gif::Encode(frames); }

}  // namespace mmkg::ingest
