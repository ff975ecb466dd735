// GIF reading (frame counting plus LZW decoding of the first frame) and a
// minimal writer. Kept separate from the library-backed codecs.

#include "gif_codec.h"

#include <algorithm>

#include <array>

namespace mmkg::ingest::gif {

namespace {

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t U8() {
    Need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t U16() {
    Need(2);
    auto lo = static_cast<std::uint8_t>(bytes_[pos_]);
    auto hi = static_cast<std::uint8_t>(bytes_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::string_view Take(size_t n) {
    Need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  // Concatenates data sub-blocks up to the zero-length terminator.
  std::string SubBlocks() {
    std::string out;
    while (true) {
      std::uint8_t len = U8();
      if (len == 0) return out;
      out.append(Take(len));
    }
  }
  void SkipSubBlocks() {
    while (true) {
      std::uint8_t len = U8();
      if (len == 0) return;
      Take(len);
    }
  }

 private:
  void Need(size_t n) const {
    if (bytes_.size() - pos_ < n) throw DecodeError("GIF data truncated");
  }

  std::string_view bytes_;
  size_t pos_ = 0;
};

using Palette = std::vector<std::array<std::uint8_t, 3>>;

Palette ReadPalette(Reader& r, int bits) {
  Palette p(static_cast<size_t>(1) << bits);
  for (auto& c : p) {
    c[0] = r.U8();
    c[1] = r.U8();
    c[2] = r.U8();
  }
  return p;
}

// Decodes `pixel_count` palette indices from LZW data.
std::vector<std::uint8_t> LzwDecode(std::string_view data, int min_code_size, size_t pixel_count) {
  if (min_code_size < 2 || min_code_size > 8) throw DecodeError("GIF: bad LZW code size");
  const int clear = 1 << min_code_size;
  const int eoi = clear + 1;
  std::array<std::uint16_t, 4096> prefix{};
  std::array<std::uint8_t, 4096> suffix{};
  std::array<std::uint8_t, 4096> first{};
  std::array<std::uint16_t, 4096> length{};
  for (int i = 0; i < clear; ++i) {
    suffix[i] = static_cast<std::uint8_t>(i);
    first[i] = static_cast<std::uint8_t>(i);
    length[i] = 1;
  }

  std::vector<std::uint8_t> out;
  out.reserve(pixel_count);
  int code_size = min_code_size + 1;
  int next = clear + 2;
  int prev = -1;
  size_t bit = 0;
  const size_t total_bits = data.size() * 8;

  auto emit = [&](int code) {
    const size_t start = out.size();
    out.resize(start + length[code]);
    for (int c = code, i = length[code] - 1; i >= 0; --i) {
      out[start + i] = suffix[c];
      c = prefix[c];
    }
  };

  while (out.size() < pixel_count) {
    if (bit + code_size > total_bits) throw DecodeError("GIF: image data truncated");
    int code = 0;
    for (int i = 0; i < code_size; ++i, ++bit) {
      code |= ((static_cast<std::uint8_t>(data[bit >> 3]) >> (bit & 7)) & 1) << i;
    }
    if (code == clear) {
      code_size = min_code_size + 1;
      next = clear + 2;
      prev = -1;
      continue;
    }
    if (code == eoi) break;
    if (prev == -1) {
      if (code >= clear) throw DecodeError("GIF: invalid first LZW code");
      emit(code);
      prev = code;
      continue;
    }
    std::uint8_t k;
    if (code < next) {
      k = first[code];
      emit(code);
    } else if (code == next) {
      k = first[prev];
      emit(prev);
      out.push_back(k);
    } else {
      throw DecodeError("GIF: LZW code out of range");
    }
    if (next < 4096) {
      prefix[next] = static_cast<std::uint16_t>(prev);
      suffix[next] = k;
      first[next] = first[prev];
      length[next] = static_cast<std::uint16_t>(length[prev] + 1);
      ++next;
      if (next == (1 << code_size) && code_size < 12) ++code_size;
    }
    prev = code;
  }
  if (out.size() < pixel_count) throw DecodeError("GIF: image data ends early");
  out.resize(pixel_count);
  return out;
}

}  // namespace

Parsed Parse(std::string_view bytes, bool decode_first_frame) {
  Reader r(bytes);
  std::string_view sig = r.Take(6);
  if (sig != "GIF87a" && sig != "GIF89a") throw DecodeError("not a GIF");
  Parsed parsed;
  parsed.width = r.U16();
  parsed.height = r.U16();
  if (parsed.width == 0 || parsed.height == 0) throw DecodeError("GIF: zero dimension");
  const std::uint8_t flags = r.U8();
  const std::uint8_t background = r.U8();
  r.U8();  // pixel aspect ratio
  Palette global;
  if (flags & 0x80) global = ReadPalette(r, (flags & 0x07) + 1);

  while (true) {
    const std::uint8_t tag = r.U8();
    if (tag == 0x3B) break;  // trailer
    if (tag == 0x21) {       // extension
      r.U8();
      r.SkipSubBlocks();
      continue;
    }
    if (tag != 0x2C) throw DecodeError("GIF: unexpected block");
    const int left = r.U16();
    const int top = r.U16();
    const int w = r.U16();
    const int h = r.U16();
    const std::uint8_t image_flags = r.U8();
    Palette local;
    if (image_flags & 0x80) local = ReadPalette(r, (image_flags & 0x07) + 1);
    const int min_code_size = r.U8();
    std::string data = r.SubBlocks();
    ++parsed.frame_count;

    if (parsed.frame_count == 1) {
      // LZW data is always decoded once so truncated first frames are caught.
      const Palette& palette = local.empty() ? global : local;
      if (palette.empty()) throw DecodeError("GIF: no color table");
      std::vector<std::uint8_t> indices =
          LzwDecode(data, min_code_size, static_cast<size_t>(w) * h);
      if (decode_first_frame) {
        RgbImage canvas(parsed.width, parsed.height);
        if (!global.empty() && background < global.size()) {
          for (int y = 0; y < parsed.height; ++y) {
            for (int x = 0; x < parsed.width; ++x) {
              std::copy(global[background].begin(), global[background].end(), canvas.at(x, y));
            }
          }
        }
        // Interlaced rows arrive in four passes.
        std::vector<int> row_order;
        if (image_flags & 0x40) {
          for (int y = 0; y < h; y += 8) row_order.push_back(y);
          for (int y = 4; y < h; y += 8) row_order.push_back(y);
          for (int y = 2; y < h; y += 4) row_order.push_back(y);
          for (int y = 1; y < h; y += 2) row_order.push_back(y);
        } else {
          for (int y = 0; y < h; ++y) row_order.push_back(y);
        }
        for (int i = 0; i < h; ++i) {
          const int y = top + row_order[i];
          if (y >= parsed.height) continue;
          for (int x = 0; x < w; ++x) {
            if (left + x >= parsed.width) break;
            const std::uint8_t idx = indices[static_cast<size_t>(i) * w + x];
            if (idx >= palette.size()) throw DecodeError("GIF: palette index out of range");
            std::copy(palette[idx].begin(), palette[idx].end(), canvas.at(left + x, y));
          }
        }
        parsed.first_frame = std::move(canvas);
      }
    }
  }
  if (parsed.frame_count == 0) throw DecodeError("GIF: no image data");
  return parsed;
}

std::string Encode(std::span<const RgbImage> frames) {
  if (frames.empty()) throw std::invalid_argument("GIF needs at least one frame");
  const int w = frames[0].width, h = frames[0].height;
  std::string out = "GIF89a";
  auto u16 = [&](int v) {
    out += static_cast<char>(v & 0xFF);
    out += static_cast<char>((v >> 8) & 0xFF);
  };
  u16(w);
  u16(h);
  out += static_cast<char>(0xF7);  // global table, 8-bit color, 256 entries
  out += '\0';
  out += '\0';
  for (int i = 0; i < 256; ++i) {
    // 3-3-2 palette
    out += static_cast<char>(((i >> 5) & 7) * 255 / 7);
    out += static_cast<char>(((i >> 2) & 7) * 255 / 7);
    out += static_cast<char>((i & 3) * 255 / 3);
  }
  if (frames.size() > 1) {
    out += "\x21\xFF\x0BNETSCAPE2.0\x03\x01";
    u16(0);
    out += '\0';
  }
  for (const RgbImage& f : frames) {
    if (f.width != w || f.height != h) throw std::invalid_argument("GIF frames differ in size");
    out += "\x21\xF9\x04";  // graphic control: 10 cs delay
    out += '\0';
    u16(10);
    out += '\0';
    out += '\0';
    out += '\x2C';
    u16(0);
    u16(0);
    u16(w);
    u16(h);
    out += '\0';
    out += '\x08';  // LZW min code size
    // 9-bit codes with a clear code every 254 literals keep the code size
    // fixed, which is valid (if uncompressed) LZW.
    std::string data;
    std::uint32_t acc = 0;
    int nbits = 0;
    auto put = [&](int code) {
      acc |= static_cast<std::uint32_t>(code) << nbits;
      nbits += 9;
      while (nbits >= 8) {
        data += static_cast<char>(acc & 0xFF);
        acc >>= 8;
        nbits -= 8;
      }
    };
    put(256);
    int run = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::uint8_t* p = f.at(x, y);
        put(((p[0] >> 5) << 5) | ((p[1] >> 5) << 2) | (p[2] >> 6));
        if (++run == 254) {
          put(256);
          run = 0;
        }
      }
    }
    put(257);
    if (nbits > 0) data += static_cast<char>(acc & 0xFF);
    for (size_t i = 0; i < data.size(); i += 255) {
      const size_t n = std::min<size_t>(255, data.size() - i);
      out += static_cast<char>(n);
      out.append(data, i, n);
    }
    out += '\0';
  }
  out += '\x3B';
  return out;
}

}  // namespace mmkg::ingest::gif
