#include "mmkg/ingest/content_store.h"

#include <atomic>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <unistd.h>

#include "mmkg/ingest/image_codec.h"
#include "mmkg/util/hash.h"

namespace mmkg::ingest {

namespace fs = std::filesystem;

ContentStore::ContentStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

ContentStore::Stored ContentStore::Put(std::string_view bytes) {
  Stored stored;
  stored.image_id = util::Sha256Hex(bytes);
  stored.format = SniffFormat(bytes);
  const std::string shard = stored.image_id.substr(0, 2);
  stored.relative_path =
      shard + "/" + stored.image_id + "." + std::string(FormatExtension(stored.format));
  const fs::path target = root_ / stored.relative_path;
  if (fs::exists(target) && fs::file_size(target) == bytes.size()) return stored;

  fs::create_directories(root_ / shard);
  static std::atomic<unsigned> counter{0};
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid()) + "." +
                       std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
  return stored;
}

std::optional<fs::path> ContentStore::Find(std::string_view image_id) const {
  if (!util::IsSha256Hex(image_id)) return std::nullopt;
  const fs::path dir = root_ / std::string(image_id.substr(0, 2));
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return std::nullopt;
  const std::string stem(image_id);
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().stem() == stem && entry.path().extension().string().find(".tmp") ==
                                           std::string::npos) {
      return entry.path();
    }
  }
  return std::nullopt;
}

std::string_view ContentTypeFor(ImageFormat format) {
  switch (format) {
    case ImageFormat::kJpeg: return "image/jpeg";
    case ImageFormat::kPng: return "image/png";
    case ImageFormat::kGif: return "image/gif";
    case ImageFormat::kWebp: return "image/webp";
    case ImageFormat::kBmp: return "image/bmp";
    case ImageFormat::kUnknown: break;
  }
  return "application/octet-stream";
}

}  // namespace mmkg::ingest
