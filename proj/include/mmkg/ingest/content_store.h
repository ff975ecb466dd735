#ifndef MMKG_INGEST_CONTENT_STORE_H_
#define MMKG_INGEST_CONTENT_STORE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mmkg/ingest/manifest.h"

namespace mmkg::ingest {

// Content-addressed image store laid out as `<root>/<first-2-hex>/<hash>.<ext>`.
// Writes are idempotent: storing identical bytes twice yields one file.
class ContentStore {
 public:
  explicit ContentStore(std::filesystem::path root);

  struct Stored {
    std::string image_id;
    std::string relative_path;  // "<2-hex>/<hash>.<ext>"
    ImageFormat format = ImageFormat::kUnknown;
  };

  // Hashes, sniffs and writes `bytes` (atomically, via rename).
  Stored Put(std::string_view bytes);

  // Locates a stored file by id regardless of extension.
  std::optional<std::filesystem::path> Find(std::string_view image_id) const;
  std::filesystem::path Resolve(const std::string& relative_path) const { return root_ / relative_path; }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

std::string_view ContentTypeFor(ImageFormat format);

}  // namespace mmkg::ingest

#endif  // MMKG_INGEST_CONTENT_STORE_H_
