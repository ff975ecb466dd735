#ifndef MMKG_INGEST_INGESTOR_H_
#define MMKG_INGEST_INGESTOR_H_

#include <chrono>
#include <span>
#include <stdexcept>
#include <string>

#include "mmkg/ingest/content_store.h"
#include "mmkg/ingest/image_source.h"
#include "mmkg/ingest/manifest.h"
#include "mmkg/select/entity_selector.h"

namespace mmkg::ingest {

struct FetchOptions {
  int cap = kDefaultImageCap;  // 1..30
  int workers = 1;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};  // doubles per retry
  // When non-empty, progress is saved here if the source becomes
  // unreachable, and reloaded by the next call.
  std::string checkpoint_path;
};

// Raised after the checkpoint has been written.
class FetchAborted : public std::runtime_error {
 public:
  FetchAborted(const std::string& message, size_t completed)
      : std::runtime_error(message), completed_entities_(completed) {}
  size_t completed_entities() const { return completed_entities_; }

 private:
  size_t completed_entities_;
};

// Fetches the first min(cap, available) candidates of every entity into the
// store. An entity selected for several domains is fetched once; its
// records carry the comma-joined domain list. Images that still fail after
// retries are recorded as absent in the run metadata, never as rejected.
Manifest FetchImages(std::span<const select::EntityRecord> entities, ImageSource& source,
                     ContentStore& store, const FetchOptions& options = {});

struct ValidationSummary {
  size_t ok = 0;
  size_t corrupt = 0;
  size_t animated = 0;
};

// Checks every not-yet-validated record's stored file, fills in format and
// dimensions, and moves corrupt or animated images to their rejected status.
ValidationSummary ValidateManifest(Manifest& manifest, const ContentStore& store);

}  // namespace mmkg::ingest

#endif  // MMKG_INGEST_INGESTOR_H_
