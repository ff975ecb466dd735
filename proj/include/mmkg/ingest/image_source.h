#ifndef MMKG_INGEST_IMAGE_SOURCE_H_
#define MMKG_INGEST_IMAGE_SOURCE_H_

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmkg/select/entity_selector.h"

namespace mmkg::ingest {

// The whole source is unreachable; the run should stop and checkpoint.
class SourceUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A retryable failure (timeouts, 5xx, interrupted reads).
class TransientFetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The individual image does not exist (404); skipped without retry.
class ImageNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A ranked image search backend.
class ImageSource {
 public:
  virtual ~ImageSource() = default;

  virtual std::string id() const = 0;
  // Candidate locators for an entity, most relevant first.
  virtual std::vector<std::string> ListCandidates(const select::EntityRecord& entity) = 0;
  virtual std::string Fetch(const std::string& locator) = 0;
};

// Directory name used for an entity: the percent-encoded IRI local name.
std::string EntityDirectoryName(const std::string& entity_iri);

// Serves `<root>/<EntityDirectoryName(iri)>/*`, ranked by file name.
// Locators are paths relative to `root`.
class LocalDirectorySource : public ImageSource {
 public:
  explicit LocalDirectorySource(std::filesystem::path root);

  std::string id() const override;
  std::vector<std::string> ListCandidates(const select::EntityRecord& entity) override;
  std::string Fetch(const std::string& locator) override;

 private:
  std::filesystem::path root_;
};

// Generic HTTP backend. `GET <base>/list?entity=<iri>` returns one image URL
// per line (absolute, or a path on the same server) in rank order; each URL
// is then fetched with GET. A 404 from /list means "no results".
class HttpListSource : public ImageSource {
 public:
  explicit HttpListSource(std::string base_url, int timeout_seconds = 10);
  ~HttpListSource() override;

  std::string id() const override;
  std::vector<std::string> ListCandidates(const select::EntityRecord& entity) override;
  std::string Fetch(const std::string& locator) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "dir:<path>" or "http://..." / "https://...".
std::unique_ptr<ImageSource> MakeImageSource(const std::string& spec);

}  // namespace mmkg::ingest

#endif  // MMKG_INGEST_IMAGE_SOURCE_H_
