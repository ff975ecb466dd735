#include "mmkg/ingest/image_source.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "mmkg/ingest/image_codec.h"

namespace mmkg::ingest {

namespace fs = std::filesystem;

std::string EntityDirectoryName(const std::string& entity_iri) {
  std::string_view local = kg::IriLocalName(entity_iri);
  std::string out;
  for (unsigned char c : local) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '-' || c == '_' || c == '.';
    if (safe && !(out.empty() && c == '.')) {
      out += static_cast<char>(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

// ---------------------------------------------------------------- local

LocalDirectorySource::LocalDirectorySource(fs::path root) : root_(std::move(root)) {}

std::string LocalDirectorySource::id() const { return "dir:" + root_.string(); }

std::vector<std::string> LocalDirectorySource::ListCandidates(const select::EntityRecord& entity) {
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) {
    throw SourceUnavailable("image directory " + root_.string() + " is not available");
  }
  const std::string dir = EntityDirectoryName(entity.iri);
  const fs::path entity_dir = root_ / dir;
  std::vector<std::string> names;
  if (!fs::is_directory(entity_dir, ec)) return names;
  for (const auto& entry : fs::directory_iterator(entity_dir, ec)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  for (std::string& n : names) n = dir + "/" + n;
  return names;
}

std::string LocalDirectorySource::Fetch(const std::string& locator) {
  const fs::path path = root_ / locator;
  std::error_code ec;
  if (!fs::exists(path, ec)) throw ImageNotFound(locator);
  try {
    return ReadFileBytes(path);
  } catch (const ImageIoError& e) {
    throw TransientFetchError(e.what());
  }
}

// ---------------------------------------------------------------- http

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

SplitUrl Split(const std::string& url) {
  const size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("not an absolute URL: " + url);
  const size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

struct HttpListSource::Impl {
  std::string base_url;
  SplitUrl base;
  int timeout_seconds;

  httplib::Result Get(const std::string& origin, const std::string& path) {
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_follow_location(true);
    return client.Get(path);
  }
};

HttpListSource::HttpListSource(std::string base_url, int timeout_seconds)
    : impl_(std::make_unique<Impl>()) {
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
  if (base_url.rfind("http://", 0) != 0) {
    throw std::invalid_argument("HTTP image source needs an http:// base URL");
  }
  impl_->base = Split(base_url);
  impl_->base_url = std::move(base_url);
  impl_->timeout_seconds = timeout_seconds;
}

HttpListSource::~HttpListSource() = default;

std::string HttpListSource::id() const { return "http:" + impl_->base_url; }

std::vector<std::string> HttpListSource::ListCandidates(const select::EntityRecord& entity) {
  std::string prefix = impl_->base.path == "/" ? "" : impl_->base.path;
  const std::string path =
      prefix + "/list?entity=" + httplib::detail::encode_query_param(entity.iri);
  auto res = impl_->Get(impl_->base.origin, path);
  if (!res) {
    throw SourceUnavailable("image source " + impl_->base_url +
                            " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status == 404) return {};
  if (res->status >= 500) throw TransientFetchError("list returned " + std::to_string(res->status));
  if (res->status != 200) {
    throw SourceUnavailable("list for " + entity.iri + " returned HTTP " +
                            std::to_string(res->status));
  }
  std::vector<std::string> urls;
  std::istringstream lines(res->body);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '/') line = impl_->base.origin + line;
    urls.push_back(line);
  }
  return urls;
}

std::string HttpListSource::Fetch(const std::string& locator) {
  SplitUrl url = Split(locator);
  auto res = impl_->Get(url.origin, url.path);
  if (!res) throw TransientFetchError(locator + ": " + httplib::to_string(res.error()));
  if (res->status == 404 || res->status == 410) throw ImageNotFound(locator);
  if (res->status != 200) {
    throw TransientFetchError(locator + ": HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::unique_ptr<ImageSource> MakeImageSource(const std::string& spec) {
  if (spec.rfind("dir:", 0) == 0) return std::make_unique<LocalDirectorySource>(spec.substr(4));
  if (spec.rfind("http://", 0) == 0) return std::make_unique<HttpListSource>(spec);
  if (spec.rfind("https://", 0) == 0) {
    throw std::invalid_argument("https sources are not supported; use http:// or dir:");
  }
  throw std::invalid_argument("unknown image source '" + spec +
                              "' (expected dir:<path> or http://...)");
}

}  // namespace mmkg::ingest
