#ifndef MMKG_SERVICE_QUERY_SERVICE_H_
#define MMKG_SERVICE_QUERY_SERVICE_H_

#include <chrono>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mmkg/ingest/content_store.h"
#include "mmkg/kg/graph.h"
#include "mmkg/sparql/evaluator.h"

namespace mmkg::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string graph_path;
  std::string store_path;
  size_t max_results = 1000;
  std::chrono::milliseconds request_timeout{10000};
  size_t max_body_bytes = 1 << 20;
  std::string cors_origin;  // empty: no CORS headers
  std::string base_iri = "http://mmkb.test";
  std::string with_image_predicate;  // empty: <base>/p/withImage
  std::string name_predicate;        // empty: <base>/p/name

  // MMKG_HOST, MMKG_PORT, MMKG_GRAPH, MMKG_STORE, MMKG_MAX_RESULTS,
  // MMKG_TIMEOUT_MS, MMKG_MAX_BODY, MMKG_CORS_ORIGIN, MMKG_BASE_IRI.
  void ApplyEnvironment();
  // Throws std::invalid_argument.
  void Validate() const;

  std::string WithImage() const;
  std::string NamePredicate() const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;

  const std::string* Header(const std::string& name) const;
};

// SPARQL 1.1 JSON results.
std::string BindingsToJson(const sparql::BindingSet& bindings);

class QueryService {
 public:
  QueryService(ServiceConfig config, kg::Graph graph);
  ~QueryService();

  // `content_type` and `body` come from a POST; `query_param` from the URL
  // or a form body.
  HttpResponse HandleSparql(const std::string& method, const std::string& content_type,
                            const std::string& body,
                            const std::optional<std::string>& query_param) const;
  HttpResponse HandleImage(const std::string& image_id) const;
  HttpResponse HandleEntity(const std::optional<std::string>& iri) const;
  HttpResponse HandleConfig() const;

  // Binds the listening socket and returns the port.
  int Bind();
  // Serves until Stop(). Requires Bind().
  void Serve();
  void Stop();

  void set_request_log(std::ostream* out) { log_ = out; }
  const ServiceConfig& config() const { return config_; }
  const kg::Graph& graph() const { return graph_; }

 private:
  struct Server;
  void Route();

  ServiceConfig config_;
  kg::Graph graph_;
  ingest::ContentStore store_;
  std::unique_ptr<Server> server_;
  std::ostream* log_ = nullptr;
};

}  // namespace mmkg::service

#endif  // MMKG_SERVICE_QUERY_SERVICE_H_
