#include "mmkg/service/query_service.h"

#include <cstdlib>
#include <iostream>

#include "httplib.h"
#include "json.hpp"
#include "mmkg/complete/completer.h"
#include "mmkg/ingest/image_codec.h"
#include "mmkg/select/entity_selector.h"
#include "mmkg/sparql/parser.h"
#include "mmkg/util/hash.h"

namespace mmkg::service {

namespace {

using nlohmann::ordered_json;

std::string Trimmed(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

HttpResponse Json(int status, const ordered_json& j) {
  HttpResponse r;
  r.status = status;
  r.content_type = "application/json";
  r.body = j.dump();
  return r;
}

HttpResponse Error(int status, const std::string& message) {
  return Json(status, ordered_json{{"error", message}});
}

ordered_json TermJson(const kg::Term& t) {
  ordered_json j;
  if (t.is_iri()) {
    j["type"] = "uri";
    j["value"] = t.value();
  } else {
    j["type"] = "literal";
    j["value"] = t.value();
    if (!t.language().empty()) j["xml:lang"] = t.language();
    if (!t.datatype().empty()) j["datatype"] = t.datatype();
  }
  return j;
}

std::string MediaType(const std::string& content_type) {
  std::string m = content_type.substr(0, content_type.find(';'));
  while (!m.empty() && m.back() == ' ') m.pop_back();
  for (char& c : m) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return m;
}

ingest::ImageFormat FormatOfPath(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  for (auto f : {ingest::ImageFormat::kJpeg, ingest::ImageFormat::kPng, ingest::ImageFormat::kGif,
                 ingest::ImageFormat::kWebp, ingest::ImageFormat::kBmp}) {
    if (ext == "." + std::string(ingest::FormatExtension(f))) return f;
  }
  return ingest::ImageFormat::kUnknown;
}

}  // namespace

// ---------------------------------------------------------------- config

void ServiceConfig::ApplyEnvironment() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v) return std::nullopt;
    return std::string(v);
  };
  auto number = [](const std::string& name, const std::string& v) {
    try {
      size_t used = 0;
      const long long n = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw std::invalid_argument(name + " must be an integer, got '" + v + "'");
    }
  };
  if (auto v = env("MMKG_HOST")) host = *v;
  if (auto v = env("MMKG_PORT")) port = static_cast<int>(number("MMKG_PORT", *v));
  if (auto v = env("MMKG_GRAPH")) graph_path = *v;
  if (auto v = env("MMKG_STORE")) store_path = *v;
  if (auto v = env("MMKG_MAX_RESULTS")) {
    const long long n = number("MMKG_MAX_RESULTS", *v);
    if (n < 1) throw std::invalid_argument("MMKG_MAX_RESULTS must be >= 1");
    max_results = static_cast<size_t>(n);
  }
  if (auto v = env("MMKG_TIMEOUT_MS")) {
    request_timeout = std::chrono::milliseconds(number("MMKG_TIMEOUT_MS", *v));
  }
  if (auto v = env("MMKG_MAX_BODY")) max_body_bytes = static_cast<size_t>(number("MMKG_MAX_BODY", *v));
  if (auto v = env("MMKG_CORS_ORIGIN")) cors_origin = *v;
  if (auto v = env("MMKG_BASE_IRI")) base_iri = *v;
}

void ServiceConfig::Validate() const {
  if (max_results < 1) throw std::invalid_argument("max-results must be >= 1");
  if (port < 0 || port > 65535) throw std::invalid_argument("port must be in 0..65535");
  if (request_timeout.count() <= 0) throw std::invalid_argument("request timeout must be positive");
  if (max_body_bytes < 1) throw std::invalid_argument("max body size must be positive");
  kg::ValidateIri(base_iri, "base-iri");
}

std::string ServiceConfig::WithImage() const {
  return with_image_predicate.empty() ? Trimmed(base_iri) + "/p/withImage" : with_image_predicate;
}

std::string ServiceConfig::NamePredicate() const {
  return name_predicate.empty() ? Trimmed(base_iri) + "/p/name" : name_predicate;
}

const std::string* HttpResponse::Header(const std::string& name) const {
  for (const auto& [k, v] : headers) {
    if (k == name) return &v;
  }
  return nullptr;
}

std::string BindingsToJson(const sparql::BindingSet& b) {
  ordered_json j;
  j["head"]["vars"] = b.vars;
  ordered_json rows = ordered_json::array();
  for (const auto& row : b.rows) {
    ordered_json binding = ordered_json::object();
    for (size_t i = 0; i < b.vars.size(); ++i) binding[b.vars[i]] = TermJson(row[i]);
    rows.push_back(std::move(binding));
  }
  j["results"]["bindings"] = std::move(rows);
  return j.dump();
}

// ---------------------------------------------------------------- handlers

struct QueryService::Server {
  httplib::Server http;
};

QueryService::QueryService(ServiceConfig config, kg::Graph graph)
    : config_(std::move(config)), graph_(std::move(graph)), store_(config_.store_path) {
  config_.Validate();
}

QueryService::~QueryService() { Stop(); }

HttpResponse QueryService::HandleSparql(const std::string& method, const std::string& content_type,
                                        const std::string& body,
                                        const std::optional<std::string>& query_param) const {
  if (body.size() > config_.max_body_bytes) return Error(413, "request body too large");
  std::string text;
  if (method == "POST" && MediaType(content_type) == "application/sparql-query") {
    text = body;
  } else if (query_param) {
    text = *query_param;
  } else if (method == "POST" && MediaType(content_type) != "application/x-www-form-urlencoded") {
    return Error(415, "expected application/sparql-query or a form field 'query'");
  } else {
    return Error(400, "missing query");
  }

  sparql::Query q;
  try {
    q = sparql::ParseQuery(text);
  } catch (const sparql::QueryError& e) {
    ordered_json j{{"error", "malformed query"},
                   {"line", e.line()},
                   {"column", e.column()},
                   {"message", e.message()}};
    if (e.unsupported()) j["unsupported"] = e.feature();
    return Json(400, j);
  }
  sparql::EvalOptions opts;
  opts.deadline = std::chrono::steady_clock::now() + config_.request_timeout;
  opts.max_rows = config_.max_results;
  sparql::BindingSet result;
  try {
    result = sparql::Evaluate(q, graph_, opts);
  } catch (const sparql::QueryTimeout&) {
    return Error(504, "query timed out after " + std::to_string(config_.request_timeout.count()) + " ms");
  }
  HttpResponse r;
  r.content_type = "application/sparql-results+json";
  r.body = BindingsToJson(result);
  if (result.truncated) r.headers.emplace_back("X-Results-Truncated", std::to_string(config_.max_results));
  return r;
}

HttpResponse QueryService::HandleImage(const std::string& image_id) const {
  if (!util::IsSha256Hex(image_id)) return Error(400, "malformed image id");
  const auto path = store_.Find(image_id);
  if (!path) return Error(404, "unknown image " + image_id);
  HttpResponse r;
  try {
    r.body = ingest::ReadFileBytes(*path);
  } catch (const ingest::ImageIoError& e) {
    return Error(500, e.what());
  }
  r.content_type = std::string(ingest::ContentTypeFor(FormatOfPath(*path)));
  r.headers.emplace_back("Cache-Control", "public, max-age=31536000, immutable");
  r.headers.emplace_back("ETag", "\"" + image_id + "\"");
  return r;
}

HttpResponse QueryService::HandleEntity(const std::optional<std::string>& iri) const {
  if (!iri || iri->empty()) return Error(400, "missing iri parameter");
  try {
    kg::ValidateIri(*iri, "iri");
  } catch (const kg::ValidationError& e) {
    return Error(400, std::string("invalid iri: ") + e.what());
  }
  const kg::Term entity = kg::Term::Iri(*iri);
  if (!graph_.Mentions(entity)) return Error(404, "no triples mention " + *iri);

  const std::string with_image = config_.WithImage();
  ordered_json images = ordered_json::array();
  ordered_json triples = ordered_json::array();
  for (const kg::Triple& t : graph_.Match(kg::TriplePattern{entity, kg::Variable{"p"}, kg::Variable{"o"}})) {
    if (t.predicate.value() == with_image && t.object.is_iri()) {
      const std::string id = complete::ImageIdFromIri(config_.base_iri, t.object.value());
      images.push_back({{"image-id", id.empty() ? t.object.value() : id},
                        {"iri", t.object.value()},
                        {"url", id.empty() ? t.object.value() : "/image/" + id}});
      continue;
    }
    triples.push_back({{"predicate", t.predicate.value()}, {"object", TermJson(t.object)}});
  }
  ordered_json j;
  j["iri"] = *iri;
  j["name"] = select::ResolveDisplayName(graph_, *iri, config_.NamePredicate());
  j["images"] = std::move(images);
  j["triples"] = std::move(triples);
  return Json(200, j);
}

HttpResponse QueryService::HandleConfig() const {
  ordered_json j;
  j["base_iri"] = config_.base_iri;
  j["image_base"] = complete::ImageIri(config_.base_iri, "");
  j["with_image_predicate"] = config_.WithImage();
  j["name_predicate"] = config_.NamePredicate();
  j["max_results"] = config_.max_results;
  return Json(200, j);
}

// ---------------------------------------------------------------- server

namespace {

thread_local std::chrono::steady_clock::time_point t_request_start;

void Apply(const HttpResponse& from, httplib::Response& to) {
  to.status = from.status;
  for (const auto& [k, v] : from.headers) to.set_header(k, v);
  to.set_content(from.body, from.content_type);
}

}  // namespace

void QueryService::Route() {
  server_ = std::make_unique<Server>();
  httplib::Server& http = server_->http;
  http.set_payload_max_length(config_.max_body_bytes);
  http.set_read_timeout(static_cast<time_t>(std::max<long long>(1, config_.request_timeout.count() / 1000)), 0);

  http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    t_request_start = std::chrono::steady_clock::now();
    if (!config_.cors_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
      res.set_header("Access-Control-Expose-Headers", "X-Results-Truncated");
      if (req.method == "OPTIONS") {
        res.set_header("Access-Control-Allow-Methods", "GET, HEAD, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
  http.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
    if (!log_) return;
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t_request_start)
                        .count();
    *log_ << req.method << ' ' << req.path << ' ' << res.status << ' ' << ms << "ms\n" << std::flush;
  });

  auto sparql = [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> q;
    if (req.has_param("query")) q = req.get_param_value("query");
    Apply(HandleSparql(req.method, req.get_header_value("Content-Type"), req.body, q), res);
  };
  http.Get("/sparql", sparql);
  http.Post("/sparql", sparql);
  http.Get(R"(/image/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    HttpResponse r = HandleImage(req.matches[1]);
    const std::string* etag = r.Header("ETag");
    if (r.status == 200 && etag && req.get_header_value("If-None-Match") == *etag) {
      res.status = 304;
      for (const auto& [k, v] : r.headers) res.set_header(k, v);
      return;
    }
    Apply(r, res);
  });
  http.Get("/entity", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> iri;
    if (req.has_param("iri")) iri = req.get_param_value("iri");
    Apply(HandleEntity(iri), res);
  });
  http.Get("/config", [this](const httplib::Request&, httplib::Response& res) { Apply(HandleConfig(), res); });
}

int QueryService::Bind() {
  if (!server_) Route();
  int port = config_.port;
  if (port == 0) {
    port = server_->http.bind_to_any_port(config_.host);
  } else if (!server_->http.bind_to_port(config_.host, port)) {
    port = -1;
  }
  if (port < 0) throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  return port;
}

void QueryService::Serve() {
  if (!server_) throw std::logic_error("Serve() called before Bind()");
  server_->http.listen_after_bind();
}

void QueryService::Stop() {
  if (server_) server_->http.stop();
}

}  // namespace mmkg::service
