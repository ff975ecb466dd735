#include "mmkg/complete/completer.h"

#include <cstdio>
#include <set>
#include <stdexcept>

namespace mmkg::complete {

namespace {

constexpr char kXsd[] = "http://www.w3.org/2001/XMLSchema#";

std::string Trimmed(std::string base) {
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base;
}

}  // namespace

std::string CompletionOptions::WithImage() const {
  return with_image_predicate.empty() ? Trimmed(base_iri) + "/p/withImage" : with_image_predicate;
}
std::string CompletionOptions::Score() const {
  return score_predicate.empty() ? Trimmed(base_iri) + "/p/anomalyScore" : score_predicate;
}
std::string CompletionOptions::Rank() const {
  return rank_predicate.empty() ? Trimmed(base_iri) + "/p/searchRank" : rank_predicate;
}

std::string ImageIri(const std::string& base_iri, const std::string& image_id) {
  return Trimmed(base_iri) + "/image/" + image_id;
}

std::string ImageIdFromIri(const std::string& base_iri, const std::string& iri) {
  const std::string prefix = Trimmed(base_iri) + "/image/";
  if (iri.size() <= prefix.size() || iri.compare(0, prefix.size(), prefix) != 0) return {};
  return iri.substr(prefix.size());
}

CompletionResult CompleteTriples(const ingest::Manifest& manifest, kg::Graph& graph,
                                 const CompletionOptions& options) {
  for (const ingest::ImageRecord& r : manifest.records) {
    if (r.status == ingest::ImageStatus::kFetched) {
      throw std::invalid_argument("manifest is not finalized: image " + r.image_id +
                                  " is still 'fetched'");
    }
  }
  const kg::Term predicate = kg::Term::Iri(options.WithImage());
  CompletionResult result;
  std::set<std::string> warned;
  for (const ingest::ImageRecord& r : manifest.records) {
    if (r.status != ingest::ImageStatus::kRetained) continue;
    const kg::Term entity = kg::Term::Iri(r.entity_iri);
    if (!graph.Mentions(entity) && warned.insert(r.entity_iri).second) {
      result.warnings.push_back("entity " + r.entity_iri + " is not in the graph; adding its images anyway");
    }
    const kg::Triple t =
        kg::Triple::Make(entity, predicate, kg::Term::Iri(ImageIri(options.base_iri, r.image_id)));
    if (graph.Insert(t)) ++result.added;
  }
  if (options.provenance) result.provenance_added = AttachProvenance(manifest, graph, options);
  return result;
}

size_t AttachProvenance(const ingest::Manifest& manifest, kg::Graph& graph,
                        const CompletionOptions& options) {
  const kg::Term score_p = kg::Term::Iri(options.Score());
  const kg::Term rank_p = kg::Term::Iri(options.Rank());
  size_t added = 0;
  char buf[64];
  for (const ingest::ImageRecord& r : manifest.records) {
    if (r.status != ingest::ImageStatus::kRetained) continue;
    const kg::Term image = kg::Term::Iri(ImageIri(options.base_iri, r.image_id));
    if (r.anomaly_score) {
      std::snprintf(buf, sizeof(buf), "%.6f", *r.anomaly_score);
      added += graph.Insert(kg::Triple::Make(image, score_p,
                                             kg::Term::Literal(buf, {}, std::string(kXsd) + "decimal")));
    }
    added += graph.Insert(kg::Triple::Make(
        image, rank_p, kg::Term::Literal(std::to_string(r.rank), {}, std::string(kXsd) + "integer")));
  }
  return added;
}

}  // namespace mmkg::complete
