// Acceptance suite: one PASS/FAIL line per criterion, details indented
// below it. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "mmkg/complete/completer.h"
#include "mmkg/ingest/manifest.h"
#include "mmkg/ingest/synth.h"
#include "mmkg/outlier/filter.h"
#include "mmkg/outlier/isolation_forest.h"
#include "mmkg/pipeline/pipeline.h"
#include "mmkg/rdf/ntriples.h"
#include "mmkg/service/query_service.h"
#include "mmkg/sparql/evaluator.h"
#include "mmkg/sparql/parser.h"
#include "mmkg/util/hash.h"
#include "support.h"

namespace mmkg {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::vector<std::string> details;

  // Records a sub-check; returns `pass` so callers can chain.
  bool Check(bool pass, const std::string& what) {
    details.push_back(std::string(pass ? "ok   " : "FAIL ") + what);
    ok = ok && pass;
    return pass;
  }
  void Note(const std::string& what) { details.push_back("     " + what); }
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

// The 50 x 30 synthetic pipeline run shared by criteria 1, 5, 6 and 7.
struct SharedRun {
  testing::TempDir tmp;
  fs::path run_dir;
  ingest::CorpusInfo corpus;
  bool ready = false;
};

// ------------------------------------------------------------ criterion 1

Outcome RetentionIdentity(SharedRun& shared) {
  Outcome out;
  const auto start = Clock::now();
  ingest::CorpusSpec spec;  // 50 entities x 30 images, 20% outliers
  shared.corpus = ingest::SynthesizeCorpus(spec, 1, shared.tmp / "corpus");
  shared.run_dir = shared.tmp / "run";
  pipeline::StatsReport report;
  {
    pipeline::RunDir run(shared.run_dir, 1);
    pipeline::RunImport(run, {shared.corpus.graph_path.string()});
    pipeline::RunSelect(run, {shared.corpus.domains_path.string()});
    pipeline::FetchStageOptions fetch;
    fetch.source = "dir:" + shared.corpus.images_root.string();
    pipeline::RunFetch(run, fetch);
    pipeline::RunValidate(run);
    pipeline::RunEmbed(run, {});
    pipeline::RunFilter(run, {});
    pipeline::RunComplete(run, {});
    report = pipeline::RunStats(run, fs::path(MMKG_DATA_DIR) / "table1.tsv");
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  shared.ready = true;

  const ingest::Manifest m =
      ingest::ReadManifestJsonl((shared.run_dir / pipeline::kFilteredFile).string());
  size_t bad_entities = 0, retained = 0;
  const auto by_entity = m.RecordsByEntity();
  for (const auto& [iri, idx] : by_entity) {
    size_t r = 0, f = 0;
    for (size_t i : idx) {
      r += m.records[i].status == ingest::ImageStatus::kRetained;
      f += m.records[i].status == ingest::ImageStatus::kFilteredOut;
    }
    bad_entities += (r != 24 || f != 6);
    retained += r;
  }
  out.Check(by_entity.size() == 50, std::to_string(by_entity.size()) + " entities with images (want 50)");
  out.Check(bad_entities == 0,
            std::to_string(bad_entities) + " entities deviate from 6 filtered-out / 24 retained");
  out.Check(retained == 1200 && m.records.size() == 1500,
            std::to_string(retained) + "/" + std::to_string(m.records.size()) + " retained (want 1200/1500)");
  const double ours = static_cast<double>(retained) / static_cast<double>(m.records.size());
  const double reference = 1227013.0 / 1535005.0;
  out.Check(std::fabs(ours - reference) <= 0.01,
            Fmt("retention %.4f vs reference %.4f (tolerance 0.01)", ours, reference));
  for (const auto& c : report.checks) out.Check(c.ok, "stats: " + c.name + " (" + c.detail + ")");
  out.Check(seconds < 120.0, Fmt("end-to-end runtime %.1f s (limit 120 s)", seconds));
  return out;
}

// ------------------------------------------------------------ criterion 2

Outcome OutlierRecall() {
  Outcome out;
  double sum = 0, worst = 1;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    testing::TempDir tmp;
    ingest::CorpusSpec spec;
    auto run = testing::RunSyntheticPipeline(spec, seed, tmp.path());
    outlier::ForestParams params;
    params.seed = seed;
    outlier::FilterManifest(run.manifest, run.embeddings, params);
    const double recall = testing::OutlierRecall(run.manifest, run.corpus.labels);
    sum += recall;
    worst = std::min(worst, recall);
  }
  const double mean = sum / 10.0;
  out.Note(Fmt("worst single-seed recall %.4f", worst));
  out.Check(mean >= 0.9, Fmt("mean injected-outlier recall over 10 seeds %.4f (want >= 0.9)", mean));
  return out;
}

// ------------------------------------------------------------ criterion 3

Outcome IsolationForestCorrectness() {
  Outcome out;
  // (a) c(n) against the closed form evaluated independently.
  double worst = 0;
  for (long long n : {3LL, 10LL, 256LL, 10000LL}) {
    worst = std::max(worst, std::fabs(outlier::AvgPathC(n) - testing::ReferenceC(n)));
  }
  out.Check(worst <= 1e-9, Fmt("(a) max |c(n) - reference| = %.3g over n in {3, 10, 256, 10^4}", worst));

  // (b) 95 standard-normal points plus 5 at 10 sigma.
  int hits = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    util::Rng rng(seed * 31 + 1);
    outlier::PointSet ps;
    for (int i = 0; i < 100; ++i) {
      const double shift = i >= 95 ? 10.0 : 0.0;
      const double p[] = {rng.Normal() + shift, rng.Normal() + shift};
      ps.Add(std::span<const double>(p));
    }
    outlier::ForestParams params;
    params.seed = seed;
    const auto forest = outlier::IsolationForest::Build(ps, params);
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < 100; ++i) scored.push_back({forest.Score(ps.row(static_cast<size_t>(i))).score, i});
    std::sort(scored.rbegin(), scored.rend());
    bool all = true;
    for (int k = 0; k < 5; ++k) all = all && scored[static_cast<size_t>(k)].second >= 95;
    hits += all;
  }
  out.Check(hits == 10, "(b) planted outliers fill the top 5 for " + std::to_string(hits) + "/10 seeds");

  // (c) x0 < 0.5 -> leaf; else x0 < 1.5 -> leaf | leaf. Paths 1, 2, 2.
  outlier::IsolationTree t;
  t.nodes.push_back({0, 0.5, 1, 2, 3});
  t.nodes.push_back({-1, 0, -1, -1, 1});
  t.nodes.push_back({0, 1.5, 3, 4, 2});
  t.nodes.push_back({-1, 0, -1, -1, 1});
  t.nodes.push_back({-1, 0, -1, -1, 1});
  const auto forest = outlier::IsolationForest::FromTrees({t}, 3, 1);
  const double c3 = 2.0 * (std::log(2.0) + 0.5772156649) - 2.0 * 2.0 / 3.0;
  const double manual_h[] = {1, 2, 2};
  bool exact = true;
  for (int i = 0; i < 3; ++i) {
    const double x[] = {static_cast<double>(i)};
    const auto s = forest.Score(x);
    exact = exact && s.mean_path_length == manual_h[i] && s.score == std::exp2(-manual_h[i] / c3);
  }
  out.Check(exact, "(c) hand-built 3-point tree: path lengths and scores match the manual oracle exactly");
  return out;
}

// ------------------------------------------------------------ criterion 4

std::multiset<std::vector<std::string>> Keys(const std::vector<std::vector<kg::Term>>& rows) {
  std::multiset<std::vector<std::string>> out;
  for (const auto& r : rows) {
    std::vector<std::string> k;
    for (const auto& t : r) k.push_back(t.key());
    out.insert(std::move(k));
  }
  return out;
}

Outcome SparqlOracle() {
  Outcome out;
  int agree = 0, nonempty = 0;
  size_t largest = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    util::Rng rng(1000 + seed);
    const auto vocab = testing::SmallVocabulary(rng, 10, 3);
    // Most random queries have empty answers; redraw a few times so that
    // the comparison mostly exercises real joins.
    sparql::Query q;
    kg::Graph g;
    std::multiset<std::vector<std::string>> expected;
    for (int attempt = 0; attempt < 5; ++attempt) {
      q = testing::RandomQuery(rng, vocab);
      // The oracle enumerates n^k combinations; three-pattern queries get
      // smaller graphs so it stays tractable.
      const size_t cap = q.where.size() >= 3 ? 200 : 1000;
      g = testing::RandomGraph(rng, vocab, 10 + rng.Below(cap - 9));
      expected = Keys(testing::BruteForceSolutions(q, g));
      if (!expected.empty()) break;
    }
    largest = std::max(largest, g.size());
    const auto got = Keys(sparql::Evaluate(q, g).rows);
    if (got == expected) {
      ++agree;
    } else {
      out.Note("mismatch: " + sparql::Serialize(q));
    }
    nonempty += !expected.empty();
  }
  out.Check(agree == 50, std::to_string(agree) + "/50 random queries match the brute-force oracle (" +
                             std::to_string(nonempty) + " with non-empty answers, graphs up to " +
                             std::to_string(largest) + " triples)");

  const kg::Graph demo = rdf::LoadGraph((testing::FixtureDir() / "demo.nt").string());
  const auto r = sparql::Evaluate(
      sparql::ParseQuery("SELECT ?e ?img WHERE { ?e <http://mmkb.test/p/name> ?n . "
                         "?e <http://mmkb.test/p/withImage> ?img . FILTER(CONTAINS(STR(?n), \"BMW\")) }"),
      demo);
  std::vector<std::string> lines;
  for (const auto& row : r.rows) lines.push_back(row[0].key() + "\t" + row[1].key() + "\n");
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) joined += l;
  out.Check(joined == testing::ReadFile(testing::FixtureDir() / "demo_bmw_expected.tsv"),
            "BMW substring query returns exactly the expected " + std::to_string(r.rows.size()) + " bindings");
  return out;
}

// ------------------------------------------------------------ criterion 5

Outcome RoundTrips(SharedRun& shared) {
  Outcome out;
  util::Rng rng(5);
  std::vector<kg::Triple> triples;
  for (int i = 0; i < 1000; ++i) triples.push_back(testing::RandomTriple(rng));
  const auto parsed = rdf::ParseNTriples(rdf::SerializeNTriples(triples));
  out.Check(parsed.complete && parsed.triples == triples,
            "parse(serialize(list)) == list for 1,000 random triples");

  for (const char* name : {"golden_basic.nt", "golden_completed.nt"}) {
    const std::string bytes = testing::ReadFile(testing::FixtureDir() / name);
    const auto p = rdf::ParseNTriples(bytes);
    out.Check(p.complete && rdf::SerializeNTriples(p.triples) == bytes,
              std::string("serialize(parse(") + name + ")) is bit-exact");
  }

  if (!out.Check(shared.ready, "pipeline run from criterion 1 available")) return out;
  const fs::path exported = shared.tmp / "exported.nt";
  {
    pipeline::RunDir run(shared.run_dir);
    pipeline::RunExport(run, exported);
  }
  const fs::path second = shared.tmp / "reimport";
  {
    pipeline::RunDir run(second);
    pipeline::RunImport(run, {exported.string()});
  }
  const kg::Graph a = rdf::LoadGraph((shared.run_dir / pipeline::kCompletedFile).string());
  const kg::Graph b = rdf::LoadGraph((second / pipeline::kGraphFile).string());
  out.Check(a == b, "export -> import reproduces the completed graph (" + std::to_string(a.size()) + " triples)");
  return out;
}

// ------------------------------------------------------------ criterion 6

Outcome CompletionIdentity(SharedRun& shared) {
  Outcome out;
  if (!out.Check(shared.ready, "pipeline run from criterion 1 available")) return out;
  const ingest::Manifest m =
      ingest::ReadManifestJsonl((shared.run_dir / pipeline::kFilteredFile).string());
  kg::Graph g = rdf::LoadGraph((shared.run_dir / pipeline::kCompletedFile).string());
  const complete::CompletionOptions opts;
  const kg::Term with_image = kg::Term::Iri(opts.WithImage());

  size_t mismatched = 0, total_retained = 0;
  for (const auto& [iri, idx] : m.RecordsByEntity()) {
    std::set<std::string> retained;
    for (size_t i : idx) {
      if (m.records[i].status == ingest::ImageStatus::kRetained) retained.insert(m.records[i].image_id);
    }
    total_retained += retained.size();
    const size_t triples = g.Count({kg::Term::Iri(iri), with_image, kg::Variable{"img"}});
    mismatched += triples != retained.size();
  }
  const size_t total_triples = g.Count({kg::Variable{"e"}, with_image, kg::Variable{"img"}});
  out.Check(mismatched == 0, std::to_string(mismatched) + " entities where with-image triples != retained images");
  out.Check(total_triples == total_retained, std::to_string(total_triples) + " with-image triples, " +
                                                 std::to_string(total_retained) + " retained images");

  const size_t before = g.size();
  const auto again = complete::CompleteTriples(m, g, opts);
  out.Check(again.added == 0 && g.size() == before,
            "re-running completion adds " + std::to_string(again.added) + " triples");
  const std::string bytes = testing::ReadFile(shared.run_dir / pipeline::kCompletedFile);
  {
    pipeline::RunDir run(shared.run_dir);
    pipeline::CompleteOptions force;
    force.force = true;
    pipeline::RunComplete(run, force);
  }
  out.Check(testing::ReadFile(shared.run_dir / pipeline::kCompletedFile) == bytes,
            "forced `complete` rewrites a byte-identical graph");
  return out;
}

// ------------------------------------------------------------ criterion 7

std::vector<std::string> CorpusQueries() {
  std::istringstream in(testing::ReadFile(testing::FixtureDir() / "sparql_corpus.rq"));
  std::vector<std::string> out;
  std::string line, cur;
  while (std::getline(in, line)) {
    if (line == "----") {
      out.push_back(cur);
      cur.clear();
    } else if (!line.empty() && line[0] != '#') {
      cur += line + "\n";
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Outcome ServiceConformance(SharedRun& shared) {
  Outcome out;
  if (!out.Check(shared.ready, "pipeline run from criterion 1 available")) return out;
  const auto queries = CorpusQueries();

  // Demo fixture graph, handlers only.
  {
    testing::TempDir empty;
    service::ServiceConfig cfg;
    cfg.store_path = empty.path().string();
    const service::QueryService svc(cfg, rdf::LoadGraph((testing::FixtureDir() / "demo.nt").string()));
    size_t valid = 0;
    for (const auto& q : queries) {
      const auto r = svc.HandleSparql("POST", "application/sparql-query", q, std::nullopt);
      const std::string problem =
          r.status == 200 ? testing::CheckSparqlJsonShape(r.body, sparql::ParseQuery(q).Projection())
                          : "HTTP " + std::to_string(r.status);
      if (problem.empty()) {
        ++valid;
      } else {
        out.Note("demo graph: " + problem);
      }
    }
    out.Check(valid == queries.size(), std::to_string(valid) + "/" + std::to_string(queries.size()) +
                                           " corpus queries on the demo graph have the SPARQL JSON shape");
  }

  // Pipeline output over a real socket.
  service::ServiceConfig cfg;
  cfg.port = 0;
  cfg.store_path = (shared.run_dir / pipeline::kStoreDir).string();
  service::QueryService svc(cfg, rdf::LoadGraph((shared.run_dir / pipeline::kCompletedFile).string()));
  const int port = svc.Bind();
  std::thread server([&] { svc.Serve(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(30, 0);

  size_t valid = 0;
  for (const auto& q : queries) {
    auto res = cli.Post("/sparql", q, "application/sparql-query");
    std::string problem = !res ? "no response"
                          : res->status != 200
                              ? "HTTP " + std::to_string(res->status)
                              : testing::CheckSparqlJsonShape(res->body, sparql::ParseQuery(q).Projection());
    if (problem.empty() && res->get_header_value("Content-Type").rfind("application/sparql-results+json", 0) != 0) {
      problem = "content type " + res->get_header_value("Content-Type");
    }
    if (problem.empty()) {
      ++valid;
    } else {
      out.Note("pipeline graph: " + problem);
    }
  }
  out.Check(valid == queries.size(), std::to_string(valid) + "/" + std::to_string(queries.size()) +
                                         " corpus queries over HTTP have the SPARQL JSON shape");

  const ingest::Manifest m =
      ingest::ReadManifestJsonl((shared.run_dir / pipeline::kFilteredFile).string());
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (r.status == ingest::ImageStatus::kRetained) ids.insert(r.image_id);
  }
  size_t good = 0;
  for (const auto& id : ids) {
    auto res = cli.Get("/image/" + id);
    good += res && res->status == 200 && util::Sha256Hex(res->body) == id;
  }
  out.Check(good == ids.size() && !ids.empty(), std::to_string(good) + "/" + std::to_string(ids.size()) +
                                                    " /image responses hash back to their ids");
  svc.Stop();
  server.join();
  return out;
}

}  // namespace
}  // namespace mmkg

int main() {
  using namespace mmkg;
  SharedRun shared;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Retention identity (50 x 30 synthetic run)", [&] { return RetentionIdentity(shared); }},
      {"Outlier recall >= 0.9 over 10 seeds", [] { return OutlierRecall(); }},
      {"Isolation forest correctness", [] { return IsolationForestCorrectness(); }},
      {"SPARQL oracle equivalence", [] { return SparqlOracle(); }},
      {"Round trips", [&] { return RoundTrips(shared); }},
      {"Triple-completion identity", [&] { return CompletionIdentity(shared); }},
      {"Service conformance", [&] { return ServiceConformance(shared); }},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.Check(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(Clock::now() - start).count();
    std::cout << (o.ok ? "PASS" : "FAIL") << "  " << (i + 1) << "  " << criteria[i].first
              << Fmt("  [%.1fs]", s) << "\n";
    for (const auto& d : o.details) std::cout << "      " << d << "\n";
    std::cout << std::flush;
    failed += !o.ok;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
