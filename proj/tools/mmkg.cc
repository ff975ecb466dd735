// mmkg: command-line driver for the construction pipeline and query service.
//
// Exit codes: 0 ok, 1 runtime error, 2 usage error, 3 stats identity failure.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "mmkg/ingest/synth.h"
#include "mmkg/pipeline/pipeline.h"
#include "mmkg/rdf/ntriples.h"
#include "mmkg/service/query_service.h"

namespace fs = std::filesystem;
using namespace mmkg;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIdentity = 3;

void Print(const pipeline::StageResult& r) {
  for (const auto& m : r.messages) std::cerr << m << "\n";
}

int Serve(service::ServiceConfig config, const std::string& run) {
  if (config.graph_path.empty()) {
    config.graph_path = (fs::path(run) / pipeline::kCompletedFile).string();
  }
  if (config.store_path.empty()) config.store_path = (fs::path(run) / pipeline::kStoreDir).string();
  config.Validate();
  if (!fs::exists(config.graph_path)) {
    throw pipeline::MissingArtifact(config.graph_path, "complete");
  }

  // Signals go to a dedicated thread; Stop() is not async-signal-safe.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::QueryService svc(config, rdf::LoadGraph(config.graph_path));
  svc.set_request_log(&std::cerr);
  const int port = svc.Bind();
  std::cerr << "serving " << svc.graph().size() << " triples on http://" << config.host << ":" << port
            << "\n";
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    svc.Stop();
  });
  svc.Serve();
  // Serve() can also end on its own; wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal knowledge graph construction pipeline"};
  app.require_subcommand(1);

  std::string run = "run";
  std::optional<std::uint64_t> seed;
  bool force = false;
  app.add_option("--run", run, "Run directory shared by all stages")->capture_default_str();
  app.add_option("--seed", seed, "Seed recorded in the run directory (fixed at first use)");

  auto* synth = app.add_subcommand("synth", "Write a labeled synthetic corpus");
  ingest::CorpusSpec spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--entities", spec.entities)->capture_default_str();
  synth->add_option("--images", spec.images_per_entity, "Images per entity")->capture_default_str();
  synth->add_option("--outlier-fraction", spec.outlier_fraction)->capture_default_str();
  synth->add_option("--corrupt", spec.corrupt_per_entity, "Truncated images per entity")->capture_default_str();
  synth->add_option("--animated", spec.animated_per_entity, "Animated images per entity")->capture_default_str();
  synth->add_option("--base-iri", spec.base_iri)->capture_default_str();
  synth->add_option("--domains", spec.domains, "Domain names, assigned round-robin");
  synth->add_flag("!--no-distractors", spec.add_distractors, "Omit entities the selector must reject");

  auto* import = app.add_subcommand("import", "Load an N-Triples graph into the run");
  pipeline::ImportOptions import_opts;
  import->add_option("source", import_opts.source, "N-Triples file")->required();
  import->add_flag("--lenient", import_opts.lenient, "Skip malformed lines instead of failing");

  auto* sel = app.add_subcommand("select", "Select domain entities");
  pipeline::SelectOptions select_opts;
  sel->add_option("--domains", select_opts.domains, "Domain configuration file")->required();

  auto* fetch = app.add_subcommand("fetch", "Fetch entity images into the content store");
  pipeline::FetchStageOptions fetch_opts;
  fetch->add_option("--source", fetch_opts.source, "dir:<path> or http://host/prefix")->required();
  fetch->add_option("--cap", fetch_opts.cap, "Images per entity (1..30)")->capture_default_str();
  fetch->add_option("--workers", fetch_opts.workers)->capture_default_str();
  fetch->add_option("--max-attempts", fetch_opts.max_attempts)->capture_default_str();
  fetch->add_option("--backoff-ms", fetch_opts.backoff_ms)->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Reject corrupt and animated images");

  auto* embed = app.add_subcommand("embed", "Compute or load image embeddings");
  pipeline::EmbedOptions embed_opts;
  embed->add_option("--external", embed_opts.external, "Exchange file from an external extractor");
  embed->add_option("--workers", embed_opts.workers)->capture_default_str();

  auto* filter = app.add_subcommand("filter", "Drop per-entity outlier images");
  pipeline::FilterOptions filter_opts;
  filter->add_option("--trees", filter_opts.trees)->capture_default_str();
  filter->add_option("--subsample", filter_opts.subsample)->capture_default_str();
  filter->add_option("--contamination", filter_opts.contamination)->capture_default_str();
  filter->add_option("--workers", filter_opts.workers)->capture_default_str();

  auto* complete = app.add_subcommand("complete", "Add with-image triples to the graph");
  pipeline::CompleteOptions complete_opts;
  complete->add_option("--base-iri", complete_opts.base_iri)->capture_default_str();
  complete->add_option("--with-image-predicate", complete_opts.with_image_predicate,
                       "Default: <base-iri>/p/withImage");
  complete->add_flag("--provenance", complete_opts.provenance, "Also attach anomaly score and rank");

  auto* exp = app.add_subcommand("export", "Write the graph as N-Triples");
  std::string export_out;
  exp->add_option("--out", export_out, "Output file")->required();

  auto* stats = app.add_subcommand("stats", "Per-domain counts and identity checks");
  std::string reference;
  stats->add_option("--reference", reference, "Reference table to compare retention against");

  auto* serve = app.add_subcommand("serve", "Serve SPARQL, images and entity pages over HTTP");
  service::ServiceConfig svc;
  svc.ApplyEnvironment();
  serve->add_option("--graph", svc.graph_path, "Default: <run>/completed.nt");
  serve->add_option("--store", svc.store_path, "Default: <run>/store");
  serve->add_option("--host", svc.host)->capture_default_str();
  serve->add_option("--port", svc.port, "0 picks a free port")->capture_default_str();
  serve->add_option("--max-results", svc.max_results)->capture_default_str();
  serve->add_option("--cors-origin", svc.cors_origin);
  serve->add_option("--base-iri", svc.base_iri)->capture_default_str();
  serve->add_option("--with-image-predicate", svc.with_image_predicate);
  serve->add_option("--name-predicate", svc.name_predicate);
  serve->add_option_function<long>(
      "--timeout-ms", [&](long ms) { svc.request_timeout = std::chrono::milliseconds(ms); },
      "Per-query time limit");

  for (CLI::App* sub : {import, sel, fetch, validate, embed, filter, complete}) {
    sub->add_flag("--force", force, "Re-run even if inputs are unchanged");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      const auto info = ingest::SynthesizeCorpus(spec, seed.value_or(0), synth_out);
      std::cerr << "synth: " << info.entity_iris.size() << " entities\n"
                << "  graph   " << info.graph_path.string() << "\n"
                << "  domains " << info.domains_path.string() << "\n"
                << "  images  dir:" << info.images_root.string() << "\n"
                << "  labels  " << info.labels_path.string() << "\n";
      return 0;
    }
    if (serve->parsed()) return Serve(svc, run);

    pipeline::RunDir dir(run, seed);
    if (import->parsed()) {
      import_opts.force = force;
      Print(pipeline::RunImport(dir, import_opts));
    } else if (sel->parsed()) {
      select_opts.force = force;
      Print(pipeline::RunSelect(dir, select_opts));
    } else if (fetch->parsed()) {
      fetch_opts.force = force;
      Print(pipeline::RunFetch(dir, fetch_opts));
    } else if (validate->parsed()) {
      Print(pipeline::RunValidate(dir, force));
    } else if (embed->parsed()) {
      embed_opts.force = force;
      Print(pipeline::RunEmbed(dir, embed_opts));
    } else if (filter->parsed()) {
      filter_opts.force = force;
      Print(pipeline::RunFilter(dir, filter_opts));
    } else if (complete->parsed()) {
      complete_opts.force = force;
      Print(pipeline::RunComplete(dir, complete_opts));
    } else if (exp->parsed()) {
      Print(pipeline::RunExport(dir, export_out));
    } else if (stats->parsed()) {
      std::optional<fs::path> ref;
      if (!reference.empty()) ref = reference;
      const pipeline::StatsReport report = pipeline::RunStats(dir, ref);
      std::cout << report.ToTsv();
      for (const auto& c : report.checks) {
        std::cerr << (c.ok ? "ok    " : "FAIL  ") << c.name << " (" << c.detail << ")\n";
      }
      return report.ok() ? 0 : kExitIdentity;
    }
  } catch (const std::exception& e) {
    std::cerr << "mmkg: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
