// Command-line front end: train indexes, measure recall, run queries,
// explore accelerator designs, and estimate scale-out latency.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <annforge/annforge.hpp>

namespace {

using namespace annforge;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitIo = 3;

VectorSet read_vectors(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".fvecs") return io::read_fvecs(path);
  if (ext == ".bvecs") return io::read_bvecs(path);
  throw FormatError("unsupported vector file extension '" + ext +
                    "' (expected .fvecs or .bvecs): " + path.string());
}

std::string index_label(const index::IVFIndex& ix) {
  std::string label = ix.rotation ? "OPQ+IVF" : "IVF";
  return label + std::to_string(ix.params.nlist);
}

double default_recall_goal(std::uint32_t k) {
  if (k <= 1) return 0.30;
  if (k <= 10) return 0.80;
  return 0.95;
}

engine::RecallMode parse_mode(const std::string& mode) {
  if (mode == "first") return engine::RecallMode::first_nn;
  if (mode == "inter") return engine::RecallMode::intersection;
  throw InvalidArgument("unknown recall mode '" + mode +
                        "' (expected first or inter)");
}

struct TrainArgs {
  std::string base, out;
  std::uint32_t nlist = 0, m = 16;
  bool opq = false;
  std::uint64_t seed = 42;
  index::BuildOptions build;
};

int run_train(const TrainArgs& a) {
  const VectorSet data = read_vectors(a.base);
  const index::IVFIndex ix =
      index::build_ivf(data, a.nlist, a.m, a.opq, a.seed, a.build);
  io::save_index(ix, a.out);
  const auto bytes = std::filesystem::file_size(a.out);
  std::printf("%s: n=%" PRIu64 " dim=%u m=%u -> %s (%" PRIu64 " bytes)\n",
              index_label(ix).c_str(), ix.count(), ix.params.dim, ix.params.m,
              a.out.c_str(), std::uint64_t(bytes));
  return kExitOk;
}

struct RecallArgs {
  std::string index, query, gt, mode = "first";
  std::uint32_t k = 10;
  std::optional<std::uint32_t> nprobe;
  std::optional<double> goal;
  std::vector<std::uint32_t> grid;
};

int run_recall(const RecallArgs& a) {
  const index::IVFIndex ix = io::load_index(a.index);
  const VectorSet queries = read_vectors(a.query);
  const GroundTruth gt = io::read_ivecs(a.gt);
  const engine::RecallMode mode = parse_mode(a.mode);

  if (!a.grid.empty()) {
    std::printf("nprobe,recall\n");
    for (std::uint32_t np : a.grid) {
      const double r = engine::evaluate_recall(ix, queries, gt, np, a.k, mode);
      std::printf("%u,%.4f\n", np, r);
    }
    return kExitOk;
  }
  if (a.nprobe) {
    const double r =
        engine::evaluate_recall(ix, queries, gt, *a.nprobe, a.k, mode);
    std::printf("nprobe=%u recall=%.4f\n", *a.nprobe, r);
    return kExitOk;
  }
  const double goal = a.goal ? *a.goal : default_recall_goal(a.k);
  const auto np = engine::min_nprobe_for_recall(ix, queries, gt, a.k, goal, mode);
  if (!np) {
    std::fprintf(stderr, "recall goal %.4f unreachable for %s even at nprobe=%u\n",
                 goal, index_label(ix).c_str(), ix.params.nlist);
    return kExitInfeasible;
  }
  const double r = engine::evaluate_recall(ix, queries, gt, *np, a.k, mode);
  std::printf("nprobe=%u recall=%.4f goal=%.4f\n", *np, r, goal);
  return kExitOk;
}

struct QueryArgs {
  std::string index, query, out;
  std::uint32_t k = 10, nprobe = 1;
};

int run_query(const QueryArgs& a) {
  const index::IVFIndex ix = io::load_index(a.index);
  const VectorSet queries = read_vectors(a.query);

  std::FILE* f = stdout;
  if (!a.out.empty()) {
    f = std::fopen(a.out.c_str(), "w");
    if (!f) throw IoError("cannot open " + a.out + " for writing");
  }
  std::fprintf(f, "query,rank,id,distance\n");
  for (std::uint64_t q = 0; q < queries.count(); ++q) {
    const auto res = engine::search(ix, queries.row(q), a.nprobe, a.k);
    for (std::uint32_t r = 0; r < a.k; ++r) {
      const ScoredId& h = res.hits[r];
      if (h.id == kPadId) break;  // fewer than k candidates scanned
      std::fprintf(f, "%" PRIu64 ",%u,%" PRIu64 ",%.6f\n", q, r + 1, h.id,
                   double(h.distance));
    }
  }
  if (f != stdout) std::fclose(f);
  return kExitOk;
}

struct CodesignArgs {
  std::vector<std::string> indexes;
  std::string query, gt, catalog, budget;
  std::string out = "manifest.json";
  std::uint32_t k = 10;
  std::optional<std::uint32_t> nprobe;
  std::optional<double> goal;
};

int run_codesign(const CodesignArgs& a) {
  const codesign::PECatalog cat = a.catalog.empty()
                                      ? codesign::default_catalog()
                                      : codesign::load_catalog(a.catalog);
  const codesign::DeviceBudget bud = a.budget.empty()
                                         ? codesign::default_budget()
                                         : codesign::load_budget(a.budget);

  std::optional<VectorSet> queries;
  std::optional<GroundTruth> gt;
  if (!a.nprobe) {
    if (a.query.empty() || a.gt.empty())
      throw InvalidArgument(
          "codesign: pass --nprobe, or --query and --gt to derive it from "
          "a recall goal");
    queries = read_vectors(a.query);
    gt = io::read_ivecs(a.gt);
  }
  const double goal = a.goal ? *a.goal : default_recall_goal(a.k);

  std::vector<codesign::Workload> workloads;
  for (const std::string& path : a.indexes) {
    const index::IVFIndex ix = io::load_index(path);
    const std::string label = index_label(ix);
    std::uint32_t nprobe = 0;
    if (a.nprobe) {
      nprobe = std::min(*a.nprobe, ix.params.nlist);
    } else {
      const auto np =
          engine::min_nprobe_for_recall(ix, *queries, *gt, a.k, goal);
      if (!np) {
        std::fprintf(stderr, "%s: recall goal %.4f unreachable, skipping\n",
                     label.c_str(), goal);
        continue;
      }
      nprobe = *np;
    }
    codesign::Workload wl;
    wl.index_id = label;
    wl.algo = {ix.params.nlist, nprobe, a.k, ix.rotation.has_value()};
    wl.dim = ix.params.dim;
    wl.m = ix.params.m;
    wl.stats = index::cell_stats(ix);
    std::printf("%s: nprobe=%u expected_scanned=%.1f\n", label.c_str(), nprobe,
                index::expected_scanned(wl.stats, nprobe));
    workloads.push_back(std::move(wl));
  }
  if (workloads.empty()) {
    std::fprintf(stderr, "codesign: no usable workload\n");
    return kExitInfeasible;
  }

  const auto man = codesign::co_design(workloads, cat, bud);
  if (!man) {
    std::fprintf(stderr, "codesign: no design fits the device budget\n");
    return kExitInfeasible;
  }
  codesign::emit_manifest(*man, a.out);
  std::printf("best: %s nprobe=%u k=%u qps=%.1f -> %s\n", man->index_id.c_str(),
              man->algo.nprobe, man->algo.k, man->predicted_qps,
              a.out.c_str());
  for (const auto& [stage, qps] : man->stage_qps)
    std::printf("  %-10s %12.1f qps\n", stage.c_str(), qps);
  return kExitOk;
}

struct ScaleoutArgs {
  std::string history;
  std::vector<std::uint32_t> n_acc{1, 2, 4, 8};
  std::uint32_t k = 10, samples = 10000;
  double query_bytes = 512;
  std::uint64_t seed = 42;
  scaleout::LogGPParams net;
  scaleout::ScaleoutOptions options;
};

int run_scaleout(const ScaleoutArgs& a) {
  const std::vector<double> history = io::load_latency_history(a.history);
  std::printf("n_acc,median_us,p95_us,p99_us\n");
  for (std::uint32_t n : a.n_acc) {
    const auto s = scaleout::distributed_latency(
        history, n, a.net, a.k, a.query_bytes, a.samples, a.seed, a.options);
    std::printf("%u,%.3f,%.3f,%.3f\n", n, s.median_us, s.p95_us, s.p99_us);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IVF-PQ search engine and accelerator co-design toolkit"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Build an index from base vectors");
  t->add_option("--base", train.base, "Base vectors (.fvecs or .bvecs)")
      ->required()
      ->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Output index file")->required();
  t->add_option("--nlist", train.nlist, "Number of coarse cells")->required();
  t->add_option("--m", train.m, "PQ sub-quantizers per vector");
  t->add_flag("--opq", train.opq, "Train a rotation before quantizing");
  t->add_option("--seed", train.seed, "Training seed");
  t->add_option("--kmeans-iters", train.build.kmeans_iters,
                "Coarse k-means iterations");
  t->add_option("--pq-iters", train.build.pq_iters,
                "Codebook k-means iterations");
  t->add_option("--opq-outer", train.build.opq_outer_iters,
                "Rotation refinement rounds");
  t->add_option("--opq-sample", train.build.opq_sample,
                "Training sample size for the rotation");

  RecallArgs recall;
  auto* r = app.add_subcommand("recall", "Measure recall against ground truth");
  r->add_option("--index", recall.index, "Index file")
      ->required()
      ->check(CLI::ExistingFile);
  r->add_option("--query", recall.query, "Query vectors")
      ->required()
      ->check(CLI::ExistingFile);
  r->add_option("--gt", recall.gt, "Ground truth (.ivecs)")
      ->required()
      ->check(CLI::ExistingFile);
  r->add_option("--k", recall.k, "Neighbors returned per query");
  r->add_option("--nprobe", recall.nprobe, "Evaluate one probe count");
  r->add_option("--recall-goal", recall.goal,
                "Find the smallest nprobe reaching this recall");
  r->add_option("--grid", recall.grid,
                "Evaluate these probe counts as CSV")
      ->delimiter(',');
  r->add_option("--mode", recall.mode,
                "first: true NN in top-k; inter: top-k overlap");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Run queries, print CSV results");
  q->add_option("--index", query.index, "Index file")
      ->required()
      ->check(CLI::ExistingFile);
  q->add_option("--query", query.query, "Query vectors")
      ->required()
      ->check(CLI::ExistingFile);
  q->add_option("--k", query.k, "Neighbors per query");
  q->add_option("--nprobe", query.nprobe, "Cells probed per query");
  q->add_option("--out", query.out, "Write CSV here instead of stdout");

  CodesignArgs cod;
  auto* c = app.add_subcommand(
      "codesign", "Pick the best accelerator design for a set of indexes");
  c->add_option("--index", cod.indexes, "Candidate index file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("--query", cod.query, "Query vectors for the recall goal")
      ->check(CLI::ExistingFile);
  c->add_option("--gt", cod.gt, "Ground truth for the recall goal")
      ->check(CLI::ExistingFile);
  c->add_option("--k", cod.k, "Neighbors per query");
  c->add_option("--nprobe", cod.nprobe,
                "Fixed probe count (skips the recall search)");
  c->add_option("--recall-goal", cod.goal,
                "Recall target used to derive nprobe per index");
  c->add_option("--catalog", cod.catalog, "Processing-element catalog JSON")
      ->check(CLI::ExistingFile);
  c->add_option("--budget", cod.budget, "Device budget JSON")
      ->check(CLI::ExistingFile);
  c->add_option("--out", cod.out, "Manifest output path");

  ScaleoutArgs sc;
  auto* s = app.add_subcommand(
      "scaleout", "Estimate distributed query latency from a history");
  s->add_option("--history", sc.history,
                "Per-query latency samples in microseconds, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--n-acc", sc.n_acc, "Accelerator counts as CSV")
      ->delimiter(',');
  s->add_option("--k", sc.k, "Neighbors per query (sizes the reduction)");
  s->add_option("--query-bytes", sc.query_bytes, "Broadcast payload bytes");
  s->add_option("--samples", sc.samples, "Monte Carlo trials");
  s->add_option("--seed", sc.seed, "Sampling seed");
  s->add_option("--net-latency-us", sc.net.latency_us, "Wire latency");
  s->add_option("--net-overhead-us", sc.net.overhead_us, "Per-endpoint overhead");
  s->add_option("--net-gap-ns", sc.net.gap_ns_per_byte, "Per-byte gap");
  s->add_option("--merge-us", sc.net.merge_us, "Per-level reduce work");
  s->add_flag("--no-broadcast", [&sc](std::int64_t) { sc.options.broadcast = false; },
              "Skip the query broadcast term");
  s->add_flag("--no-reduce", [&sc](std::int64_t) { sc.options.reduce = false; },
              "Skip the result reduction term");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (t->parsed()) return run_train(train);
    if (r->parsed()) return run_recall(recall);
    if (q->parsed()) return run_query(query);
    if (c->parsed()) return run_codesign(cod);
    if (s->parsed()) return run_scaleout(sc);
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
