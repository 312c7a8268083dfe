#include <catch2/catch_amalgamated.hpp>

#include <annforge/engine.hpp>
#include <annforge/index.hpp>

#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace annforge;
using namespace testsupport;

namespace {

struct Fixture {
  VectorSet data;
  VectorSet queries;
  index::IVFIndex ix;
};

Fixture make_fixture(bool opq, std::uint64_t seed = 303) {
  Fixture f{make_blobs(3000, 16, 10, seed),
            {}, {}};
  f.queries = perturb_queries(f.data, 30, seed + 1);
  index::BuildOptions opts;
  opts.kmeans_iters = 10;
  opts.pq_iters = 8;
  opts.opq_outer_iters = 3;
  f.ix = index::build_ivf(f.data, 12, 4, opq, 17, opts);
  return f;
}

std::span<const float> qrow(const VectorSet& qs, std::size_t i) {
  return {qs.data.data() + i * qs.dim, qs.dim};
}

}  // namespace

TEST_CASE("probed-cell choice matches the reference ordering", "[engine]") {
  const bool opq = GENERATE(false, true);
  const Fixture f = make_fixture(opq);

  for (std::size_t q = 0; q < f.queries.count(); ++q) {
    const std::vector<float> rq =
        engine::apply_opq(qrow(f.queries, q), f.ix.rotation);
    const std::vector<float> dists = engine::ivf_distances(rq, f.ix.coarse);
    const auto got = engine::select_cells(dists, 5);
    const auto want = oracle_cells(f.ix, qrow(f.queries, q), 5);
    CHECK(got == want);
  }
}

TEST_CASE("search equals an exhaustive scan of the probed cells", "[engine]") {
  const bool opq = GENERATE(false, true);
  const Fixture f = make_fixture(opq);
  const std::uint32_t k = 8, nprobe = 4;

  for (std::size_t q = 0; q < f.queries.count(); ++q) {
    const auto res = engine::search(f.ix, qrow(f.queries, q), nprobe, k);
    const auto cells = oracle_cells(f.ix, qrow(f.queries, q), nprobe);
    const auto want = oracle_adc_topk(f.ix, qrow(f.queries, q), cells, k);
    REQUIRE(res.hits.size() == k);
    for (std::uint32_t i = 0; i < k; ++i) {
      CHECK(res.hits[i].id == want[i].id);
      CHECK(res.hits[i].distance == want[i].distance);  // bitwise
    }
  }
}

TEST_CASE("probing every cell is a full-database scan", "[engine]") {
  const Fixture f = make_fixture(false);
  const std::uint32_t k = 10;
  std::vector<std::uint32_t> all_cells(f.ix.params.nlist);
  for (std::uint32_t c = 0; c < f.ix.params.nlist; ++c) all_cells[c] = c;

  for (std::size_t q = 0; q < 10; ++q) {
    const auto res =
        engine::search(f.ix, qrow(f.queries, q), f.ix.params.nlist, k);
    const auto want = oracle_adc_topk(f.ix, qrow(f.queries, q), all_cells, k);
    for (std::uint32_t i = 0; i < k; ++i) {
      CHECK(res.hits[i].id == want[i].id);
      CHECK(res.hits[i].distance == want[i].distance);
    }
  }
}

TEST_CASE("lane count never changes the answer", "[engine]") {
  const Fixture f = make_fixture(true);
  for (std::uint32_t lanes : {2u, 7u, 16u}) {
    engine::SearchOptions opts;
    opts.lanes = lanes;
    for (std::size_t q = 0; q < 8; ++q) {
      const auto a = engine::search(f.ix, qrow(f.queries, q), 6, 5);
      const auto b = engine::search(f.ix, qrow(f.queries, q), 6, 5, opts);
      for (std::uint32_t i = 0; i < 5; ++i) {
        CHECK(a.hits[i].id == b.hits[i].id);
        CHECK(a.hits[i].distance == b.hits[i].distance);
      }
    }
  }
}

TEST_CASE("lane padding emits whole groups of sentinel candidates", "[engine]") {
  // 5 candidates in a synthetic cell, 4 lanes: one pad to reach 8
  engine::DistanceLUT lut;
  lut.m = 1;
  lut.values.assign(256, 0.0f);
  for (std::uint32_t c = 0; c < 256; ++c) lut.values[c] = float(c);

  const std::vector<std::uint8_t> codes = {5, 3, 9, 1, 7};
  const std::vector<std::uint64_t> ids = {10, 11, 12, 13, 14};

  std::vector<ScoredId> seen;
  engine::adc_scan(lut, codes, ids, 4, [&](ScoredId s) { seen.push_back(s); });
  REQUIRE(seen.size() == 8);
  CHECK(seen[0].distance == 5.0f);
  CHECK(seen[4].distance == 7.0f);
  for (std::size_t i = 5; i < 8; ++i) {
    CHECK(seen[i].id == kPadId);
    CHECK(seen[i].distance == kMaxDistance);
  }
}

TEST_CASE("top-k accumulator equals sort and truncate", "[engine]") {
  auto values = random_scored(5000, 71);
  // inject duplicate distances so ties exercise the id ordering
  for (std::size_t i = 0; i < values.size(); i += 17)
    values[i].distance = 42.0f;

  for (std::uint32_t k : {1u, 7u, 100u}) {
    TopKAccumulator acc(k);
    for (const auto& v : values) acc.push(v);
    const auto got = acc.finish();
    const auto want = sort_truncate(values, k);
    REQUIRE(got.size() == k);
    for (std::uint32_t i = 0; i < k; ++i) {
      CHECK(got[i].id == want[i].id);
      CHECK(got[i].distance == want[i].distance);
    }
  }

  // fewer candidates than k: sentinel padding at the tail
  TopKAccumulator acc(6);
  acc.push({1.0f, 4});
  acc.push({0.5f, 9});
  const auto got = acc.finish();
  CHECK(got[0].id == 9);
  CHECK(got[1].id == 4);
  for (std::size_t i = 2; i < 6; ++i) CHECK(got[i].id == kPadId);
}

TEST_CASE("recall measures the fraction of found true neighbors", "[engine]") {
  const Fixture f = make_fixture(false);
  const GroundTruth gt = exact_ground_truth(f.data, f.queries, 5);
  const std::uint32_t k = 5, nprobe = 6;

  // recompute both modes by hand from search results
  std::size_t first_hits = 0;
  double inter_total = 0;
  for (std::size_t q = 0; q < f.queries.count(); ++q) {
    const auto res = engine::search(f.ix, qrow(f.queries, q), nprobe, k);
    const std::uint64_t nn = std::uint64_t(std::uint32_t(gt.ids[q * 5]));
    bool found = false;
    std::size_t overlap = 0;
    for (const auto& h : res.hits) {
      if (h.id == nn) found = true;
      for (std::uint32_t i = 0; i < 5; ++i)
        if (h.id == std::uint64_t(std::uint32_t(gt.ids[q * 5 + i]))) {
          ++overlap;
          break;
        }
    }
    first_hits += found;
    inter_total += double(overlap) / double(k);
  }

  const double first = engine::evaluate_recall(f.ix, f.queries, gt, nprobe, k,
                                               engine::RecallMode::first_nn);
  const double inter = engine::evaluate_recall(
      f.ix, f.queries, gt, nprobe, k, engine::RecallMode::intersection);
  CHECK(first == double(first_hits) / double(f.queries.count()));
  CHECK_THAT(inter, Catch::Matchers::WithinAbs(
                        inter_total / double(f.queries.count()), 1e-12));
}

TEST_CASE("probe search finds a count that meets the recall goal", "[engine]") {
  const Fixture f = make_fixture(false);
  const GroundTruth gt = exact_ground_truth(f.data, f.queries, 10);

  const auto np = engine::min_nprobe_for_recall(f.ix, f.queries, gt, 10, 0.7);
  REQUIRE(np.has_value());
  CHECK(*np >= 1);
  CHECK(*np <= f.ix.params.nlist);
  CHECK(engine::evaluate_recall(f.ix, f.queries, gt, *np, 10) >= 0.7);

  const auto tiny = engine::min_nprobe_for_recall(f.ix, f.queries, gt, 10, 0.0);
  REQUIRE(tiny.has_value());
  CHECK(*tiny == 1);

  CHECK_FALSE(
      engine::min_nprobe_for_recall(f.ix, f.queries, gt, 10, 1.5).has_value());
}

TEST_CASE("engine calls validate their arguments", "[engine]") {
  const Fixture f = make_fixture(false);
  CHECK_THROWS_AS(engine::search(f.ix, qrow(f.queries, 0), 0, 5),
                  InvalidArgument);
  CHECK_THROWS_AS(
      engine::search(f.ix, qrow(f.queries, 0), f.ix.params.nlist + 1, 5),
      InvalidArgument);
  CHECK_THROWS_AS(engine::search(f.ix, qrow(f.queries, 0), 2, 0),
                  InvalidArgument);
  const std::vector<float> short_q(7, 0.0f);
  CHECK_THROWS_AS(engine::search(f.ix, short_q, 2, 5), InvalidArgument);
  CHECK_THROWS_AS(engine::build_lut(f.ix, short_q, 0), InvalidArgument);
  CHECK_THROWS_AS(engine::build_lut(f.ix, qrow(f.queries, 0), 99),
                  InvalidArgument);

  GroundTruth gt;
  gt.k_gt = 0;
  gt.count = f.queries.count();
  CHECK_THROWS_AS(engine::evaluate_recall(f.ix, f.queries, gt, 1, 5),
                  InvalidArgument);
}
