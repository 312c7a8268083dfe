#include <catch2/catch_amalgamated.hpp>

#include <annforge/index.hpp>
#include <annforge/io.hpp>

#include "support/generators.hpp"
#include "support/tempdir.hpp"

using namespace annforge;
using namespace testsupport;

TEST_CASE("fvecs reader recovers rows and assigns sequential ids", "[io]") {
  TempDir tmp;
  const std::vector<std::vector<float>> rows = {
      {1.5f, -2.0f, 0.25f}, {0.0f, 3.0f, -1.0f}, {7.0f, 8.0f, 9.0f}};
  write_bytes(tmp.file("a.fvecs"), fvecs_bytes(rows));

  const VectorSet vs = io::read_fvecs(tmp.file("a.fvecs"));
  REQUIRE(vs.dim == 3);
  REQUIRE(vs.count() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(vs.ids[i] == i);
    for (std::uint32_t t = 0; t < 3; ++t)
      CHECK(vs.data[i * 3 + t] == rows[i][t]);
  }
}

TEST_CASE("bvecs reader widens bytes to floats", "[io]") {
  TempDir tmp;
  write_bytes(tmp.file("a.bvecs"), bvecs_bytes({{0, 128, 255}, {1, 2, 3}}));
  const VectorSet vs = io::read_bvecs(tmp.file("a.bvecs"));
  REQUIRE(vs.dim == 3);
  REQUIRE(vs.count() == 2);
  CHECK(vs.data[0] == 0.0f);
  CHECK(vs.data[1] == 128.0f);
  CHECK(vs.data[2] == 255.0f);
  CHECK(vs.data[5] == 3.0f);
}

TEST_CASE("ivecs reader yields ground truth rows", "[io]") {
  TempDir tmp;
  write_bytes(tmp.file("gt.ivecs"), ivecs_bytes({{4, 2, 9}, {1, 0, 3}}));
  const GroundTruth gt = io::read_ivecs(tmp.file("gt.ivecs"));
  REQUIRE(gt.k_gt == 3);
  REQUIRE(gt.count == 2);
  CHECK(gt.ids[0] == 4);
  CHECK(gt.ids[5] == 3);
}

TEST_CASE("vector readers reject malformed files", "[io]") {
  TempDir tmp;

  SECTION("dimension change mid-file") {
    write_bytes(tmp.file("bad.fvecs"), fvecs_bytes({{1.0f, 2.0f}, {3.0f}}));
    CHECK_THROWS_AS(io::read_fvecs(tmp.file("bad.fvecs")), FormatError);
  }
  SECTION("truncated payload") {
    auto bytes = fvecs_bytes({{1.0f, 2.0f}});
    bytes.pop_back();
    write_bytes(tmp.file("bad.fvecs"), bytes);
    CHECK_THROWS_AS(io::read_fvecs(tmp.file("bad.fvecs")), FormatError);
  }
  SECTION("zero dimension") {
    std::vector<std::uint8_t> bytes;
    append_u32(bytes, 0);
    write_bytes(tmp.file("bad.fvecs"), bytes);
    CHECK_THROWS_AS(io::read_fvecs(tmp.file("bad.fvecs")), FormatError);
  }
  SECTION("empty file") {
    write_bytes(tmp.file("bad.fvecs"), {});
    CHECK_THROWS_AS(io::read_fvecs(tmp.file("bad.fvecs")), FormatError);
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(io::read_fvecs(tmp.file("absent.fvecs")), IoError);
  }
  SECTION("duplicate ids within a ground-truth row") {
    write_bytes(tmp.file("bad.ivecs"), ivecs_bytes({{1, 1, 2}}));
    CHECK_THROWS_AS(io::read_ivecs(tmp.file("bad.ivecs")), FormatError);
  }
}

namespace {

index::IVFIndex small_index(bool opq) {
  const VectorSet data = make_blobs(600, 8, 4, 99);
  index::BuildOptions opts;
  opts.kmeans_iters = 10;
  opts.pq_iters = 6;
  opts.opq_outer_iters = 2;
  return index::build_ivf(data, 4, 2, opq, 7, opts);
}

bool same_index(const index::IVFIndex& a, const index::IVFIndex& b) {
  return a.params.nlist == b.params.nlist && a.params.m == b.params.m &&
         a.params.dim == b.params.dim &&
         a.params.opq_enabled == b.params.opq_enabled &&
         a.coarse.values == b.coarse.values &&
         a.codebook.centroids == b.codebook.centroids &&
         a.cell_offsets == b.cell_offsets && a.ids == b.ids &&
         a.codes == b.codes &&
         a.rotation.has_value() == b.rotation.has_value() &&
         (!a.rotation || a.rotation->values == b.rotation->values);
}

}  // namespace

TEST_CASE("index container round-trips bit for bit", "[io]") {
  TempDir tmp;
  const bool opq = GENERATE(false, true);
  const index::IVFIndex ix = small_index(opq);

  io::save_index(ix, tmp.file("a.idx"));
  const index::IVFIndex back = io::load_index(tmp.file("a.idx"));
  CHECK(same_index(ix, back));

  io::save_index(back, tmp.file("b.idx"));
  CHECK(read_bytes(tmp.file("a.idx")) == read_bytes(tmp.file("b.idx")));
}

TEST_CASE("index container rejects corruption", "[io]") {
  TempDir tmp;
  const index::IVFIndex ix = small_index(false);
  io::save_index(ix, tmp.file("a.idx"));
  auto bytes = read_bytes(tmp.file("a.idx"));

  SECTION("flipped payload byte fails the checksum") {
    bytes[bytes.size() / 2] ^= 0x40;
    write_bytes(tmp.file("bad.idx"), bytes);
    CHECK_THROWS_AS(io::load_index(tmp.file("bad.idx")), FormatError);
  }
  SECTION("bad magic") {
    bytes[0] ^= 0xff;
    write_bytes(tmp.file("bad.idx"), bytes);
    CHECK_THROWS_AS(io::load_index(tmp.file("bad.idx")), FormatError);
  }
  SECTION("truncation") {
    bytes.resize(bytes.size() - 9);
    write_bytes(tmp.file("bad.idx"), bytes);
    CHECK_THROWS_AS(io::load_index(tmp.file("bad.idx")), FormatError);
  }
  SECTION("trailing garbage") {
    bytes.push_back(0xee);
    write_bytes(tmp.file("bad.idx"), bytes);
    CHECK_THROWS_AS(io::load_index(tmp.file("bad.idx")), FormatError);
  }
}

TEST_CASE("latency history round-trips exactly", "[io]") {
  TempDir tmp;
  const std::vector<double> vals = {1.5, 2.25, 10.0, 0.0078125, 123456.789};
  io::save_latency_history(vals, tmp.file("h.txt"));
  CHECK(io::load_latency_history(tmp.file("h.txt")) == vals);
}

TEST_CASE("latency history rejects bad content", "[io]") {
  TempDir tmp;
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(tmp.file(name));
    out << text;
  };

  write_text("neg.txt", "1.0\n-2.0\n");
  CHECK_THROWS_AS(io::load_latency_history(tmp.file("neg.txt")), FormatError);
  write_text("junk.txt", "1.0\npotato\n");
  CHECK_THROWS_AS(io::load_latency_history(tmp.file("junk.txt")), FormatError);
  write_text("empty.txt", "");
  CHECK_THROWS_AS(io::load_latency_history(tmp.file("empty.txt")), FormatError);
}
