#include <doctest.h>

#include <random>
#include <sstream>

#include <json.hpp>

#include "bitext/cli.hpp"
#include "bitext/corpus_io.hpp"
#include "bitext/finetune.hpp"
#include "bitext/knn_aligner.hpp"
#include "bitext/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace bitext;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "bitext");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

struct Fixture {
  testutil::TempDir dir;
  std::string src, tgt;
  Fixture() {
    SyntheticConfig sc;
    sc.count = 120;
    sc.dim = 16;
    sc.noise = 0.3;
    const auto task = make_synthetic_task(sc);
    src = (dir / "src.emb1").string();
    tgt = (dir / "tgt.emb1").string();
    save_embeddings(task.sources, src);
    save_embeddings(task.targets, tgt);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("align: self-alignment is perfect") {
  Fixture f;
  const auto r = run({"--format", "json", "align", "--queries", f.tgt, "--targets", f.tgt, "--out",
                      f.path("a.tsv"), "--k", "3"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["top_k_accuracy"]["1"] == 1.0);
  CHECK(j["precision"] == 1.0);
  CHECK(j["command"] == "align");
  CHECK(j.contains("config_hash"));
  CHECK(lines_of(testutil::read_bytes(f.path("a.tsv"))).size() == 120);
}

TEST_CASE("align: dimension mismatch is a validation failure naming both dims") {
  Fixture f;
  std::mt19937_64 rng(1);
  save_embeddings(oracle::random_matrix(10, 12, rng), f.path("d12.emb1"));
  const auto r = run({"align", "--queries", f.tgt, "--targets", f.path("d12.emb1"), "--out", f.path("a.tsv")});
  CHECK(r.code == 2);
  CHECK(r.err.find("16") != std::string::npos);
  CHECK(r.err.find("12") != std::string::npos);
}

TEST_CASE("align: threshold with euclidean and missing files") {
  Fixture f;
  CHECK(run({"align", "--queries", f.tgt, "--targets", f.tgt, "--out", f.path("a.tsv"), "--metric",
             "euclidean", "--threshold", "0.5"})
            .code == 2);
  CHECK(run({"align", "--queries", f.path("nope.emb1"), "--targets", f.tgt, "--out", f.path("a.tsv")}).code ==
        1);
  CHECK(run({"align", "--bogus"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
}

TEST_CASE("align: planted fixture reports exactly 7 aligned at 0.7") {
  Fixture f;
  const std::size_t n = 20;
  std::vector<float> q(n * n, 0.0f), t(n * n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    t[i * n + i] = 1.0f;
    const double c = i < 7 ? 0.75 : 0.6;
    q[i * n + i] = static_cast<float>(c);
    const double rest = std::sqrt((1.0 - c * c) / static_cast<double>(n - 1));
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) q[i * n + j] = static_cast<float>(rest);
    }
  }
  save_embeddings(EmbeddingMatrix(n, n, q), f.path("q.emb1"));
  save_embeddings(EmbeddingMatrix(n, n, t), f.path("t.emb1"));
  const auto r = run({"--format", "json", "align", "--queries", f.path("q.emb1"), "--targets",
                      f.path("t.emb1"), "--out", f.path("a.tsv"), "--threshold", "0.7"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["aligned_count"] == 7);
  CHECK(lines_of(testutil::read_bytes(f.path("a.tsv"))).size() == 7);
}

TEST_CASE("eval: candidates and alignment files") {
  Fixture f;
  REQUIRE(run({"align", "--queries", f.tgt, "--targets", f.src, "--out", f.path("a.tsv"), "--candidates",
               f.path("c.tsv"), "--k", "3"})
              .code == 0);
  const auto r = run({"eval", "--candidates", f.path("c.tsv"), "--alignment", f.path("a.tsv"), "--gold",
                      "identity", "--ks", "1,3", "--out", f.path("e.csv")});
  REQUIRE(r.code == 0);
  const auto rows = lines_of(testutil::read_bytes(f.path("e.csv")));
  REQUIRE(rows.size() == 1 + 2 + 21);
  CHECK(rows[0] == "measure,k_or_threshold,accuracy,precision,recall,f1,aligned_count");
  CHECK(rows[3].rfind("threshold,-0.2,", 0) == 0);
  // Thresholds strictly ascending.
  double previous = -1.0;
  for (std::size_t i = 3; i < rows.size(); ++i) {
    const auto start = rows[i].find(',') + 1;
    const double th = std::stod(rows[i].substr(start, rows[i].find(',', start) - start));
    CHECK(th > previous);
    previous = th;
  }
}

TEST_CASE("finetune, apply and curve") {
  Fixture f;
  const std::vector<std::string> train{"--seed", "3", "finetune", "--source", f.src, "--target", f.tgt,
                                       "--hidden", "8", "--epochs", "5", "--out"};
  auto first = train;
  first.push_back(f.path("m1.adp1"));
  auto second = train;
  second.push_back(f.path("m2.adp1"));
  second.insert(second.end(), {"--history", f.path("h.csv")});
  REQUIRE(run(first).code == 0);
  REQUIRE(run(second).code == 0);
  CHECK(testutil::read_bytes(f.path("m1.adp1")) == testutil::read_bytes(f.path("m2.adp1")));
  CHECK(std::filesystem::file_size(f.path("m1.adp1")) == 13 + 4 * (2 * 16 * 8 + 8 + 16));
  const auto history = lines_of(testutil::read_bytes(f.path("h.csv")));
  CHECK(history.size() == 1 + 5 + 1);

  REQUIRE(run({"apply", "--model", f.path("m1.adp1"), "--in", f.src, "--out", f.path("ad.emb1")}).code == 0);
  const auto adapted = load_embeddings(f.path("ad.emb1"));
  CHECK(adapted.count() == 120);
  CHECK(adapted.bit_equal(apply(load_adapter(f.path("m1.adp1")), load_embeddings(f.src))));

  const auto c = run({"curve", "--queries", f.tgt, "--targets", f.src, "--model", f.path("m1.adp1"), "--out",
                      f.path("curve.csv"), "--thresholds", "0.1,0.5,-0.2"});
  REQUIRE(c.code == 0);
  const auto rows = lines_of(testutil::read_bytes(f.path("curve.csv")));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "threshold,precision,recall,f1,aligned_count");
  CHECK(rows[1].rfind("-0.2,", 0) == 0);
}

TEST_CASE("finetune: divergence exits 1") {
  Fixture f;
  const auto r = run({"finetune", "--source", f.src, "--target", f.tgt, "--hidden", "4", "--epochs", "2",
                      "--optimizer", "sgd", "--lr", "1e300", "--out", f.path("m.adp1")});
  CHECK(r.code == 1);
  CHECK(r.err.find("epoch 1") != std::string::npos);
}

TEST_CASE("sweep writes the four outputs") {
  Fixture f;
  const auto out_dir = f.path("sweep");
  const auto r = run({"--threads", "2", "sweep", "--source", f.src, "--target", f.tgt, "--folds", "2",
                      "--fractions", "0.5,1.0", "--hidden-sizes", "4", "--epochs", "2", "--out-dir", out_dir});
  REQUIRE(r.code == 0);
  for (const char* name : {"cells.csv", "summary.csv", "summary.json", "plan.json"}) {
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / name));
  }
  const auto cells = lines_of(testutil::read_bytes(std::filesystem::path(out_dir) / "cells.csv"));
  CHECK(cells.size() == 1 + 2 * 2 * 1 * (2 + 21));
}
