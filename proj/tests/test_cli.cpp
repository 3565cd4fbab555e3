#include <doctest.h>

#include "oracles.hpp"
#include "sasv/checkpoint.hpp"
#include "sasv/cli.hpp"
#include "sasv/data.hpp"
#include "sasv/metrics.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sasv;
namespace fs = std::filesystem;

namespace {

fs::path tmp_root() {
  const char *env = std::getenv("SASV_TEST_TMP");
  fs::path p = env ? fs::path(env) : fs::temp_directory_path() / "sasv_cli_test";
  fs::create_directories(p);
  return p;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const fs::path &p, const std::string &text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

// A small corpus shared by the tests below.
const fs::path &corpus() {
  static const fs::path dir = [] {
    const fs::path d = tmp_root() / "corpus";
    fs::remove_all(d);
    const auto r = cli({"gen-synth", "--seed", "5", "--out", d.string(), "--set", "synth.n_speakers=10",
                        "--set", "synth.n_bonafide_tests_per_spk=6", "--set",
                        "synth.n_spoof_tests_per_spk=4"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::vector<std::string> data_flags() {
  const auto &d = corpus();
  return {"--asv-store", (d / "asv.emb").string(), "--cm-store", (d / "cm.emb").string(),
          "--train-trials", (d / "train.trials").string(), "--dev-trials", (d / "dev.trials").string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string> &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<std::string> kSmallNet{"--set", "model.hidden=[8,4]", "--set", "train.max_epochs=3",
                                         "--set", "train.batch_size=16"};

} // namespace

TEST_CASE("gen-synth") {
  const auto root = tmp_root();
  const auto a = root / "gen_a", b = root / "gen_b", c = root / "gen_c";
  for (const auto &p : {a, b, c})
    fs::remove_all(p);
  REQUIRE(cli({"gen-synth", "--seed", "9", "--out", a.string()}).code == 0);
  REQUIRE(cli({"gen-synth", "--seed", "9", "--out", b.string()}).code == 0);
  for (const char *f : {"asv.emb", "cm.emb", "train.trials", "dev.trials", "manifest.json"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  // Rerun from the manifest alone.
  REQUIRE(cli({"gen-synth", "--config", (a / "manifest.json").string(), "--out", c.string()}).code == 0);
  for (const char *f : {"asv.emb", "cm.emb", "train.trials", "dev.trials", "manifest.json"})
    CHECK(slurp(a / f) == slurp(c / f));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["synth"]["n_speakers"] == 50);

  SUBCASE("errors") {
    auto r = cli({"gen-synth", "--out", (root / "noseed").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("seed") != std::string::npos);
    r = cli({"gen-synth", "--seed", "1", "--out", (root / "bad").string(), "--set", "synth.n_speakers=-3"});
    CHECK(r.code != 0);
    CHECK(r.err.find("n_speakers") != std::string::npos);
    r = cli({"gen-synth", "--seed", "1", "--out", (root / "bad").string(), "--set", "synth.bogus=1"});
    CHECK(r.code != 0);
    CHECK(r.err.find("bogus") != std::string::npos);
    r = cli({"gen-synth", "--seed", "1", "--out", (root / "bad").string(), "--set", "synth.n_speakers=\"ten\""});
    CHECK(r.code != 0);
    CHECK(cli({"frobnicate"}).code != 0);
  }
}

TEST_CASE("score-fusion") {
  const auto &d = corpus();
  const auto root = tmp_root();
  const auto asv = read_embeddings(d / "asv.emb", StoreRole::Asv);
  const auto cm = read_embeddings(d / "cm.emb", StoreRole::Cm);
  const auto trials = read_trials(d / "dev.trials");

  // CM probabilities from the projection on the CM axis.
  std::vector<ScoreRecord> cm_scores;
  for (const auto &t : trials)
    cm_scores.push_back({t, static_cast<double>(oracle::sigmoid(cm.at(t.test_id).values()[0]))});
  write_scores(root / "cm.scores", cm_scores);

  const auto out = root / "sf" / "fused.scores";
  auto r = cli({"score-fusion", "--asv-store", (d / "asv.emb").string(), "--cm-scores",
                (root / "cm.scores").string(), "--trials", (d / "dev.trials").string(), "--out",
                out.string()});
  REQUIRE(r.code == 0);
  const auto rep = nlohmann::json::parse(slurp(fs::path(out.string() + ".report.json")));
  CHECK(rep["min_adcf"].get<double>() < 0.05);
  CHECK(rep["counts"]["spoof"].get<std::size_t>() > 0);
  CHECK(fs::exists(out.string() + ".config.json"));

  // Written scores equal the hand formula to print precision.
  const auto got = read_scores(out);
  REQUIRE(got.size() == trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const double p_asv = sigmoid(cosine_similarity(asv.at(trials[i].enroll_id), asv.at(trials[i].test_id)));
    CHECK(std::fabs(got[i].score - (p_asv + cm_scores[i].score) / 2) < 1e-9);
  }

  SUBCASE("constant CM probability reduces to ASV ranking") {
    std::vector<ScoreRecord> ones;
    for (const auto &t : trials)
      ones.push_back({t, 1.0});
    write_scores(root / "ones.scores", ones);
    const auto o = root / "sf" / "ones_fused.scores";
    REQUIRE(cli({"score-fusion", "--asv-store", (d / "asv.emb").string(), "--cm-scores",
                 (root / "ones.scores").string(), "--trials", (d / "dev.trials").string(), "--out",
                 o.string()})
                .code == 0);
    const auto fused = nlohmann::json::parse(slurp(fs::path(o.string() + ".report.json")));
    LabeledScores asv_only;
    for (const auto &t : trials) {
      asv_only.scores.push_back(sigmoid(cosine_similarity(asv.at(t.enroll_id), asv.at(t.test_id))));
      asv_only.labels.push_back(*t.label);
    }
    CHECK(fused["min_adcf"].get<double>() == doctest::Approx(min_adcf(asv_only, CostModel{}).value).epsilon(1e-12));
  }
  SUBCASE("errors") {
    spit(root / "empty.trials", "");
    r = cli({"score-fusion", "--asv-store", (d / "asv.emb").string(), "--cm-scores",
             (root / "cm.scores").string(), "--trials", (root / "empty.trials").string(), "--out",
             (root / "sf" / "x").string()});
    CHECK(r.code == 1);
    r = cli({"score-fusion", "--asv-store", (d / "asv.emb").string(), "--trials",
             (d / "dev.trials").string(), "--out", (root / "sf" / "x").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("--cm-scores") != std::string::npos);
  }
}

TEST_CASE("train, eval and CM head") {
  const auto &d = corpus();
  const auto root = tmp_root();
  const auto t1 = root / "train1", t2 = root / "train2";
  fs::remove_all(t1);
  fs::remove_all(t2);
  auto args = cat(cat({"train", "--seed", "4"}, data_flags()), kSmallNet);
  REQUIRE(cli(cat(args, {"--out", t1.string()})).code == 0);
  REQUIRE(cli(cat(args, {"--out", t2.string()})).code == 0);
  for (const char *f : {"model.ckpt", "last.ckpt", "train.log", "report.json", "dev_scores.txt"})
    CHECK(slurp(t1 / f) == slurp(t2 / f));
  // config.json echoes the output directory, which differs.
  auto c1 = nlohmann::json::parse(slurp(t1 / "config.json"));
  auto c2 = nlohmann::json::parse(slurp(t2 / "config.json"));
  c1.erase("output_dir");
  c2.erase("output_dir");
  CHECK(c1 == c2);
  CHECK(c1["train"]["optimizer"] == "adam");

  const auto rep = nlohmann::json::parse(slurp(t1 / "report.json"));
  CHECK(rep["epochs"].size() == 4);

  SUBCASE("eval reproduces dev scores and its metrics match the score file") {
    const auto e1 = root / "eval" / "a.scores", e2 = root / "eval" / "b.scores";
    auto ev = cat({"eval", "--checkpoint", (t1 / "model.ckpt").string(), "--trials", (d / "dev.trials").string(),
                   "--asv-store", (d / "asv.emb").string(), "--cm-store", (d / "cm.emb").string()},
                  {});
    REQUIRE(cli(cat(ev, {"--out", e1.string()})).code == 0);
    REQUIRE(cli(cat(ev, {"--out", e2.string()})).code == 0);
    CHECK(slurp(e1) == slurp(e2));
    CHECK(slurp(e1) == slurp(t1 / "dev_scores.txt"));
    const auto erep = nlohmann::json::parse(slurp(fs::path(e1.string() + ".report.json")));
    CHECK(erep["min_adcf"].get<double>() == rep["best_dev_adcf"].get<double>());
    CHECK(erep.contains("argmin_tau"));
    CHECK(erep["counts"]["target"].get<std::size_t>() > 0);
    // Independent sweep over the printed scores.
    const auto recs = attach_labels(read_scores(e1), read_trials(d / "dev.trials"));
    std::vector<double> s;
    std::vector<TrialLabel> l;
    for (const auto &r : recs) {
      s.push_back(r.score);
      l.push_back(*r.trial.label);
    }
    CHECK(erep["min_adcf"].get<double>() == doctest::Approx(oracle::exact_min(s, l, CostModel{}, true)).epsilon(1e-12));
  }
  SUBCASE("resume with zero epochs") {
    const auto t3 = root / "train3";
    fs::remove_all(t3);
    REQUIRE(cli(cat(cat({"train", "--seed", "4"}, data_flags()),
                    {"--set", "train.max_epochs=0", "--set", "model.init_checkpoint=\"" + (t1 / "model.ckpt").string() + "\"",
                     "--out", t3.string()}))
                .code == 0);
    CHECK(slurp(t3 / "dev_scores.txt") == slurp(t1 / "dev_scores.txt"));
    CHECK(slurp(t3 / "model.ckpt") == slurp(t1 / "model.ckpt"));
  }
  SUBCASE("CM head drives score fusion") {
    // The random init already separates this tiny dev set perfectly, so the
    // selected checkpoint is epoch 0; the fully trained head is last.ckpt.
    const auto cmdir = root / "cmhead";
    fs::remove_all(cmdir);
    REQUIRE(cli(cat(cat({"train", "--seed", "2"}, data_flags()),
                    {"--set", "model.architecture=\"single\"", "--set", "model.input=[\"test_cm\"]", "--set",
                     "model.hidden=[4]", "--set", "train.target=\"cm\"", "--set", "train.loss=\"bce\"", "--set",
                     "train.lr=0.01", "--set", "train.max_epochs=5", "--out", cmdir.string()}))
                .code == 0);
    const auto o = root / "sf" / "cmhead.scores";
    const auto r = cli({"score-fusion", "--asv-store", (d / "asv.emb").string(), "--cm-store",
                        (d / "cm.emb").string(), "--cm-model", (cmdir / "last.ckpt").string(), "--trials",
                        (d / "dev.trials").string(), "--out", o.string()});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(slurp(fs::path(o.string() + ".report.json")))["min_adcf"].get<double>() < 0.05);
  }
  SUBCASE("errors") {
    auto r = cli(cat(cat({"train"}, data_flags()), {"--out", (root / "x").string()}));
    CHECK(r.code == 1);
    CHECK(r.err.find("seed") != std::string::npos);
    r = cli(cat(cat({"train", "--seed", "1"}, data_flags()),
                {"--out", (root / "x").string(), "--set", "train.loss=\"hinge\""}));
    CHECK(r.code == 1);
    const auto &d2 = corpus();
    r = cli({"train", "--seed", "1", "--out", (root / "x").string(), "--asv-store", "/nonexistent/asv.emb",
             "--train-trials", (d2 / "train.trials").string(), "--dev-trials", (d2 / "dev.trials").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("nonexistent") != std::string::npos);
  }
}

TEST_CASE("fuse") {
  const auto &d = corpus();
  const auto root = tmp_root() / "fuse";
  fs::create_directories(root);
  const auto trials = read_trials(d / "dev.trials");
  std::vector<ScoreRecord> a, b;
  for (const auto &t : trials) {
    a.push_back({{t.enroll_id, t.test_id, std::nullopt}, 0.2});
    b.push_back({{t.enroll_id, t.test_id, std::nullopt}, 0.8});
  }
  write_scores(root / "a.scores", a);
  write_scores(root / "b.scores", b);

  REQUIRE(cli({"fuse", (root / "a.scores").string(), (root / "b.scores").string(), "--out",
               (root / "ab.scores").string()})
              .code == 0);
  for (const auto &r : read_scores(root / "ab.scores"))
    CHECK(r.score == 0.5);

  std::vector<ScoreRecord> mixed;
  for (std::size_t i = 0; i < trials.size(); ++i)
    mixed.push_back({{trials[i].enroll_id, trials[i].test_id, std::nullopt}, static_cast<double>(i % 97) / 96.0});
  write_scores(root / "m.scores", mixed);
  REQUIRE(cli({"fuse", (root / "m.scores").string(), (root / "m.scores").string(), "--out",
               (root / "self.scores").string(), "--trials", (d / "dev.trials").string()})
              .code == 0);
  CHECK(slurp(root / "self.scores") == slurp(root / "m.scores"));
  CHECK(nlohmann::json::parse(slurp(root / "self.scores.report.json"))["labeled"] == true);

  b.pop_back();
  b.push_back({{"zz", "yy", std::nullopt}, 0.3});
  write_scores(root / "c.scores", b);
  const auto r = cli({"fuse", (root / "a.scores").string(), (root / "c.scores").string(), "--out",
                      (root / "ac.scores").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("2 differences") != std::string::npos);
  CHECK(r.err.find("zz yy") != std::string::npos);
}

TEST_CASE("histogram") {
  const auto &d = corpus();
  const auto root = tmp_root() / "hist";
  fs::create_directories(root);
  const auto trials = read_trials(d / "dev.trials");
  std::vector<ScoreRecord> recs;
  for (std::size_t i = 0; i < trials.size(); ++i)
    recs.push_back({trials[i], static_cast<double>(i % 101) / 100.0});
  write_scores(root / "s.scores", recs);
  REQUIRE(cli({"histogram", "--scores", (root / "s.scores").string(), "--trials", (d / "dev.trials").string(),
               "--out", (root / "h.csv").string()})
              .code == 0);
  std::istringstream csv(slurp(root / "h.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "bin_low,bin_high,target,nontarget,spoof");
  std::size_t rows = 0, total = 0;
  double prev_high = 0.0;
  while (std::getline(csv, line)) {
    double lo, hi;
    std::size_t t, n, s;
    char c;
    std::istringstream ls(line);
    ls >> lo >> c >> hi >> c >> t >> c >> n >> c >> s;
    CHECK(lo == doctest::Approx(prev_high).epsilon(1e-12));
    CHECK(hi - lo == doctest::Approx(1.0 / 50).epsilon(1e-9));
    prev_high = hi;
    total += t + n + s;
    ++rows;
  }
  CHECK(rows == 50);
  CHECK(total == trials.size());
  CHECK(prev_high == 1.0);

  spit(root / "unl.trials", "spk0001 x\n");
  CHECK(cli({"histogram", "--scores", (root / "s.scores").string(), "--trials", (root / "unl.trials").string(),
             "--out", (root / "u.csv").string()})
            .code == 1);
}

TEST_CASE("version and help") {
  auto r = cli({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find("sasv ") == 0);
  r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("gen-synth") != std::string::npos);
}
