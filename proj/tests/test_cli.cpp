#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvp/checkpoint.hpp"
#include "mvp/dataset.hpp"
#include "mvp/training.hpp"

namespace fs = std::filesystem;
using namespace mvp;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunResult run_cli(const std::string& args, const fs::path& scratch) {
  static std::atomic<int> counter{0};
  const int id = counter++;
  const fs::path out_path = scratch / ("stdout_" + std::to_string(id));
  const fs::path err_path = scratch / ("stderr_" + std::to_string(id));
  const std::string cmd = std::string(MVP_CLI_PATH) + " " + args + " > " + out_path.string() +
                          " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path.string());
  result.err = slurp(err_path.string());
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("mvp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str(const std::string& leaf) const { return (path / leaf).string(); }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool same_file_bytes(const std::string& a, const std::string& b) {
  return slurp(a) == slurp(b);
}

// Small dataset shared by the pipeline checks: 3 identities, 3 views, 1 gain.
std::string kSmallGen = "--seed 21 --identities 3 --views -15,0,15 --illums 1 --size 12";
std::string kSmallHidden = "'8,8(3),8(3),12'";  // quoted: the parens must not reach the shell

}  // namespace

TEST_CASE("help and usage errors") {
  TempDir tmp;
  RunResult help = run_cli("--help", tmp.path);
  CHECK(help.code == 0);
  CHECK(help.out.find("multi-view perceptron") != std::string::npos);
  CHECK(help.out.find("gen-data") != std::string::npos);
  CHECK(help.out.find("gradcheck") != std::string::npos);

  CHECK(run_cli("", tmp.path).code == 1);                      // subcommand required
  CHECK(run_cli("no-such-command", tmp.path).code == 1);       // unknown subcommand
  CHECK(run_cli("train --out x", tmp.path).code == 1);         // missing required --data
  CHECK(run_cli("gen-data --identities 2", tmp.path).code == 1);  // missing required --out

  RunResult bad_protocol = run_cli("eval bogus --metrics none.csv", tmp.path);
  CHECK(bad_protocol.code == 1);
  CHECK(bad_protocol.err.find("unknown protocol") != std::string::npos);
}

TEST_CASE("gen-data writes the dataset and is byte-reproducible") {
  TempDir tmp;
  const std::string flags = "gen-data --seed 77 --identities 2 --views -15,0,15 --illums 1 "
                            "--size 16 --out ";
  RunResult first = run_cli(flags + tmp.str("a"), tmp.path);
  CHECK(first.code == 0);
  CHECK(first.out.find("wrote 6 images") != std::string::npos);

  const DatasetManifest manifest = read_manifest(tmp.str("a") + "/manifest.txt");
  CHECK(manifest.records.size() == 6);
  CHECK(manifest.identity_count == 2);
  CHECK(manifest.views == std::vector<double>{-15.0, 0.0, 15.0});
  CHECK(manifest.image_size == 16);
  for (const ManifestRecord& rec : manifest.records) {
    CHECK(fs::exists(fs::path(tmp.str("a")) / rec.path));
  }

  CHECK(run_cli(flags + tmp.str("b"), tmp.path).code == 0);
  CHECK(same_file_bytes(tmp.str("a") + "/manifest.txt", tmp.str("b") + "/manifest.txt"));
  for (const ManifestRecord& rec : manifest.records) {
    CHECK(same_file_bytes((fs::path(tmp.str("a")) / rec.path).string(),
                          (fs::path(tmp.str("b")) / rec.path).string()));
  }
}

TEST_CASE("gen-data default configuration renders the full corpus") {
  TempDir tmp;
  RunResult result = run_cli("gen-data --out " + tmp.str("full"), tmp.path);
  CHECK(result.code == 0);
  CHECK(result.out.find("wrote 1050 images") != std::string::npos);
  const DatasetManifest manifest = read_manifest(tmp.str("full") + "/manifest.txt");
  CHECK(manifest.records.size() == 1050);
  CHECK(manifest.identity_count == 50);
  CHECK(manifest.views.size() == 7);
  CHECK(manifest.illums.size() == 3);
}

TEST_CASE("train, resume, reconstruct, estimate-view, eval pipeline") {
  TempDir tmp;
  REQUIRE(run_cli("gen-data " + kSmallGen + " --out " + tmp.str("data"), tmp.path).code == 0);

  const std::string train_flags = " --data " + tmp.str("data") + " --hidden " + kSmallHidden +
                                  " --samples 3 --lr 0.01 --batch-size 8 --seed 5";

  SUBCASE("epochs 0 writes only the initial checkpoint") {
    RunResult result = run_cli("train --epochs 0 --out " + tmp.str("e0") + train_flags, tmp.path);
    CHECK(result.code == 0);
    CHECK(fs::exists(tmp.str("e0") + "/ckpt_epoch0.mvpc"));
    CHECK(!fs::exists(tmp.str("e0") + "/ckpt_epoch1.mvpc"));
    CHECK(lines_of(slurp(tmp.str("e0") + "/metrics.csv")).size() == 1);  // header only
  }

  SUBCASE("training is byte-reproducible and resume round-trips") {
    REQUIRE(run_cli("train --epochs 2 --out " + tmp.str("t1") + train_flags, tmp.path).code == 0);
    REQUIRE(run_cli("train --epochs 2 --out " + tmp.str("t2") + train_flags, tmp.path).code == 0);
    CHECK(same_file_bytes(tmp.str("t1") + "/ckpt_epoch2.mvpc", tmp.str("t2") + "/ckpt_epoch2.mvpc"));
    const std::vector<EpochMetrics> m1 = read_metrics_csv(tmp.str("t1") + "/metrics.csv");
    const std::vector<EpochMetrics> m2 = read_metrics_csv(tmp.str("t2") + "/metrics.csv");
    REQUIRE(m1.size() == 2);
    REQUIRE(m2.size() == 2);
    for (Index i = 0; i < m1.size(); ++i) {  // everything but wall time is deterministic
      CHECK(m1[i].epoch == m2[i].epoch);
      CHECK(m1[i].mean_loss == m2[i].mean_loss);
      CHECK(m1[i].elbo_estimate == m2[i].elbo_estimate);
      CHECK(m1[i].max_weight_median == m2[i].max_weight_median);
      CHECK(m1[i].weight_sparsity_fraction == m2[i].weight_sparsity_fraction);
    }

    // Resuming with zero epochs re-saves the loaded parameters verbatim.
    RunResult resumed = run_cli("train --epochs 0 --resume " + tmp.str("t1") + "/ckpt_epoch2.mvpc" +
                                    " --out " + tmp.str("t3") + train_flags,
                                tmp.path);
    CHECK(resumed.code == 0);
    CHECK(same_file_bytes(tmp.str("t1") + "/ckpt_epoch2.mvpc", tmp.str("t3") + "/ckpt_epoch0.mvpc"));

    const std::string ckpt = tmp.str("t1") + "/ckpt_epoch2.mvpc";
    const std::string probe = tmp.str("data") + "/id0/v1_l0.pgm";

    // reconstruct: all views, then one view, byte-stable across reruns.
    RunResult rec_all = run_cli("reconstruct --ckpt " + ckpt + " --input " + probe + " --out " +
                                    tmp.str("rec_all") + " --samples 4 --seed 3",
                                tmp.path);
    CHECK(rec_all.code == 0);
    for (const char* name : {"view_0.pgm", "view_1.pgm", "view_2.pgm", "spectrum.pgm"}) {
      CHECK(fs::exists(fs::path(tmp.str("rec_all")) / name));
    }
    RunResult rec_one = run_cli("reconstruct --ckpt " + ckpt + " --input " + probe + " --out " +
                                    tmp.str("rec_one") + " --views 1 --samples 4 --seed 3",
                                tmp.path);
    CHECK(rec_one.code == 0);
    CHECK(fs::exists(tmp.str("rec_one") + "/view_1.pgm"));
    CHECK(!fs::exists(tmp.str("rec_one") + "/view_0.pgm"));
    REQUIRE(run_cli("reconstruct --ckpt " + ckpt + " --input " + probe + " --out " +
                        tmp.str("rec_again") + " --views 1 --samples 4 --seed 3",
                    tmp.path)
                .code == 0);
    CHECK(same_file_bytes(tmp.str("rec_one") + "/view_1.pgm", tmp.str("rec_again") + "/view_1.pgm"));

    RunResult rec_bad = run_cli("reconstruct --ckpt " + ckpt + " --input " + probe + " --out " +
                                    tmp.str("rec_bad") + " --views 5",
                                tmp.path);
    CHECK(rec_bad.code == 1);
    CHECK(rec_bad.err.find("valid labels are 0..2") != std::string::npos);

    // estimate-view with a single candidate predicts that candidate everywhere.
    RunResult est = run_cli("estimate-view --ckpt " + ckpt + " --data " + tmp.str("data") +
                                " --candidates 0 --samples 2 --seed 4 --out " + tmp.str("est.csv"),
                            tmp.path);
    CHECK(est.code == 0);
    CHECK(est.out.find("MAE 10.000000 degrees over 9 images") != std::string::npos);
    const std::vector<std::string> est_lines = lines_of(slurp(tmp.str("est.csv")));
    REQUIRE(est_lines.size() == 10);
    CHECK(est_lines[0] == "path,true_view,predicted_view,error");
    CHECK(est_lines[1] == "id0/v0_l0.pgm,-15,0,15");
    CHECK(est_lines[2] == "id0/v1_l0.pgm,0,0,0");
    REQUIRE(run_cli("estimate-view --ckpt " + ckpt + " --data " + tmp.str("data") +
                        " --candidates 0 --samples 2 --seed 4 --out " + tmp.str("est2.csv"),
                    tmp.path)
                .code == 0);
    CHECK(same_file_bytes(tmp.str("est.csv"), tmp.str("est2.csv")));

    // eval recognition produces a deterministic report CSV.
    const std::string eval_flags = " --ckpt " + ckpt + " --data " + tmp.str("data") +
                                   " --train-identities 2 --samples 2 --seed 6";
    RunResult eval1 = run_cli("eval recognition --out " + tmp.str("rep1.csv") + eval_flags, tmp.path);
    CHECK(eval1.code == 0);
    const std::vector<std::string> rep_lines = lines_of(slurp(tmp.str("rep1.csv")));
    REQUIRE(!rep_lines.empty());
    CHECK(rep_lines[0] == "protocol,recognition");
    CHECK(eval1.out.find("recognition") != std::string::npos);
    REQUIRE(run_cli("eval recognition --out " + tmp.str("rep2.csv") + eval_flags, tmp.path).code ==
            0);
    CHECK(same_file_bytes(tmp.str("rep1.csv"), tmp.str("rep2.csv")));

    RunResult view_err = run_cli("eval view-error --out " + tmp.str("verr.csv") + eval_flags +
                                     " --pca-dims 4",
                                 tmp.path);
    CHECK(view_err.code == 0);
    const std::string verr = slurp(tmp.str("verr.csv"));
    CHECK(verr.find("protocol,view-error") != std::string::npos);
    CHECK(verr.find("mvp,") != std::string::npos);
    CHECK(verr.find("lr,") != std::string::npos);

    // Corrupting one payload byte must fail checksum verification with exit 3.
    std::string bytes = slurp(ckpt);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x20);
    std::ofstream(tmp.str("bad.mvpc"), std::ios::binary) << bytes;
    RunResult corrupt = run_cli("reconstruct --ckpt " + tmp.str("bad.mvpc") + " --input " + probe +
                                    " --out " + tmp.str("rec_corrupt"),
                                tmp.path);
    CHECK(corrupt.code == 3);
    CHECK(corrupt.err.find("verification error") != std::string::npos);
  }

  SUBCASE("config file supplies defaults and flags win") {
    std::ofstream(tmp.str("train.cfg")) << "epochs=1\nsamples=2\nlr=0.02\nbatch-size=8\n";
    RunResult from_cfg = run_cli("train --config " + tmp.str("train.cfg") + " --out " +
                                     tmp.str("cfg1") + " --data " + tmp.str("data") + " --hidden " +
                                     kSmallHidden + " --seed 5",
                                 tmp.path);
    CHECK(from_cfg.code == 0);
    CHECK(fs::exists(tmp.str("cfg1") + "/ckpt_epoch1.mvpc"));
    CHECK(!fs::exists(tmp.str("cfg1") + "/ckpt_epoch2.mvpc"));

    RunResult overridden = run_cli("train --config " + tmp.str("train.cfg") + " --epochs 2 --out " +
                                       tmp.str("cfg2") + " --data " + tmp.str("data") +
                                       " --hidden " + kSmallHidden + " --seed 5",
                                   tmp.path);
    CHECK(overridden.code == 0);
    CHECK(fs::exists(tmp.str("cfg2") + "/ckpt_epoch2.mvpc"));

    std::ofstream(tmp.str("bad.cfg")) << "epochs=1\nbogus=3\n";
    RunResult bad_key = run_cli("train --config " + tmp.str("bad.cfg") + " --out " +
                                    tmp.str("cfg3") + " --data " + tmp.str("data") + " --hidden " +
                                    kSmallHidden,
                                tmp.path);
    CHECK(bad_key.code == 2);
    CHECK(bad_key.err.find("unknown key 'bogus'") != std::string::npos);
  }
}

TEST_CASE("sparsity protocol reports saturated weights for single-sample training") {
  TempDir tmp;
  REQUIRE(run_cli("gen-data " + kSmallGen + " --out " + tmp.str("data"), tmp.path).code == 0);
  REQUIRE(run_cli("train --epochs 3 --samples 1 --out " + tmp.str("s1") + " --data " +
                      tmp.str("data") + " --hidden " + kSmallHidden +
                      " --lr 0.01 --batch-size 8 --seed 5",
                  tmp.path)
              .code == 0);

  RunResult result = run_cli("eval sparsity --metrics " + tmp.str("s1") + "/metrics.csv --out " +
                                 tmp.str("sparsity.csv"),
                             tmp.path);
  CHECK(result.code == 0);
  const std::vector<std::string> lines = lines_of(slurp(tmp.str("sparsity.csv")));
  REQUIRE(lines.size() >= 3);
  CHECK(lines[0] == "protocol,sparsity");
  bool found_weighted = false;
  for (const std::string& line : lines) {
    if (line.rfind("weighted,", 0) != 0) continue;
    found_weighted = true;
    std::istringstream in(line);
    std::string label, median, fraction;
    std::getline(in, label, ',');
    std::getline(in, median, ',');
    std::getline(in, fraction, ',');
    CHECK(std::stod(median) == doctest::Approx(1.0));
    CHECK(std::stod(fraction) == doctest::Approx(1.0));
  }
  CHECK(found_weighted);

  CHECK(run_cli("eval sparsity", tmp.path).code == 1);                        // needs --metrics
  CHECK(run_cli("eval sparsity --metrics " + tmp.str("nope.csv"), tmp.path).code == 2);
}

TEST_CASE("i/o failures exit with code 2") {
  TempDir tmp;
  fs::create_directories(tmp.str("empty"));
  RunResult result = run_cli("train --data " + tmp.str("empty") + " --out " + tmp.str("out"),
                             tmp.path);
  CHECK(result.code == 2);
  CHECK(result.err.find("error") != std::string::npos);
}

TEST_CASE("gradcheck passes with default settings") {
  TempDir tmp;
  RunResult result = run_cli("gradcheck --seed 7", tmp.path);
  CHECK(result.code == 0);
  CHECK(result.out.find("gradient check passed") != std::string::npos);
  CHECK(result.out.find("worst relative error") != std::string::npos);

  RunResult bad_step = run_cli("gradcheck --fd-step 1", tmp.path);
  CHECK(bad_step.code == 1);
}
