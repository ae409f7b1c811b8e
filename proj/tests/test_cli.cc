// Copyright 2026 The DVPF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dvpf/data_io.hpp"
#include "dvpf/pf_oracle.hpp"
#include "dvpf/report.hpp"
#include "dvpf/trainer.hpp"
#include "json.hpp"

namespace dvpf {
namespace {

namespace fs = std::filesystem;

const std::string kCli = DVPF_CLI_PATH;
const std::string kFixtures = DVPF_FIXTURE_DIR;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Workspace {
 public:
  Workspace() {
    static int counter = 0;
    dir_ = fs::temp_directory_path() /
           ("dvpf_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

  RunResult Run(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && env -u DVPF_SEED " + env + " '" +
                            kCli + "' " + args + " > '" + out.string() + "' 2> '" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = Slurp(out);
    r.err = Slurp(err);
    return r;
  }

 private:
  fs::path dir_;
};

std::vector<double> ColumnFromCsv(const std::string& csv, int column) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  while (std::getline(ss, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (int c = 0; c <= column; ++c) std::getline(ls, cell, ',');
    out.push_back(std::stod(cell));
  }
  return out;
}

TEST_CASE("usage errors exit with code 2") {
  Workspace ws;
  CHECK(ws.Run("").code == 2);
  CHECK(ws.Run("bogus").code == 2);
  CHECK(ws.Run("train --synthetic mixture --steps nope").code == 2);
  CHECK(ws.Run("train --synthetic nowhere --steps 2").code == 2);
  CHECK(ws.Run("train --steps 2").code == 2);
  CHECK(ws.Run("--version").code == 0);
}

TEST_CASE("oracle command") {
  Workspace ws;
  SUBCASE("product joint gives a flat curve at H(X)") {
    const RunResult r = ws.Run("oracle '" + kFixtures + "/joint_product.txt' --out o");
    REQUIRE(r.code == 0);
    for (double u : ColumnFromCsv(Slurp(ws / "o/curve.csv"), 1)) {
      CHECK(u == doctest::Approx(2.0).epsilon(1e-9));
    }
    CHECK(fs::exists(ws / "o/curve.svg"));
    CHECK(Slurp(ws / "o/manifest.txt").find("artifacts = curve.csv,curve.svg") !=
          std::string::npos);
  }
  SUBCASE("missing file names the path") {
    const RunResult r = ws.Run("oracle does_not_exist.txt --out o");
    CHECK(r.code == 2);
    CHECK(r.err.find("does_not_exist.txt") != std::string::npos);
  }
  SUBCASE("CSV equals the library curve byte for byte") {
    const std::string joint_path = kFixtures + "/joint_2x4.txt";
    const RunResult r =
        ws.Run("oracle '" + joint_path + "' --budgets 0,0.1,0.2,0.3 --seed 7 --out o");
    REQUIRE(r.code == 0);
    SolverOptions options;
    options.seed = 7;
    const PFCurve curve =
        ComputePFCurve(LoadJoint(joint_path), {0, 0.1, 0.2, 0.3}, 4, DefaultAlphaGrid(), options);
    std::ostringstream expected;
    WriteCurveCsv(curve, expected);
    CHECK(Slurp(ws / "o/curve.csv") == expected.str());
  }
  SUBCASE("alphabet cap exits with code 3") {
    std::ofstream big(ws / "big.txt");
    big.precision(17);
    for (int s = 0; s < 2; ++s) {
      for (int x = 0; x < 13; ++x) big << (1.0 / 26) << ' ';
      big << '\n';
    }
    big.close();
    CHECK(ws.Run("oracle big.txt --out o").code == 3);
  }
}

TEST_CASE("train command") {
  Workspace ws;
  const std::string base = "train --synthetic codebook --n 2000 --alpha 0 --steps 200 --seed 3";
  const RunResult a = ws.Run(base + " --out-dir a");
  REQUIRE(a.code == 0);
  const RunResult b = ws.Run(base + " --out-dir b");
  REQUIRE(b.code == 0);

  // Rerunnable: identical history and checkpoint.
  CHECK(Slurp(ws / "a/history.jsonl") == Slurp(ws / "b/history.jsonl"));
  CHECK(Slurp(ws / "a/checkpoint.json") == Slurp(ws / "b/checkpoint.json"));

  std::ifstream in(ws / "a/history.jsonl");
  const TrainHistory h = ReadHistoryJsonl(in);
  REQUIRE(h.records.size() == 200);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 20; ++i) {
    first += h.records[i].loss.recon_nll;
    last += h.records[180 + i].loss.recon_nll;
  }
  CHECK(last < first);

  const std::string manifest = Slurp(ws / "a/manifest.txt");
  for (const char* item : {"history.jsonl", "checkpoint.json", "evaluation.json"}) {
    CHECK(manifest.find(item) != std::string::npos);
  }
  CHECK(manifest.find("config.seed = 3") != std::string::npos);
  CHECK(manifest.find("status = ok") != std::string::npos);

  const nlohmann::json eval = nlohmann::json::parse(Slurp(ws / "a/evaluation.json"));
  CHECK(eval.contains("oracle"));
  CHECK(ws.Run("report a").out.find("agreement within 0.1 bits") != std::string::npos);
}

TEST_CASE("train agrees with the tabular oracle at alpha 0") {
  Workspace ws;
  const RunResult r =
      ws.Run("train --synthetic codebook --n 4000 --alpha 0 --steps 1500 --seed 1 --out-dir t");
  REQUIRE(r.code == 0);
  const nlohmann::json eval = nlohmann::json::parse(Slurp(ws / "t/evaluation.json"));
  CHECK(eval["oracle"]["agrees_within_0.1_bits"].get<bool>());
  CHECK(ws.Run("report t").out.find("agreement within 0.1 bits: yes") != std::string::npos);
}

TEST_CASE("seed precedence: flag over config file over environment") {
  Workspace ws;
  std::ofstream(ws / "cfg.txt") << "seed = 11\nsteps = 3\n";
  auto seed_of = [&](const std::string& dir) {
    const auto kv = LoadKeyValues((ws / (dir + "/manifest.txt")).string());
    return kv.at("config.seed");
  };
  REQUIRE(ws.Run("train --synthetic mixture --n 200 --steps 3 --out-dir e", "DVPF_SEED=5").code == 0);
  CHECK(seed_of("e") == "5");
  REQUIRE(ws.Run("train --synthetic mixture --n 200 --config cfg.txt --out-dir c", "DVPF_SEED=5")
              .code == 0);
  CHECK(seed_of("c") == "11");
  REQUIRE(ws.Run("train --synthetic mixture --n 200 --config cfg.txt --seed 4 --out-dir f",
                 "DVPF_SEED=5")
              .code == 0);
  CHECK(seed_of("f") == "4");
  std::ofstream(ws / "bad.txt") << "sed = 1\n";
  CHECK(ws.Run("train --synthetic mixture --config bad.txt --out-dir x").code == 2);
}

TEST_CASE("divergence exits with code 4 and keeps the history") {
  Workspace ws;
  std::ofstream(ws / "cfg.txt") << "lr.phi = 1\ndivergence_factor = 2\ndivergence_patience = 5\n"
                                << "batch_size = 16\nd_z = 2\nhidden = 8\n"
                                << "adversary_inner_steps = 2\n";
  const RunResult r =
      ws.Run("train --synthetic mixture --n 300 --steps 300 --seed 3 --config cfg.txt --out-dir d");
  CHECK(r.code == 4);
  CHECK(r.err.find("divergence") != std::string::npos);
  std::ifstream in(ws / "d/history.jsonl");
  const TrainHistory h = ReadHistoryJsonl(in);
  CHECK(h.records.size() >= 5);
  CHECK(h.records.size() < 300);
  CHECK(Slurp(ws / "d/manifest.txt").find("status = diverged") != std::string::npos);
}

TEST_CASE("sweep command") {
  Workspace ws;
  const RunResult r = ws.Run(
      "sweep --synthetic mixture --n 1500 --steps 400 --seed 2 --alphas 10,0.1 --jobs 2 "
      "--out-dir s");
  REQUIRE(r.code == 0);
  std::ifstream in(ws / "s/tradeoff.csv");
  const auto points = ReadTradeoffCsv(in);
  REQUIRE(points.size() == 2);
  CHECK(points[0].alpha == 0.1);
  CHECK(points[1].alpha == 10.0);
  CHECK(points[1].leakage_bits < points[0].leakage_bits);
  CHECK(fs::exists(ws / "s/tradeoff.svg"));
  CHECK(ws.Run("sweep --synthetic mixture --alphas , --out-dir e").code == 2);
  CHECK(ws.Run("sweep --synthetic mixture --out-dir e").code == 2);
}

TEST_CASE("attack command") {
  Workspace ws;
  const SampleBatch data = MakeSynthetic("mixture", 600, 4).batch;
  SaveEmbeddings(data, (ws / "data.emb").string());
  REQUIRE(ws.Run("train --data data.emb --steps 20 --out-dir t").code == 0);
  const RunResult r = ws.Run("attack t/checkpoint.json data.emb --attacker logistic");
  REQUIRE(r.code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["attacker"] == "logistic");
  CHECK(j["accuracy"].get<double>() > 0.5);
  CHECK(ws.Run("attack t/checkpoint.json '" + kFixtures + "/reference.emb'").code == 2);
  CHECK(ws.Run("attack missing.json data.emb").code == 2);
}

TEST_CASE("report matches the golden table") {
  Workspace ws;
  const RunResult r = ws.Run("report '" + kFixtures + "/report_run'");
  REQUIRE(r.code == 0);
  CHECK(r.out == Slurp(kFixtures + "/report_run.golden.txt"));
  std::ifstream in(kFixtures + "/report_run/tradeoff.csv");
  CHECK(r.out.find(RenderTradeoffTable(ReadTradeoffCsv(in))) != std::string::npos);
  CHECK(ws.Run("report nowhere").code == 2);
}

}  // namespace
}  // namespace dvpf
