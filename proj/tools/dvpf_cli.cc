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
// dvpf: oracle curves, training, alpha sweeps, attacks and reports.
//
// Exit codes: 0 success, 2 usage or I/O, 3 capacity, 4 divergence or a
// non-finite training loss.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvpf/data_io.hpp"
#include "dvpf/errors.hpp"
#include "dvpf/eval_harness.hpp"
#include "dvpf/model.hpp"
#include "dvpf/pf_oracle.hpp"
#include "dvpf/report.hpp"
#include "dvpf/trainer.hpp"
#include "json.hpp"

#ifndef DVPF_VERSION
#define DVPF_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace dvpf {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitDivergence = 4;

// Collects artifacts and writes the manifest last, as the commit marker.
class RunManifest {
 public:
  RunManifest(std::string command, fs::path dir) : dir_(std::move(dir)) {
    values_["command"] = std::move(command);
    values_["tool_version"] = DVPF_VERSION;
  }

  void Set(const std::string& key, const std::string& value) { values_[key] = value; }
  void Config(const std::map<std::string, std::string>& config) {
    for (const auto& [k, v] : config) values_["config." + k] = v;
  }
  void Input(const std::string& name, const std::string& path) {
    values_["input." + name] = path;
    values_["input." + name + ".checksum"] = FileChecksum(path);
  }
  void Artifact(const std::string& name) { artifacts_.push_back(name); }

  void Write() {
    std::string list;
    for (const auto& a : artifacts_) list += (list.empty() ? "" : ",") + a;
    values_["artifacts"] = list;
    std::ofstream out(dir_ / "manifest.txt");
    if (!out) throw IoError("cannot write manifest in '" + dir_.string() + "'");
    WriteKeyValues(values_, out);
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> artifacts_;
};

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::uint64_t DefaultSeed() {
  const char* env = std::getenv("DVPF_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ValidationError("DVPF_SEED must be a non-negative integer");
  return v;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  std::string joint;
  std::vector<double> alpha_grid;
  int z_card = 0;
  std::vector<double> budgets = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5};
  std::string out = "oracle_out";
  std::optional<std::uint64_t> seed;
};

int RunOracle(const OracleArgs& a) {
  const JointDistribution joint = LoadJoint(a.joint);
  const int z_card = a.z_card > 0 ? a.z_card : joint.x_size();
  SolverOptions options;
  options.seed = a.seed.value_or(DefaultSeed());
  std::vector<double> budgets = a.budgets;
  std::sort(budgets.begin(), budgets.end());
  const PFCurve curve = ComputePFCurve(
      joint, budgets, z_card, a.alpha_grid.empty() ? DefaultAlphaGrid() : a.alpha_grid,
      options);

  const fs::path dir(a.out);
  EnsureDir(dir);
  RunManifest manifest("oracle", dir);
  manifest.Input("joint", a.joint);
  manifest.Set("seed", std::to_string(options.seed));
  manifest.Set("z_cardinality", std::to_string(z_card));

  std::ostringstream csv;
  WriteCurveCsv(curve, csv);
  WriteText(dir / "curve.csv", csv.str());
  manifest.Artifact("curve.csv");

  PlotSeries series{"privacy funnel", {}, true};
  for (const PFPoint& p : curve.points) series.points.emplace_back(p.leakage_budget.value, p.utility.value);
  WriteText(dir / "curve.svg", RenderSvgPlot({series}, "leakage budget I(S;Z) [bits]",
                                             "utility I(X;Z) [bits]"));
  manifest.Artifact("curve.svg");
  manifest.Write();
  std::cout << "wrote " << (dir / "curve.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- training

struct DataArgs {
  std::string data;
  std::string synthetic;
  int n = 4000;
};

struct TrainArgs {
  DataArgs data;
  std::string config_file;
  std::map<std::string, std::string> flags;  // only flags given explicitly
  std::string out_dir = "run";
  int jobs = 1;
  std::string alpha_list;
  std::string attacker = "svm";
};

std::vector<double> ParseAlphaList(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (*end != '\0') throw ValidationError("bad alpha '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("--alphas needs at least one value");
  return out;
}

struct LoadedData {
  SampleBatch train;
  SampleBatch test;
  std::optional<JointDistribution> joint;
};

LoadedData LoadData(const DataArgs& a, std::uint64_t seed, RunManifest& manifest) {
  if (a.data.empty() == a.synthetic.empty()) {
    throw ValidationError("give exactly one of --data or --synthetic");
  }
  LoadedData out;
  SampleBatch all;
  if (!a.data.empty()) {
    all = LoadEmbeddings(a.data);
    manifest.Input("data", a.data);
  } else {
    SyntheticDataset d = MakeSynthetic(a.synthetic, a.n, seed);
    all = std::move(d.batch);
    out.joint = d.joint;
    manifest.Set("synthetic", a.synthetic);
    manifest.Set("synthetic.n", std::to_string(a.n));
    if (d.mutual_information) {
      manifest.Set("synthetic.mutual_information_bits", FormatNumber(d.mutual_information->value));
    }
  }
  auto [train, test] = SplitTrainTest(all, seed);
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

// Defaults, then DVPF_SEED, then the config file, then explicit flags.
TrainConfig ResolveConfig(const TrainArgs& a) {
  TrainConfig c;
  c.seed = DefaultSeed();
  if (!a.config_file.empty()) c = ApplyConfigValues(c, LoadKeyValues(a.config_file));
  c = ApplyConfigValues(c, a.flags);
  c.Validate();
  return c;
}

nlohmann::json PointJson(const TradeoffPoint& p) {
  nlohmann::json j{{"alpha", p.alpha},
                   {"utility_bits", p.utility_bits},
                   {"leakage_bits", p.leakage_bits},
                   {"leakage_mixture_bits", p.leakage_mixture_bits},
                   {"attack_accuracy", p.attack_accuracy},
                   {"recon_nll", p.recon_nll}};
  if (p.tmr_at_fmr) j["tmr_at_fmr"] = *p.tmr_at_fmr;
  return j;
}

int RunTrain(const TrainArgs& a) {
  const TrainConfig config = ResolveConfig(a);
  const fs::path dir(a.out_dir);
  EnsureDir(dir);
  RunManifest manifest("train", dir);
  if (!a.config_file.empty()) manifest.Input("config", a.config_file);
  const LoadedData data = LoadData(a.data, config.seed, manifest);
  manifest.Config(ConfigValues(config));

  // History lines are flushed as rounds finish so a stopped run keeps them.
  std::ofstream history(dir / "history.jsonl", std::ios::binary);
  if (!history) throw IoError("cannot write history in '" + dir.string() + "'");
  manifest.Artifact("history.jsonl");
  FitOptions options;
  options.eval = &data.test;
  options.on_record = [&](const HistoryRecord& r) {
    history << LossBreakdownJson(r.loss, r.step, std::nullopt) << '\n';
  };
  const auto start = std::chrono::steady_clock::now();
  std::optional<FitResult> fit;
  try {
    fit.emplace(Fit(data.train, config, options));
  } catch (const NumericError&) {
    history.flush();
    manifest.Set("status", "numeric-error");
    manifest.Write();
    throw;
  }
  history.flush();
  manifest.Set("elapsed_s", FormatNumber(std::chrono::duration<double>(
                                             std::chrono::steady_clock::now() - start)
                                             .count()));

  if (!fit->history.snapshots.empty()) {
    std::string lines;
    for (const Snapshot& s : fit->history.snapshots) lines += SnapshotJson(s) + "\n";
    WriteText(dir / "snapshots.jsonl", lines);
    manifest.Artifact("snapshots.jsonl");
  }
  SaveCheckpoint(fit->bundle, (dir / "checkpoint.json").string());
  manifest.Artifact("checkpoint.json");

  if (fit->divergence) {
    manifest.Set("status", "diverged");
    manifest.Write();
    std::cerr << "dvpf train: " << *fit->divergence << "\n";
    return kExitDivergence;
  }

  EvalOptions eo;
  eo.seed = config.seed;
  eo.attacker = *AttackerFromName(a.attacker);
  const TradeoffPoint point = EvaluateTradeoff(fit->bundle, data.train, data.test, config.alpha, eo);
  nlohmann::json evaluation = PointJson(point);
  if (data.joint) {
    // Tabular reference: the exact Lagrangian solution at the same alpha.
    const LagrangianSolution sol =
        SolveLagrangian(*data.joint, config.alpha, data.joint->x_size());
    const bool agree = std::abs(point.utility_bits - sol.utility.value) <= 0.1 &&
                       std::abs(point.leakage_mixture_bits - sol.leakage.value) <= 0.1;
    evaluation["oracle"] = {{"utility_bits", sol.utility.value},
                            {"leakage_bits", sol.leakage.value},
                            {"agrees_within_0.1_bits", agree}};
  }
  WriteText(dir / "evaluation.json", evaluation.dump(2) + "\n");
  manifest.Artifact("evaluation.json");
  manifest.Set("status", "ok");
  manifest.Write();
  std::cout << "recon_nll " << FormatNumber(fit->history.records.empty()
                                                ? 0.0
                                                : fit->history.records.back().loss.recon_nll)
            << "  leakage_bits " << FormatNumber(point.leakage_bits) << "  attack_acc "
            << FormatNumber(point.attack_accuracy) << "\n";
  return kExitOk;
}

int RunSweep(const TrainArgs& a) {
  const std::vector<double> alpha_values = ParseAlphaList(a.alpha_list);
  const TrainConfig config = ResolveConfig(a);
  const fs::path dir(a.out_dir);
  EnsureDir(dir);
  RunManifest manifest("sweep", dir);
  if (!a.config_file.empty()) manifest.Input("config", a.config_file);
  const LoadedData data = LoadData(a.data, config.seed, manifest);
  manifest.Config(ConfigValues(config));
  std::string alphas;
  for (double v : alpha_values) alphas += (alphas.empty() ? "" : ",") + FormatNumber(v);
  manifest.Set("alphas", alphas);
  manifest.Set("jobs", std::to_string(a.jobs));

  SweepOptions options;
  options.jobs = a.jobs;
  options.eval_options.attacker = *AttackerFromName(a.attacker);
  const auto points = SweepAlpha(data.train, data.test, config, alpha_values, options);

  std::ostringstream csv;
  WriteTradeoffCsv(points, csv);
  WriteText(dir / "tradeoff.csv", csv.str());
  manifest.Artifact("tradeoff.csv");
  PlotSeries leak{"I(Z;S) attack bound", {}, true}, acc{"attack accuracy", {}, true};
  int ok = 0;
  for (const auto& p : points) {
    if (p.failed) {
      std::cerr << "dvpf sweep: alpha " << FormatNumber(p.alpha) << " failed: " << p.error << "\n";
      continue;
    }
    ++ok;
    leak.points.emplace_back(p.alpha, p.leakage_bits);
    acc.points.emplace_back(p.alpha, p.attack_accuracy);
  }
  WriteText(dir / "tradeoff.svg", RenderSvgPlot({leak, acc}, "alpha", "bits / accuracy"));
  manifest.Artifact("tradeoff.svg");
  manifest.Set("succeeded", std::to_string(ok));
  manifest.Write();
  std::cout << RenderTradeoffTable(points);
  return ok > 0 ? kExitOk : kExitDivergence;
}

// ---------------------------------------------------------------- attack

struct AttackArgs {
  std::string checkpoint;
  std::string data;
  std::string attacker = "svm";
  std::optional<std::uint64_t> seed;
  std::string out;
};

int RunAttack(const AttackArgs& a) {
  const ModelBundle bundle = LoadCheckpoint(a.checkpoint);
  const SampleBatch all = LoadEmbeddings(a.data);
  if (all.d_x() != bundle.d_x()) {
    throw ValidationError("data has d_x " + std::to_string(all.d_x()) + ", checkpoint expects " +
                          std::to_string(bundle.d_x()));
  }
  const auto [train, test] = SplitTrainTest(all, a.seed.value_or(DefaultSeed()));
  const AttackReport r =
      Attack(Posterior(bundle, train.x).mean, train.s, Posterior(bundle, test.x).mean, test.s,
             all.n_classes, *AttackerFromName(a.attacker));
  const std::string json = AttackReportJson(r) + "\n";
  if (a.out.empty()) {
    std::cout << json;
  } else {
    WriteText(a.out, json);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- report

int RunReport(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw IoError("no run directory '" + run_dir + "'");
  bool any = false;
  if (fs::exists(dir / "tradeoff.csv")) {
    std::ifstream in(dir / "tradeoff.csv");
    std::cout << "Obfuscation-utility trade-off\n\n"
              << RenderTradeoffTable(ReadTradeoffCsv(in)) << "\n";
    any = true;
  }
  if (fs::exists(dir / "curve.csv")) {
    std::ifstream in(dir / "curve.csv");
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", std::stod(cell));
        cells.push_back(buf);
      }
      if (cells.size() != 3) throw ParseError("curve.csv needs 3 columns", rows.size() + 2);
      rows.push_back(cells);
    }
    std::cout << "Privacy funnel curve\n\n"
              << RenderTable({"budget [bits]", "utility [bits]", "alpha"}, rows) << "\n";
    any = true;
  }
  if (fs::exists(dir / "evaluation.json")) {
    std::ifstream in(dir / "evaluation.json");
    const nlohmann::json j = nlohmann::json::parse(in);
    TradeoffPoint p;
    p.alpha = j.at("alpha").get<double>();
    p.utility_bits = j.at("utility_bits").get<double>();
    p.leakage_bits = j.at("leakage_bits").get<double>();
    p.attack_accuracy = j.at("attack_accuracy").get<double>();
    if (j.contains("tmr_at_fmr")) p.tmr_at_fmr = j.at("tmr_at_fmr").get<double>();
    std::cout << "Trained representation\n\n" << RenderTradeoffTable({p});
    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "oracle point: utility %.3f bits, leakage %.3f bits; agreement within 0.1 "
                    "bits: %s\n",
                    o.at("utility_bits").get<double>(), o.at("leakage_bits").get<double>(),
                    o.at("agrees_within_0.1_bits").get<bool>() ? "yes" : "no");
      std::cout << buf;
    }
    std::cout << "\n";
    any = true;
  }
  if (!any) throw IoError("'" + run_dir + "' holds no tradeoff.csv, curve.csv or evaluation.json");
  return kExitOk;
}

// ---------------------------------------------------------------- wiring

void AddTrainingOptions(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data.data, "dvpf-emb-1 embedding file");
  cmd->add_option("--synthetic", a.data.synthetic, "synthetic dataset: mixture or codebook");
  cmd->add_option("--n", a.data.n, "synthetic sample count")->check(CLI::PositiveNumber);
  cmd->add_option("--config", a.config_file, "flat key-value config file");
  cmd->add_option("--out-dir", a.out_dir, "output directory");
  cmd->add_option("--attacker", a.attacker, "svm or logistic")
      ->check(CLI::IsMember({"svm", "logistic"}));
  // Flags land in a key-value map so they override the config file.
  auto keyed = [&, cmd](const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&a, key](const std::string& v) { a.flags[key] = v; }, help);
  };
  keyed("--variant", "variant", "P1 or P2");
  keyed("--steps", "steps", "training rounds");
  keyed("--batch-size", "batch_size", "minibatch size");
  keyed("--inner-steps", "adversary_inner_steps", "adversary updates per round");
  keyed("--seed", "seed", "seed (default: $DVPF_SEED, else 0)");
  keyed("--d-z", "d_z", "latent dimension");
  keyed("--hidden", "hidden", "comma-separated hidden widths");
  keyed("--activation", "activation", "relu or tanh");
  keyed("--snapshot-every", "snapshot_every", "evaluation interval in rounds");
  cmd->add_flag_function(
      "--explicit-prior", [&a](std::int64_t) { a.flags["explicit_prior"] = "true"; },
      "use N(0, I) as the latent prior");
  cmd->add_flag_function(
      "--printed-sign", [&a](std::int64_t) { a.flags["printed_sign"] = "true"; },
      "train xi inside the encoder step with the printed signs (P1)");
}

}  // namespace
}  // namespace dvpf

int main(int argc, char** argv) {
  using namespace dvpf;
  CLI::App app{"Deep variational privacy funnel toolkit"};
  app.set_version_flag("--version", DVPF_VERSION);
  app.require_subcommand(1);

  OracleArgs oracle;
  auto* c_oracle = app.add_subcommand("oracle", "exact privacy-funnel curve of a joint table");
  c_oracle->add_option("joint", oracle.joint, "joint probability file")->required();
  c_oracle->add_option("--alpha-grid", oracle.alpha_grid, "Lagrange weights")->delimiter(',');
  c_oracle->add_option("--z-card", oracle.z_card, "|Z| (default |X|)");
  c_oracle->add_option("--budgets", oracle.budgets, "leakage budgets in bits")->delimiter(',');
  c_oracle->add_option("--out", oracle.out, "output directory");
  c_oracle->add_option("--seed", oracle.seed, "solver seed");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "fit one model");
  AddTrainingOptions(c_train, train);
  c_train->add_option_function<std::string>(
      "--alpha", [&train](const std::string& v) { train.flags["alpha"] = v; }, "leakage weight");

  TrainArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "fit and audit one model per alpha");
  AddTrainingOptions(c_sweep, sweep);
  c_sweep->add_option("--alphas", sweep.alpha_list, "comma-separated leakage weights")
      ->required();
  c_sweep->add_option("--jobs", sweep.jobs, "concurrent fits")->check(CLI::PositiveNumber);

  AttackArgs attack;
  auto* c_attack = app.add_subcommand("attack", "attribute-inference attack on a checkpoint");
  c_attack->add_option("checkpoint", attack.checkpoint, "checkpoint file")->required();
  c_attack->add_option("data", attack.data, "dvpf-emb-1 embedding file")->required();
  c_attack->add_option("--attacker", attack.attacker, "svm or logistic")
      ->check(CLI::IsMember({"svm", "logistic"}));
  c_attack->add_option("--seed", attack.seed, "split seed");
  c_attack->add_option("--out", attack.out, "write the JSON report here");

  std::string run_dir;
  auto* c_report = app.add_subcommand("report", "aligned-text tables for a run directory");
  c_report->add_option("run_dir", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (c_oracle->parsed()) return RunOracle(oracle);
    if (c_train->parsed()) return RunTrain(train);
    if (c_sweep->parsed()) return RunSweep(sweep);
    if (c_attack->parsed()) return RunAttack(attack);
    if (c_report->parsed()) return RunReport(run_dir);
  } catch (const CapacityError& e) {
    std::cerr << "dvpf: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const NumericError& e) {
    std::cerr << "dvpf: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DivergenceError& e) {
    std::cerr << "dvpf: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "dvpf: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
