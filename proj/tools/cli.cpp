// Copyright 2026 The sda2e Authors.
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

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sda2e/active.hpp"
#include "sda2e/data.hpp"
#include "sda2e/error.hpp"
#include "sda2e/eval.hpp"
#include "sda2e/model.hpp"
#include "sda2e/report.hpp"
#include "sda2e/scoring.hpp"
#include "sda2e/service.hpp"
#include "sda2e/settings.hpp"

namespace sda2e::cli {
namespace {

namespace fs = std::filesystem;

// Flags every subcommand shares. Values are kept as text and routed through
// the same setters a config file uses, so validation is identical.
struct Common {
  std::string config;
  std::optional<std::string> seed;
  std::vector<std::string> sets;
  std::string out;
};

struct Overrides {
  std::vector<std::pair<std::string, std::optional<std::string>*>> flags;
  std::map<std::string, std::optional<std::string>> values;

  std::optional<std::string>& slot(const std::string& key) {
    return values[key];
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value settings file");
  cmd->add_option("--seed", c.seed, "Seed for every random stream");
  cmd->add_option("--set", c.sets, "Override a setting, key=value")
      ->take_all();
}

// Config file, then --set entries, then dedicated flags, then --seed.
Settings gather(const Common& c, const Overrides& flags) {
  Settings merged;
  auto put = [&](const std::string& k, const std::string& v) {
    for (auto& kv : merged) {
      if (kv.first == k) {
        kv.second = v;
        return;
      }
    }
    merged.emplace_back(k, v);
  };
  if (!c.config.empty()) {
    for (const auto& [k, v] : load_settings(c.config)) put(k, v);
  }
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    put(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : flags.values) {
    if (v) put(k, *v);
  }
  if (c.seed) put("seed", *c.seed);
  return merged;
}

void apply(const Settings& settings, Sda2eConfig* model,
           SessionConfig* session, SyntheticSpec* synth) {
  for (const auto& [k, v] : settings) {
    bool used = false;
    if (model != nullptr) used |= apply_model_setting(*model, k, v);
    if (session != nullptr) used |= apply_session_setting(*session, k, v);
    if (synth != nullptr) used |= apply_synthetic_setting(*synth, k, v);
    if (!used) throw ConfigError("unknown setting '" + k + "'");
  }
}

std::string header_line(std::string_view command, const Settings& settings) {
  std::string line = "# sda2e " + std::string(command);
  for (const auto& [k, v] : settings) line += " " + k + "=" + v;
  return line + "\n";
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
}

// Write into `path` only after the whole content is produced.
void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    if (!out) throw DataError("write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common& c, const Overrides& flags, std::ostream& out) {
  SyntheticSpec spec = canonical_synthetic_spec();
  apply(gather(c, flags), nullptr, nullptr, &spec);
  spec.validate();
  const SyntheticData syn = generate_synthetic(spec);

  std::ostringstream data_csv, label_csv, cfg;
  write_dataset_csv(syn.dataset, data_csv);
  write_labels_csv(syn.dataset, syn.labels, label_csv);
  write_settings(synthetic_settings(spec), cfg);
  ensure_dir(c.out);
  const fs::path dir(c.out);
  write_file(dir / "dataset.csv", data_csv.str());
  write_file(dir / "labels.csv", label_csv.str());
  write_file(dir / "synth.cfg", cfg.str());

  const auto summary = summarize_dataset(syn.dataset, &syn.labels);
  out << "rows / features / anomalies / anomaly%: " << summary.format() << "\n";
  out << "dataset.csv fnv1a64=" << hex64(fnv1a64(data_csv.str())) << "\n";
  out << "labels.csv fnv1a64=" << hex64(fnv1a64(label_csv.str())) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string labels;
  bool normals_only = false;
  double holdout = 0.2;
};

int cmd_train(const Common& c, const Overrides& flags, const TrainArgs& a,
              std::ostream& out) {
  const BinaryDataset data = load_csv(a.dataset);
  std::optional<LabelMap> labels;
  if (!a.labels.empty()) labels = load_labels(a.labels, data);
  if (a.normals_only && !labels) {
    throw ConfigError("--normals-only needs --labels");
  }
  Sda2eConfig config;
  config.d = data.width();
  apply(gather(c, flags), &config, nullptr, nullptr);
  config = config.resolved();
  config.validate();
  ensure_dir(c.out);

  const Split parts = split(data, labels ? &*labels : nullptr,
                            1.0 - a.holdout, config.seed, labels.has_value());
  std::vector<std::size_t> train_rows;
  for (std::size_t r : parts.first) {
    if (!a.normals_only || labels->at(r) == Label::kNormal) {
      train_rows.push_back(r);
    }
  }
  if (train_rows.empty()) throw DataError("no training rows");
  std::vector<BitVector> train_bits, holdout_bits;
  for (std::size_t r : train_rows) train_bits.push_back(data.row(r));
  for (std::size_t r : parts.second) holdout_bits.push_back(data.row(r));

  auto mean_score = [](const Sda2eModel& m, const std::vector<BitVector>& rows) {
    const auto s = score_all(m, rows);
    return std::accumulate(s.begin(), s.end(), 0.0) /
           static_cast<double>(s.size());
  };
  std::ostringstream table;
  table << header_line("train", model_settings(config));
  table << "epoch,train_mse,holdout_mse\n";
  TrainOptions options;
  options.on_epoch = [&](const Sda2eModel& m, const EpochStats& stats) {
    table << stats.epoch << ',' << format_double(mean_score(m, train_bits))
          << ',' << format_double(mean_score(m, holdout_bits)) << '\n';
  };
  TrainResult result = train(data.dense(train_rows), config, options);

  std::ostringstream ckpt;
  write_checkpoint(result.model, ckpt);
  const fs::path dir(c.out);
  write_file(dir / "model.ckpt", ckpt.str());
  write_file(dir / "loss.csv", table.str());
  out << "trained on " << train_rows.size() << " rows, holdout "
      << holdout_bits.size() << ", " << config.epochs << " epochs\n";
  if (!result.history.empty()) {
    out << "final holdout_mse " << format_double(mean_score(result.model, holdout_bits))
        << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string dataset;
  std::string model;
};

int cmd_score(const Common& c, const ScoreArgs& a, std::ostream& out) {
  const BinaryDataset data = load_csv(a.dataset);
  Sda2eModel model = load_checkpoint(a.model);
  if (model.input_dim() != data.width()) {
    throw DataError("model expects " + std::to_string(model.input_dim()) +
                    " features, dataset has " + std::to_string(data.width()));
  }
  const auto scores = score_all(model, data.rows());
  const auto ranking = build_ranking(scores, {});
  std::vector<std::size_t> rank(scores.size());
  for (std::size_t i = 0; i < ranking.size(); ++i) rank[ranking[i]] = i + 1;

  std::ostringstream csv;
  csv << header_line("score", model_settings(model.config()));
  csv << "id,score,rank\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    csv << data.id(i) << ',' << format_double(scores[i]) << ',' << rank[i]
        << '\n';
  }
  if (c.out.empty()) {
    out << csv.str();
  } else {
    write_file(c.out, csv.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ActiveArgs {
  std::string dataset;
  std::string labels;
  bool all = false;
  std::string label;
};

int cmd_active(const Common& c, const Overrides& flags, const ActiveArgs& a,
               std::ostream& out) {
  const BinaryDataset data = load_csv(a.dataset);
  const LabelMap labels = load_labels(a.labels, data);
  if (labels.anomaly_count() == 0) {
    throw UndefinedMetricError(
        "labels contain no anomaly; nDCG is undefined, refusing to run");
  }
  SessionConfig session;
  Sda2eConfig model;
  model.d = data.width();
  const Settings settings = gather(c, flags);
  apply(settings, &model, &session, nullptr);
  session.validate();
  model = model.resolved();
  model.validate();
  ensure_dir(c.out);
  const fs::path dir(c.out);

  std::vector<Strategy> strategies;
  if (a.all) {
    strategies = {Strategy::kS1, Strategy::kS2, Strategy::kHybrid};
  } else {
    strategies = {session.strategy};
  }

  const std::string label =
      a.label.empty() ? (a.all ? std::string("all")
                               : std::string(strategy_name(session.strategy)))
                      : a.label;
  const std::string dataset_name = fs::path(a.dataset).filename().string();
  RunReport report;
  for (Strategy s : strategies) {
    SessionConfig sc = session;
    sc.strategy = s;
    ActiveSession run(data, &labels, sc, model);
    std::ostringstream journal;
    run.set_journal([&](std::string_view line) { journal << line << '\n'; });
    SimulatedOracle oracle(labels);
    run_to_completion(run, oracle);
    RunReport single = session_report(run, std::string(strategy_name(s)),
                                      dataset_name);
    if (report.runs.empty()) {
      report = single;
      report.label = label;
      report.session = session;
    } else {
      report.runs.push_back(single.runs.front());
    }
    write_file(dir / ("journal-" + std::string(strategy_name(s)) + ".jsonl"),
               journal.str());
    if (strategies.size() > 1) {
      std::ostringstream text;
      write_report(single, text);
      write_file(dir / ("report-" + std::string(strategy_name(s)) + ".txt"),
                 text.str());
    }
    const auto series = report.runs.back().ndcg_series();
    const auto one = summarize({series});
    out << strategy_name(s) << ": iterations " << series.size()
        << ", oracle calls " << report.runs.back().oracle_calls << ", max "
        << format_double(one.max_max) << ", mean "
        << format_double(one.max_mean) << ", median "
        << format_double(one.max_median) << "\n";
  }

  std::ostringstream text, csv;
  write_report(report, text);
  write_series_csv(report, csv);
  write_file(dir / "report.txt", text.str());
  write_file(dir / "series.csv", csv.str());
  const auto s = report.summary();
  out << "Max_Max=" << format_double(s.max_max)
      << " Max_Mean=" << format_double(s.max_mean)
      << " Max_Median=" << format_double(s.max_median) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_eval(const std::vector<std::string>& paths, const std::string& out_path,
             std::ostream& out) {
  if (paths.empty()) throw ConfigError("eval needs at least one report");
  std::vector<RunReport> reports;
  for (const auto& p : paths) reports.push_back(load_report(p));

  // Dataset identity is name plus checksum.
  std::map<std::string, std::uint64_t> checksum;
  std::vector<std::string> datasets, methods;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& r : reports) {
    auto [it, fresh] = checksum.emplace(r.dataset, r.dataset_checksum);
    if (!fresh && it->second != r.dataset_checksum) {
      throw DataError("reports disagree on the content of dataset '" +
                      r.dataset + "'");
    }
    if (fresh) datasets.push_back(r.dataset);
    if (std::find(methods.begin(), methods.end(), r.label) == methods.end()) {
      methods.push_back(r.label);
    }
    if (!cell.emplace(std::make_pair(r.label, r.dataset),
                      r.summary().max_median)
             .second) {
      throw DataError("two reports for '" + r.label + "' on '" + r.dataset +
                      "'");
    }
  }

  std::map<std::string, double> best;
  for (const auto& [key, v] : cell) {
    auto it = best.find(key.second);
    if (it == best.end() || v > it->second) best[key.second] = v;
  }

  std::ostringstream table;
  table << "label,dataset,max_max,max_mean,max_median,winner\n";
  for (const auto& r : reports) {
    const auto s = r.summary();
    table << r.label << ',' << r.dataset << ',' << format_double(s.max_max)
          << ',' << format_double(s.max_mean) << ','
          << format_double(s.max_median) << ','
          << (s.max_median == best[r.dataset] ? "*" : "") << '\n';
  }

  std::vector<std::vector<double>> grid(methods.size(),
                                        std::vector<double>(datasets.size()));
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t j = 0; j < datasets.size(); ++j) {
      auto it = cell.find({methods[m], datasets[j]});
      if (it == cell.end()) {
        throw DataError("'" + methods[m] + "' has no report for dataset '" +
                        datasets[j] + "'");
      }
      grid[m][j] = it->second;
    }
  }
  const auto ranks = average_ranks(grid);
  table << "\nlabel,average_rank\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    table << methods[m] << ',' << format_double(ranks[m]) << '\n';
  }
  out << table.str();
  if (!out_path.empty()) write_file(out_path, table.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

int dispatch(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Attention autoencoder anomaly ranking with active learning",
               "sda2e"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sda2e 0.1.0");

  Common common;
  Overrides flags;
  auto flag = [&](CLI::App* cmd, const std::string& name,
                  const std::string& key, const std::string& help) {
    cmd->add_option(name, flags.slot(key), help);
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  add_common(synth, common);
  synth->add_option("--out", common.out, "Output directory")->required();
  flag(synth, "--n", "n", "Rows");
  flag(synth, "--d", "d", "Features");
  flag(synth, "--fraction", "anomaly_fraction", "Anomaly fraction");
  flag(synth, "--clusters", "normal_clusters", "Normal clusters");
  flag(synth, "--density", "density", "Prototype bit density");
  flag(synth, "--noise", "noise", "Per-bit flip probability");
  flag(synth, "--mode", "mode", "cluster_shifted | uniform_rare");
  flag(synth, "--groups", "anomaly_groups", "Shifted anomaly prototypes");
  flag(synth, "--shift", "shift_fraction", "Fraction of bits flipped");

  TrainArgs targs;
  auto* trainc = app.add_subcommand("train", "Train a model and log losses");
  add_common(trainc, common);
  trainc->add_option("--dataset", targs.dataset, "Dataset CSV")->required();
  trainc->add_option("--labels", targs.labels, "Label CSV");
  trainc->add_flag("--normals-only", targs.normals_only,
                   "Train only on rows labeled normal");
  trainc->add_option("--holdout", targs.holdout, "Holdout fraction")
      ->check(CLI::Range(0.01, 0.99));
  trainc->add_option("--out", common.out, "Output directory")->required();
  flag(trainc, "--epochs", "epochs", "Epochs M");
  flag(trainc, "--k", "k", "Latent width");
  flag(trainc, "--batch-size", "batch_size", "Batch size B");

  ScoreArgs sargs;
  auto* scorec = app.add_subcommand("score", "Score rows with a checkpoint");
  scorec->add_option("--dataset", sargs.dataset, "Dataset CSV")->required();
  scorec->add_option("--model", sargs.model, "Checkpoint")->required();
  scorec->add_option("--out", common.out, "Output CSV (default stdout)");

  ActiveArgs aargs;
  auto* activec = app.add_subcommand("active", "Run simulated-oracle sessions");
  add_common(activec, common);
  activec->add_option("--dataset", aargs.dataset, "Dataset CSV")->required();
  activec->add_option("--labels", aargs.labels, "Label CSV")->required();
  activec->add_option("--out", common.out, "Output directory")->required();
  auto* strat = activec->add_option("--strategy", flags.slot("strategy"),
                                    "s1 | s2 | hybrid | passive");
  activec->add_flag("--all-strategies", aargs.all, "Run s1, s2 and hybrid")
      ->excludes(strat);
  activec->add_option("--label", aargs.label, "Method label in the report");
  flag(activec, "--budget", "budget", "Queries per iteration Q");
  flag(activec, "--iterations", "iterations", "Iterations T");
  flag(activec, "--percentile", "error_percentile", "Error percentile for tau");
  flag(activec, "--sim-percentile", "sim_percentile",
       "Similarity percentile for expansion thresholds");
  flag(activec, "--metric", "metric", "nm1 | jaccard | dice | hamming | cosine");
  flag(activec, "--ndcg-at", "ndcg_at", "nDCG cutoff (default full list)");
  flag(activec, "--retrain", "retrain", "from_scratch | warm_start");
  flag(activec, "--epochs", "epochs", "Epochs per (re)training");

  std::vector<std::string> reports;
  std::string eval_out;
  auto* evalc = app.add_subcommand("eval", "Compare run reports");
  evalc->add_option("reports", reports, "Report files")->required();
  evalc->add_option("--out", eval_out, "Also write the table here");

  ServiceOptions sopts;
  auto* servec = app.add_subcommand("serve", "Start the triage service");
  servec->add_option("--host", sopts.host, "Bind address");
  servec->add_option("--port", sopts.port, "Port");
  servec->add_option("--static", sopts.static_dir, "UI asset directory");
  servec->add_option("--journal-dir", sopts.journal_dir,
                     "Where session journals are written");
  servec->add_option("--max-upload-mb", sopts.max_upload_mb,
                     "Upload size limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (synth->parsed()) return cmd_synth(common, flags, out);
  if (trainc->parsed()) return cmd_train(common, flags, targs, out);
  if (scorec->parsed()) return cmd_score(common, sargs, out);
  if (activec->parsed()) return cmd_active(common, flags, aargs, out);
  if (evalc->parsed()) return cmd_eval(reports, eval_out, out);
  if (servec->parsed()) {
    Server server(sopts);
    const int port = server.bind();
    out << "listening on http://" << sopts.host << ":" << port << std::endl;
    server.listen();
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const UndefinedMetricError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace sda2e::cli
