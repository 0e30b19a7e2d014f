// zolr command-line front end.
//
//   zolr gen-data  --out scenes/
//   zolr extract   --scenes scenes/ --out features/ [--tap encoder] [--fusion off]
//   zolr train-vae --features features/train.zfea --out model/
//   zolr score     --model model/vae.ckpt --features a.zfea b.zfea ... --out scores/
//   zolr evaluate  --scores scores/scores.csv --out report/
//   zolr monitor   --model model/vae.ckpt --train features/train.zfea
//                  --calibration features/val.zfea --stream features/stream.zfea --out mon/
//   zolr bench     --out report/
//
// Errors go to stderr as one JSON line {"error": <kind>, "message": <text>}
// and the exit code is nonzero.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "zolr/zolr.hpp"

namespace fs = std::filesystem;
using namespace zolr;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string fixed = "off";
  std::string optimizer = "spsa";
  std::size_t iterations = 100;
  std::string tap = "encoder";
  std::string fusion = "off";
  std::size_t n_train = 2000, n_val = 200, n_test = 200, n_corrupt = 200, n_stream = 400;
  std::size_t extractor_epochs = ExtractorTrainOptions{}.epochs;
  std::size_t vae_epochs = ModelConfig{}.train.epochs;
  double spsa_a = lab_zo_config().spsa.a;
  double spsa_c = lab_zo_config().spsa.c;
  std::size_t mc_samples = kScoringMcSamples;
  double percentile = 95.0;
};

BenchConfig bench_config(const Globals& g) {
  BenchConfig c;
  c.seed = g.seed;
  c.lab.n_train = g.n_train;
  c.lab.n_val = g.n_val;
  c.lab.n_test = g.n_test;
  c.lab.n_corrupt = g.n_corrupt;
  c.lab.n_stream = g.n_stream;
  c.extractor.epochs = g.extractor_epochs;
  c.model.train.epochs = g.vae_epochs;
  if (g.fusion != "off" && g.fusion != "concat") throw InvalidArgument("--fusion must be off or concat");
  c.features = {parse_tap(g.tap), g.fusion == "concat"};
  c.zo.method = parse_zo_method(g.optimizer);
  c.zo.iterations = g.iterations;
  c.zo.spsa.a = g.spsa_a;
  c.zo.spsa.c = g.spsa_c;
  c.zo.validate();
  if (g.fixed != "off") c.fixed = parse_fixed_point(g.fixed);
  c.mc_samples = g.mc_samples;
  c.threshold_percentile = g.percentile;
  return c;
}

fs::path out_dir(const Globals& g) {
  fs::path p(g.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory '" + g.out + "': " + ec.message());
  return p;
}

void write_text(const fs::path& path, const auto& writer) {
  auto os = open_out(path.string());
  writer(os);
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

void cmd_gen_data(const Globals& g) {
  const auto c = bench_config(g);
  const auto dir = out_dir(g);
  for (const auto& set : build_scene_sets(lab_config(c)))
    write_scene_file((dir / (set.name + ".zpcd")).string(), set);
}

void cmd_extract(const Globals& g, const std::string& scene_dir) {
  const auto c = bench_config(g);
  const auto dir = out_dir(g);
  const fs::path src(scene_dir);
  const auto train = read_scene_file((src / "train.zpcd").string(), "train");
  const auto ex = fit_extractor(train, c);
  write_extractor_file((dir / "extractor.bin").string(), ex);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(src))
    if (e.path().extension() == ".zpcd") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto set = read_scene_file(f.string(), f.stem().string());
    FeatureFile ff;
    ff.tap = c.features.tap;
    ff.modality = c.features.fusion ? Modality::fused : Modality::lidar;
    for (const auto& s : set.scenes) {
      ff.rows.push_back(featurize(ex, s, c.features).values);
      ff.meta.push_back(meta_of(s));
    }
    ff.feature_dim = ff.rows.empty() ? 0 : ff.rows[0].size();
    write_feature_file((dir / (f.stem().string() + ".zfea")).string(), ff);
  }
}

void cmd_train_vae(const Globals& g, const std::string& features) {
  const auto c = bench_config(g);
  const auto dir = out_dir(g);
  const auto ff = read_feature_file(features);
  const auto result = fit_model(ff.rows, c);
  save_checkpoint((dir / "vae.ckpt").string(), result.params);
  write_text(dir / "loss_curve.csv", [&](std::ostream& os) {
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
      os << e << ',' << fmt_real(result.loss_curve[e]) << '\n';
  });
}

std::vector<ScoreRow> score_file(const VaeParams& model, const std::string& path,
                                 const ScoringConfig& sc) {
  const auto ff = read_feature_file(path);
  std::vector<std::string> ids, labels;
  for (const auto& m : ff.meta) {
    ids.push_back(m.id);
    labels.push_back(m.label);
  }
  return score_rows(model, ff.rows, ids, labels, sc);
}

void cmd_score(const Globals& g, const std::string& model_path,
               const std::vector<std::string>& features) {
  const auto c = bench_config(g);
  const auto dir = out_dir(g);
  const auto model = load_checkpoint(model_path);
  std::vector<ScoreRow> rows;
  for (const auto& f : features) {
    auto r = score_file(model, f, scoring_config(c));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  write_text(dir / "scores.csv", [&](std::ostream& os) { write_scores_csv(os, rows); });
}

// Shared by evaluate and bench: AUC table, per-label ROC and histogram CSVs,
// and the summary.
void write_report(const fs::path& dir, const std::vector<ScoreRow>& rows,
                  const nlohmann::ordered_json& config) {
  const auto table = auc_table(rows);
  write_text(dir / "auc_table.csv", [&](std::ostream& os) { write_auc_table_csv(os, table); });
  std::vector<LRScore> clean;
  for (const auto& r : rows)
    if (r.label == "clean") clean.push_back(r.score);
  const auto in = split_scores(clean);
  write_text(dir / "hist_clean.csv",
             [&](std::ostream& os) { write_histogram_csv(os, histogram(in.lr, 20)); });
  for (const auto& row : table) {
    std::vector<LRScore> out;
    for (const auto& r : rows)
      if (r.label == row.label) out.push_back(r.score);
    std::string name = row.label;
    std::replace(name.begin(), name.end(), '|', '_');
    const auto o = split_scores(out);
    write_text(dir / ("roc_lr_" + name + ".csv"),
               [&](std::ostream& os) { write_roc_csv(os, roc_auc(in.lr, o.lr)); });
    write_text(dir / ("roc_likelihood_" + name + ".csv"),
               [&](std::ostream& os) { write_roc_csv(os, roc_auc(in.neg, o.neg)); });
    write_text(dir / ("hist_" + name + ".csv"),
               [&](std::ostream& os) { write_histogram_csv(os, histogram(o.lr, 20)); });
  }
  write_json((dir / "summary.json").string(), make_summary(config, table));
}

void cmd_evaluate(const Globals& g, const std::vector<std::string>& score_files) {
  const auto c = bench_config(g);
  const auto dir = out_dir(g);
  std::vector<ScoreRow> rows;
  for (const auto& f : score_files) {
    auto is = open_in(f);
    auto r = read_scores_csv(is, f);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  write_report(dir, rows, to_json(c));
}

std::vector<MonitorSample> monitor_samples(const FeatureFile& ff) {
  std::vector<MonitorSample> out;
  for (std::size_t i = 0; i < ff.rows.size(); ++i)
    out.push_back({ff.meta[i].id, ff.rows[i], ff.meta[i].target});
  return out;
}

void cmd_monitor(const Globals& g, const std::string& model_path, const std::string& train_path,
                 const std::string& calib_path, const std::string& stream_path,
                 std::optional<double> threshold) {
  const auto c = bench_config(g);
  const auto dir = out_dir(g);
  const auto model = load_checkpoint(model_path);
  const auto train = read_feature_file(train_path);
  std::vector<Vec> targets;
  for (const auto& m : train.meta) targets.push_back(m.target);
  RidgeRegressor reg;
  reg.fit(train.rows, targets);
  const auto sc = scoring_config(c);
  if (!threshold) {
    const auto calib = score_file(model, calib_path, sc);
    std::vector<LRScore> s;
    for (const auto& r : calib) s.push_back(r.score);
    threshold = calibrate_threshold(s, c.threshold_percentile);
  }
  const auto stream = read_feature_file(stream_path);
  const auto samples = monitor_samples(stream);
  const auto result =
      run_monitor(samples, model, *threshold, reg, {sc.zo, sc.fixed, sc.mc_samples, sc.base_seed});
  write_text(dir / "decisions.csv",
             [&](std::ostream& os) { write_decisions_csv(os, result.decisions); });
  const auto& s = result.summary;
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["trusted"] = s.trusted;
  j["trusted_fraction"] = s.trusted_fraction;
  j["threshold"] = s.threshold;
  j["r2_with"] = s.r2_with ? nlohmann::ordered_json(*s.r2_with) : nlohmann::ordered_json(nullptr);
  j["r2_without"] =
      s.r2_without ? nlohmann::ordered_json(*s.r2_without) : nlohmann::ordered_json(nullptr);
  j["config"] = to_json(c);
  write_json((dir / "monitor_summary.json").string(), j);
}

void cmd_bench(const Globals& g) {
  const auto c = bench_config(g);
  const auto dir = out_dir(g);
  const auto result = run_bench(c);
  write_text(dir / "scores.csv", [&](std::ostream& os) { write_scores_csv(os, result.rows); });
  write_report(dir, result.rows, to_json(c));
  for (const auto& r : result.table)
    std::cout << r.label << "  auc_lr " << fmt_real(r.lr) << "  auc_likelihood_best "
              << fmt_real(r.likelihood_best()) << '\n';
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-regret trust monitoring on a synthetic sensor lab"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Config file (TOML or INI) with any of the flags below");

  Globals g;
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--fixed-point", g.fixed, "Fixed-point format, e.g. Q16.16, or off");
  app.add_option("--optimizer", g.optimizer, "spsa | zo-sgd | zo-sign");
  app.add_option("--iterations", g.iterations, "Per-sample optimizer iterations");
  app.add_option("--tap", g.tap, "point | feature | encoder");
  app.add_option("--fusion", g.fusion, "off | concat");
  app.add_option("--n-train", g.n_train);
  app.add_option("--n-val", g.n_val);
  app.add_option("--n-test", g.n_test);
  app.add_option("--n-corrupt", g.n_corrupt);
  app.add_option("--n-stream", g.n_stream);
  app.add_option("--extractor-epochs", g.extractor_epochs);
  app.add_option("--vae-epochs", g.vae_epochs);
  app.add_option("--spsa-a", g.spsa_a);
  app.add_option("--spsa-c", g.spsa_c);
  app.add_option("--mc-samples", g.mc_samples);
  app.add_option("--percentile", g.percentile, "Clean-LR percentile used as the monitor threshold");

  auto* gen = app.add_subcommand("gen-data", "Generate scene files for every lab set");

  std::string scene_dir;
  auto* extract = app.add_subcommand("extract", "Fit the extractor and write feature files");
  extract->add_option("--scenes", scene_dir, "Directory written by gen-data")->required();

  std::string train_features;
  auto* train = app.add_subcommand("train-vae", "Train the VAE on a feature file");
  train->add_option("--features", train_features)->required();

  std::string model;
  std::vector<std::string> features;
  auto* score = app.add_subcommand("score", "Likelihood regret for feature files");
  score->add_option("--model", model)->required();
  score->add_option("--features", features)->required();

  std::vector<std::string> score_files;
  auto* evaluate = app.add_subcommand("evaluate", "AUC tables, ROC and histogram CSVs");
  evaluate->add_option("--scores", score_files)->required();

  std::string calib, stream;
  std::optional<double> threshold;
  auto* monitor = app.add_subcommand("monitor", "Gate a stream on its likelihood regret");
  monitor->add_option("--model", model)->required();
  monitor->add_option("--train", train_features, "Features used to fit the regressor")->required();
  monitor->add_option("--calibration", calib, "Clean features for the threshold");
  monitor->add_option("--stream", stream)->required();
  monitor->add_option("--threshold", threshold, "Fixed threshold instead of calibration");

  auto* bench = app.add_subcommand("bench", "Run the whole lab in memory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*gen) cmd_gen_data(g);
    else if (*extract) cmd_extract(g, scene_dir);
    else if (*train) cmd_train_vae(g, train_features);
    else if (*score) cmd_score(g, model, features);
    else if (*evaluate) cmd_evaluate(g, score_files);
    else if (*monitor) {
      if (!threshold && calib.empty()) throw InvalidArgument("monitor needs --calibration or --threshold");
      cmd_monitor(g, model, train_features, calib, stream, threshold);
    } else if (*bench) cmd_bench(g);
  } catch (const IoError& e) {
    print_error("io", e.what());
    return 1;
  } catch (const InvalidArgument& e) {
    print_error("invalid_argument", e.what());
    return 1;
  } catch (const Error& e) {
    print_error("runtime", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
