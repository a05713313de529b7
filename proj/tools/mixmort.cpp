// mixmort — reproducible one-year mortality prediction experiments on
// mixed structured + free-text cohort data.
//
//   mixmort synth    --seed 7 --out fixtures/
//   mixmort prepare  --cohort fixtures/cohort.csv --summaries fixtures/summaries.tsv
//                    --embeddings fixtures/embeddings.vec --out prepared/
//   mixmort evaluate --data prepared/dataset.bin --model mlp --runs 10 --folds 10
//                    --seed 1 --out results/
//   mixmort ablate   --data prepared/dataset.bin --seed 1 --out ablation/

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixmort/config_codec.hpp"
#include "mixmort/version.hpp"

namespace {

using namespace mixmort;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ManifestWriter {
  nlohmann::json j;
  std::string out_dir;

  ManifestWriter(const std::string& subcommand, const std::string& dir)
      : out_dir(dir) {
    j["subcommand"] = subcommand;
    j["tool_version"] = kVersion;
    j["started_at"] = iso_timestamp();
    j["inputs"] = nlohmann::json::object();
    j["outputs"] = nlohmann::json::array();
  }

  void finish() {
    j["finished_at"] = iso_timestamp();
    std::filesystem::create_directories(out_dir);
    csv::write_file(out_dir + "/manifest.json", j.dump(2) + "\n");
  }
};

KeyValueConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return KeyValueConfig::load(path);
}

std::set<FeatureGroup> parse_groups(const std::string& list) {
  std::set<FeatureGroup> groups;
  for (const auto& item : detail::split_on(list, ',')) {
    if (item == "text" || item == "free_text") {
      groups.insert(FeatureGroup::TextEmbedding);
      continue;
    }
    auto g = feature_group_from_string(item);
    if (!g) throw Error("unknown feature group: " + item);
    groups.insert(*g);
  }
  if (groups.empty()) throw Error("--groups: empty selection");
  return groups;
}

void write_curves(const EvalReport& report, const std::string& dir) {
  {
    std::string out = "recall,precision\n";
    for (const auto& [r, p] : report.pr_points)
      out += csv::format_double(r) + "," + csv::format_double(p) + "\n";
    csv::write_file(dir + "/pr_curve.csv", out);
  }
  {
    std::string out = "fpr,tpr\n";
    for (const auto& [f, t] : report.roc_points)
      out += csv::format_double(f) + "," + csv::format_double(t) + "\n";
    csv::write_file(dir + "/roc_curve.csv", out);
  }
}

// --- subcommands -----------------------------------------------------------

int cmd_synth(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<long long> n, const std::string& out_dir) {
  const KeyValueConfig kv = load_config(config_path);
  SynthConfig cfg = synth_config_from(kv);
  if (seed) cfg.seed = *seed;
  if (n) cfg.n_admissions = static_cast<std::size_t>(*n);

  ManifestWriter manifest("synth", out_dir);
  manifest.j["config_path"] = config_path;
  manifest.j["seed"] = cfg.seed;

  const SynthCohort cohort = generate_cohort(cfg);
  const FixturePaths paths = write_fixture(cohort, out_dir);
  for (const std::string& p :
       {paths.cohort_csv, paths.summaries_tsv, paths.embeddings_vec,
        paths.labels_csv, paths.schema_csv, paths.config_echo})
    manifest.j["outputs"].push_back(p);
  manifest.finish();

  std::cout << "wrote " << cohort.rows.size() << " rows ("
            << cohort.admission_ids.size() << " admissions) to " << out_dir << "\n";
  return 0;
}

int cmd_prepare(const std::string& cohort_csv, const std::string& summaries_tsv,
                const std::string& embeddings_vec, const std::string& schema_path,
                const std::string& config_path, const std::string& out_dir) {
  const KeyValueConfig kv = load_config(config_path);
  const CohortSchema schema =
      schema_path.empty() ? CohortSchema::default_schema() : CohortSchema::load(schema_path);

  ManifestWriter manifest("prepare", out_dir);
  manifest.j["config_path"] = config_path;
  manifest.j["inputs"] = {{"cohort", cohort_csv},
                          {"summaries", summaries_tsv},
                          {"embeddings", embeddings_vec},
                          {"schema", schema_path.empty() ? "<default>" : schema_path}};

  IngestLog log;
  auto rows = parse_cohort(cohort_csv, schema);
  const double lo = kv.get_double("ingest.icd9_lo", 410.0);
  const double hi = kv.get_double("ingest.icd9_hi", 411.0);
  rows = select_by_icd9(rows, lo, hi, &log);
  auto records = deduplicate(rows, schema, &log);
  const long horizon = kv.get_int("ingest.horizon_days", 365);
  records = assign_labels(std::move(records), horizon, &log);
  records = drop_unlabeled(std::move(records));
  attach_summaries(records, load_summaries(summaries_tsv));

  PreprocessConfig pre = preprocess_config_from(kv, default_preprocess_config(schema));
  PreprocessResult result = run_pipeline(records, schema, pre);

  std::size_t dup_tokens = 0;
  const EmbeddingTable table = load_embeddings(embeddings_vec, &dup_tokens);
  const FeatureMatrix emb = embed_cohort(records, table);

  PreparedDataset ds;
  ds.labels = result.dataset.labels;
  ds.structured_raw = structured_matrix(records, schema);
  ds.embedding = emb;
  ds.structured_prepared = result.dataset.features;
  ds.pre = pre;

  std::filesystem::create_directories(out_dir);
  save_dataset(ds, out_dir + "/dataset.bin");
  write_dataset_csv(ds, out_dir + "/dataset.csv");

  // audit: per-stage cell changes plus ingest counters
  nlohmann::json audit;
  audit["mode"] = to_string(result.audit.scope);
  audit["stages"] = nlohmann::json::array();
  for (const auto& st : result.audit.stages)
    audit["stages"].push_back({{"stage", to_string(st.stage)},
                               {"cells_changed", st.cells_changed},
                               {"total", st.total()}});
  audit["warnings"] = result.audit.warnings;
  audit["ingest"] = {{"rows_parsed", rows.size()},
                     {"admissions", records.size()},
                     {"unparseable_codes", log.unparseable_codes},
                     {"scalar_conflicts", log.scalar_conflicts},
                     {"negative_intervals", log.negative_intervals},
                     {"duplicate_embedding_tokens", dup_tokens}};
  csv::write_file(out_dir + "/audit.json", audit.dump(2) + "\n");

  manifest.j["outputs"] = {out_dir + "/dataset.bin", out_dir + "/dataset.csv",
                           out_dir + "/audit.json"};
  manifest.finish();

  std::cout << "prepared " << ds.full().rows() << " x " << ds.full().cols()
            << " dataset (" << ds.structured_raw.cols() << " structured + "
            << ds.embedding.cols() << " embedding columns)\n";
  return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& model,
                 int runs, int folds, std::uint64_t seed, const std::string& mode,
                 const std::string& groups_list, const std::string& config_path,
                 const std::string& out_dir) {
  const KeyValueConfig kv = load_config(config_path);
  const PreparedDataset ds = load_dataset(data_path);
  const FitScope scope =
      mode == "leakage-safe" ? FitScope::LeakageSafe : FitScope::ReplicatePaper;

  CvSource src = ds.to_source(scope);
  if (!groups_list.empty()) src = select_groups(src, parse_groups(groups_list));

  EvalConfig cfg = eval_config_from(kv);
  const ModelKind kind = model == "logistic" ? ModelKind::Logistic : ModelKind::Mlp;

  ManifestWriter manifest("evaluate", out_dir);
  manifest.j["config_path"] = config_path;
  manifest.j["seed"] = seed;
  manifest.j["inputs"] = {{"data", data_path}};

  EvalReport report = run_cv(src, kind, runs, folds, cfg, seed);
  report.config_echo = eval_config_echo(cfg);
  report.config_echo["runs"] = runs;
  report.config_echo["folds"] = folds;
  report.config_echo["mode"] = to_string(scope);
  report.config_echo["groups"] = groups_list.empty() ? "all" : groups_list;

  std::filesystem::create_directories(out_dir);
  csv::write_file(out_dir + "/report.json", to_json(report).dump(2) + "\n");
  write_curves(report, out_dir);
  manifest.j["outputs"] = {out_dir + "/report.json", out_dir + "/pr_curve.csv",
                           out_dir + "/roc_curve.csv"};
  manifest.finish();

  std::cout << report.model_kind << ": accuracy " << report.averaged.accuracy
            << ", precision " << report.averaged.precision << ", recall "
            << report.averaged.recall << ", f " << report.averaged.f_measure
            << "\n";
  return 0;
}

int cmd_ablate(const std::string& data_path, const std::string& model, int runs,
               int folds, std::uint64_t seed, const std::string& mode,
               const std::string& config_path, const std::string& out_dir) {
  const KeyValueConfig kv = load_config(config_path);
  const PreparedDataset ds = load_dataset(data_path);
  const FitScope scope =
      mode == "leakage-safe" ? FitScope::LeakageSafe : FitScope::ReplicatePaper;
  const CvSource src = ds.to_source(scope);
  EvalConfig cfg = eval_config_from(kv);
  const ModelKind kind = model == "logistic" ? ModelKind::Logistic : ModelKind::Mlp;

  ManifestWriter manifest("ablate", out_dir);
  manifest.j["config_path"] = config_path;
  manifest.j["seed"] = seed;
  manifest.j["inputs"] = {{"data", data_path}};

  const auto combos = default_ablation_combos();
  std::vector<EvalReport> reports =
      run_ablation(src, combos, runs, folds, cfg, seed, kind);

  std::filesystem::create_directories(out_dir);
  std::string summary = "combo,accuracy,precision,recall,f_measure\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    EvalReport& r = reports[i];
    const std::string name = combo_name(combos[i]);
    nlohmann::json echo = eval_config_echo(cfg);
    echo["combo"] = name;
    echo["runs"] = runs;
    echo["folds"] = folds;
    echo["mode"] = to_string(scope);
    r.config_echo = echo;
    const std::string path = out_dir + "/report_" + name + ".json";
    csv::write_file(path, to_json(r).dump(2) + "\n");
    manifest.j["outputs"].push_back(path);
    summary += name + "," + csv::format_double(r.averaged.accuracy) + "," +
               csv::format_double(r.averaged.precision) + "," +
               csv::format_double(r.averaged.recall) + "," +
               csv::format_double(r.averaged.f_measure) + "\n";
    std::cout << name << ": accuracy " << r.averaged.accuracy << ", f "
              << r.averaged.f_measure << "\n";
  }
  csv::write_file(out_dir + "/summary.csv", summary);
  manifest.j["outputs"].push_back(out_dir + "/summary.csv");
  manifest.finish();
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-year mortality prediction from mixed structured + "
               "free-text cohort data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mixmort::kVersion);

  std::string config_path, out_dir;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort fixture");
  std::optional<std::uint64_t> synth_seed;
  std::optional<long long> synth_n;
  synth->add_option("--config", config_path, "key-value configuration file");
  synth->add_option("--seed", synth_seed, "generator seed (overrides config)");
  synth->add_option("--n", synth_n, "number of admissions (overrides config)");
  synth->add_option("--out", out_dir, "output directory")->required();

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "ingest, preprocess and embed a cohort into a dataset");
  std::string cohort_csv, summaries_tsv, embeddings_vec, schema_path;
  prepare->add_option("--cohort", cohort_csv, "cohort CSV")->required();
  prepare->add_option("--summaries", summaries_tsv, "discharge summaries TSV")
      ->required();
  prepare->add_option("--embeddings", embeddings_vec, "word-vector file")->required();
  prepare->add_option("--schema", schema_path, "feature schema CSV (default built-in)");
  prepare->add_option("--config", config_path, "key-value configuration file");
  prepare->add_option("--out", out_dir, "output directory")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "cross-validated evaluation");
  std::string data_path, model = "mlp", mode = "replicate", groups_list;
  int runs = 10, folds = 10;
  std::uint64_t seed = 1;
  evaluate->add_option("--data", data_path, "prepared dataset.bin")->required();
  evaluate->add_option("--model", model, "mlp | logistic")
      ->check(CLI::IsMember({"mlp", "logistic"}));
  evaluate->add_option("--runs", runs, "number of repeated runs (default 10)");
  evaluate->add_option("--folds", folds, "folds per run (default 10)");
  evaluate->add_option("--seed", seed, "master seed");
  evaluate->add_option("--mode", mode, "replicate | leakage-safe")
      ->check(CLI::IsMember({"replicate", "leakage-safe"}));
  evaluate->add_option("--groups", groups_list,
                       "comma list of feature groups (default: all)");
  evaluate->add_option("--config", config_path, "key-value configuration file");
  evaluate->add_option("--out", out_dir, "output directory")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "feature-group ablation sweep");
  ablate->add_option("--data", data_path, "prepared dataset.bin")->required();
  ablate->add_option("--model", model, "mlp | logistic")
      ->check(CLI::IsMember({"mlp", "logistic"}));
  ablate->add_option("--runs", runs, "number of repeated runs (default 10)");
  ablate->add_option("--folds", folds, "folds per run (default 10)");
  ablate->add_option("--seed", seed, "master seed");
  ablate->add_option("--mode", mode, "replicate | leakage-safe")
      ->check(CLI::IsMember({"replicate", "leakage-safe"}));
  ablate->add_option("--config", config_path, "key-value configuration file");
  ablate->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(config_path, synth_seed, synth_n, out_dir);
    if (prepare->parsed())
      return cmd_prepare(cohort_csv, summaries_tsv, embeddings_vec, schema_path,
                         config_path, out_dir);
    if (evaluate->parsed())
      return cmd_evaluate(data_path, model, runs, folds, seed, mode, groups_list,
                          config_path, out_dir);
    if (ablate->parsed())
      return cmd_ablate(data_path, model, runs, folds, seed, mode, config_path,
                        out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
