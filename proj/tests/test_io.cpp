#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "mixmort/config.hpp"
#include "mixmort/config_codec.hpp"
#include "mixmort/dataset_io.hpp"
#include "mixmort/synth.hpp"

using namespace mixmort;

TEST_CASE("key-value config files parse with comments and overrides", "[io]") {
  const std::string path = "kv_config_test.txt";
  csv::write_file(path,
                  "# comment line\n"
                  "train.epochs = 20   # trailing comment\n"
                  "\n"
                  "train.learning_rate=0.01\n"
                  "preprocess.fit_scope = leakage-safe\n");
  KeyValueConfig kv = KeyValueConfig::load(path);
  std::remove(path.c_str());

  CHECK(kv.get_int("train.epochs", 60) == 20);
  CHECK(kv.get_double("train.learning_rate", 0.001) == 0.01);
  CHECK(kv.get_string("preprocess.fit_scope", "replicate") == "leakage-safe");
  CHECK(kv.get_int("train.batch_size", 100) == 100); // default

  TrainConfig cfg = train_config_from(kv);
  CHECK(cfg.epochs == 20);
  CHECK(cfg.learning_rate == 0.01);
  CHECK(cfg.batch_size == 100);

  SECTION("bad values raise") {
    kv.set("train.epochs", "twenty");
    CHECK_THROWS_AS(kv.get_int("train.epochs", 0), Error);
  }
  SECTION("hidden sizes parse from a comma list") {
    kv.set("train.hidden_sizes", "32,16");
    TrainConfig small = train_config_from(kv);
    CHECK(small.hidden_sizes == std::vector<int>{32, 16});
  }
}

TEST_CASE("preprocess config round-trips through its text form", "[io]") {
  PreprocessConfig cfg;
  cfg.mask_threshold = 250.0;
  cfg.iqr_multiplier = 2.0;
  cfg.fit_scope = FitScope::LeakageSafe;
  cfg.age_columns = {"age", "death_age"};
  cfg.zero_is_missing = {"lab_00", "lab_07"};
  cfg.validity_ranges = {{"lab_00", {0.5, 9.5}}, {"lab_07", {1.0, 100.0}}};
  cfg.stage_order = {Stage::UnmaskAge, Stage::ScrubInvalid, Stage::ImputeMean,
                     Stage::RemoveOutliersIqr, Stage::NormalizeMinmax};

  PreprocessConfig parsed = parse_preprocess_config(serialize_preprocess_config(cfg));
  CHECK(parsed.mask_threshold == cfg.mask_threshold);
  CHECK(parsed.mask_offset == cfg.mask_offset);
  CHECK(parsed.iqr_multiplier == cfg.iqr_multiplier);
  CHECK(parsed.fit_scope == cfg.fit_scope);
  CHECK(parsed.age_columns == cfg.age_columns);
  CHECK(parsed.zero_is_missing == cfg.zero_is_missing);
  CHECK(parsed.validity_ranges == cfg.validity_ranges);
  CHECK(parsed.stage_order == cfg.stage_order);
}

TEST_CASE("format_double round-trips exactly", "[io]") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0, -7.25, 365.2425}) {
    auto parsed = csv::parse_double(csv::format_double(v));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == v);
  }
}

TEST_CASE("csv quoting survives commas and quotes", "[io]") {
  std::vector<std::string> fields = {"plain", "with,comma", "with\"quote", ""};
  const std::string line = csv::join_row(fields);
  CHECK(csv::split_line(line) == fields);
}

TEST_CASE("prepared datasets round-trip through the binary cache", "[io]") {
  SynthConfig scfg;
  scfg.n_admissions = 60;
  scfg.seed = 12;
  scfg.embedding_dim = 16;
  const SynthCohort cohort = generate_cohort(scfg);
  auto records = drop_unlabeled(assign_labels(deduplicate(cohort.rows, cohort.schema)));
  attach_summaries(records, cohort.summaries);
  const PreprocessConfig pre = default_preprocess_config(cohort.schema);
  PreprocessResult prep = run_pipeline(records, cohort.schema, pre);

  PreparedDataset ds;
  ds.labels = prep.dataset.labels;
  ds.structured_raw = structured_matrix(records, cohort.schema);
  ds.embedding = embed_cohort(records, cohort.embeddings);
  ds.structured_prepared = prep.dataset.features;
  ds.pre = pre;

  const std::string path = "dataset_roundtrip_test.bin";
  save_dataset(ds, path);
  PreparedDataset loaded = load_dataset(path);
  std::remove(path.c_str());

  CHECK(loaded.labels == ds.labels);
  CHECK(loaded.structured_raw.values == ds.structured_raw.values);
  CHECK(loaded.structured_raw.missing == ds.structured_raw.missing);
  CHECK(loaded.structured_raw.column_names == ds.structured_raw.column_names);
  CHECK(loaded.embedding.values == ds.embedding.values);
  CHECK(loaded.full().values == ds.full().values);
  CHECK(loaded.full().column_groups == ds.full().column_groups);
  REQUIRE(loaded.structured_prepared.fit_stats.has_value());
  REQUIRE(ds.structured_prepared.fit_stats.has_value());
  for (std::size_t c = 0; c < ds.structured_prepared.cols(); ++c) {
    CHECK((*loaded.structured_prepared.fit_stats)[c].mean ==
          (*ds.structured_prepared.fit_stats)[c].mean);
    CHECK((*loaded.structured_prepared.fit_stats)[c].q1 ==
          (*ds.structured_prepared.fit_stats)[c].q1);
  }
  CHECK(loaded.pre.zero_is_missing == ds.pre.zero_is_missing);
  CHECK(loaded.pre.validity_ranges == ds.pre.validity_ranges);

  SECTION("magic and version are enforced") {
    csv::write_file("not_a_dataset.bin", "garbage");
    CHECK_THROWS_AS(load_dataset("not_a_dataset.bin"), Error);
    std::remove("not_a_dataset.bin");
  }
}
