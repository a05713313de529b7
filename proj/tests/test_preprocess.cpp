#include <catch2/catch_amalgamated.hpp>

#include "mixmort/preprocess.hpp"
#include "mixmort/rng.hpp"
#include "mixmort/synth.hpp"
#include "oracles.hpp"

using namespace mixmort;

namespace {

FeatureMatrix column_matrix(const std::string& name,
                            const std::vector<std::optional<double>>& values,
                            FeatureGroup group = FeatureGroup::LabChart) {
  FeatureMatrix m = FeatureMatrix::zeros(values.size(), {name}, {group});
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (values[r]) m.set(r, 0, *values[r]);
    else m.set_missing(r, 0);
  }
  return m;
}

std::vector<std::optional<double>> column_of(const FeatureMatrix& m, std::size_t c) {
  std::vector<std::optional<double>> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (!m.is_missing(r, c)) out[r] = m.at(r, c);
  return out;
}

} // namespace

TEST_CASE("unmask_age subtracts the offset above the threshold", "[preprocess]") {
  PreprocessConfig cfg;
  CHECK(unmask_age(301.0, cfg) == 90.0);
  CHECK(unmask_age(65.0, cfg) == 65.0);
  CHECK(unmask_age(300.0, cfg) == 89.0);
  CHECK_THROWS_AS(unmask_age(-1.0, cfg), Error);

  SECTION("exactly inverts the +211 masking for ages 90-120") {
    for (int age = 90; age <= 120; ++age)
      CHECK(unmask_age(static_cast<double>(age) + 211.0, cfg) == static_cast<double>(age));
  }
}

TEST_CASE("scrub_invalid removes zeros and out-of-range values", "[preprocess]") {
  PreprocessConfig cfg;

  SECTION("zero lab entries become missing") {
    cfg.zero_is_missing = {"lab"};
    FeatureMatrix m = column_matrix("lab", {0.0, 5.1, 7.2});
    StageAudit audit;
    FeatureMatrix out = scrub_invalid(m, cfg, &audit);
    CHECK(out.is_missing(0, 0));
    CHECK(out.at(1, 0) == 5.1);
    CHECK(out.at(2, 0) == 7.2);
    CHECK(audit.cells_changed.at("lab") == 1);
  }
  SECTION("columns with no rules pass through") {
    FeatureMatrix m = column_matrix("lab", {0.0, 5.1});
    FeatureMatrix out = scrub_invalid(m, cfg);
    CHECK(out.values == m.values);
    CHECK(out.missing == m.missing);
  }
  SECTION("validity range check") {
    cfg.validity_ranges["heart_rate"] = {20.0, 300.0};
    FeatureMatrix m = column_matrix("heart_rate", {72.0, 400.0});
    FeatureMatrix out = scrub_invalid(m, cfg);
    CHECK(out.at(0, 0) == 72.0);
    CHECK(out.is_missing(1, 0));
  }
  SECTION("unknown feature in validity ranges") {
    cfg.validity_ranges["nope"] = {0.0, 1.0};
    FeatureMatrix m = column_matrix("lab", {1.0});
    CHECK_THROWS_AS(scrub_invalid(m, cfg), UnknownFeature);
  }
}

TEST_CASE("remove_outliers_iqr uses type-7 quantile fences", "[preprocess]") {
  PreprocessConfig cfg;

  SECTION("the 1..9,100 example") {
    // frozen oracle values: Q1 = 3.25, Q3 = 7.75, upper fence 14.5
    std::vector<double> vals{1, 2, 3, 4, 5, 6, 7, 8, 9, 100};
    CHECK(oracle::quantile(vals, 0.25) == 3.25);
    CHECK(oracle::quantile(vals, 0.75) == 7.75);
    std::vector<std::optional<double>> col(vals.begin(), vals.end());
    FeatureMatrix out = remove_outliers_iqr(column_matrix("x", col), cfg);
    CHECK(out.is_missing(9, 0));
    for (std::size_t r = 0; r < 9; ++r) CHECK_FALSE(out.is_missing(r, 0));
  }
  SECTION("constant columns are untouched") {
    FeatureMatrix out =
        remove_outliers_iqr(column_matrix("x", {5.0, 5.0, 5.0, 5.0}), cfg);
    CHECK(out.missing_count() == 0);
  }
  SECTION("columns already inside the fences pass through") {
    FeatureMatrix m = column_matrix("x", {1.0, 2.0, 3.0, 4.0, 5.0});
    FeatureMatrix out = remove_outliers_iqr(m, cfg);
    CHECK(out.values == m.values);
    CHECK(out.missing_count() == 0);
  }
  SECTION("binary indicator columns are exempt from the fences") {
    // a 10%-rate indicator: Q1 = Q3 = 0 would otherwise delete every flag
    std::vector<std::optional<double>> col(20, 0.0);
    col[3] = 1.0;
    col[11] = 1.0;
    FeatureMatrix out = remove_outliers_iqr(column_matrix("treat", col), cfg);
    CHECK(out.missing_count() == 0);
    CHECK(out.at(3, 0) == 1.0);

    PreprocessConfig strict = cfg;
    strict.iqr_skip_binary = false;
    FeatureMatrix wiped = remove_outliers_iqr(column_matrix("treat", col), strict);
    CHECK(wiped.is_missing(3, 0)); // the degenerate fences bite
  }
  SECTION("fewer than four observed values skips the column with a warning") {
    std::vector<std::string> warnings;
    FeatureMatrix out = remove_outliers_iqr(
        column_matrix("x", {1.0, 2.0, 1000.0}), cfg, nullptr, &warnings);
    CHECK(out.missing_count() == 0);
    REQUIRE(warnings.size() == 1);
  }
  SECTION("agrees exactly with the brute-force oracle on random columns") {
    Rng rng(20240817);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 4 + rng.uniform_below(400);
      std::vector<std::optional<double>> col(n);
      for (auto& v : col) {
        if (rng.bernoulli(0.1)) continue; // missing
        v = rng.bernoulli(0.05) ? rng.normal(0.0, 50.0) : rng.normal(10.0, 2.0);
      }
      std::size_t observed = 0;
      for (const auto& v : col) observed += v.has_value();
      if (observed < 4) continue;
      FeatureMatrix out = remove_outliers_iqr(column_matrix("x", col), cfg);
      const auto expected = oracle::iqr_outlier_mask(col, cfg.iqr_multiplier);
      for (std::size_t r = 0; r < n; ++r) {
        const bool missing_now = out.is_missing(r, 0);
        const bool was_missing = !col[r].has_value();
        REQUIRE(missing_now == (was_missing || expected[r]));
      }
    }
  }
}

TEST_CASE("impute_mean fills missing cells with the column mean", "[preprocess]") {
  PreprocessConfig cfg;
  SECTION("basic examples") {
    FeatureMatrix out = impute_mean(column_matrix("x", {1.0, std::nullopt, 3.0}), cfg);
    CHECK(out.at(1, 0) == 2.0);
    FeatureMatrix out2 =
        impute_mean(column_matrix("x", {2.0, 4.0, std::nullopt, std::nullopt}), cfg);
    CHECK(out2.at(2, 0) == 3.0);
    CHECK(out2.at(3, 0) == 3.0);
    CHECK(out2.missing_count() == 0);
  }
  SECTION("no missing values is an identity") {
    FeatureMatrix m = column_matrix("x", {1.0, 2.0});
    FeatureMatrix out = impute_mean(m, cfg);
    CHECK(out.values == m.values);
  }
  SECTION("a column with no observed values throws") {
    CHECK_THROWS_AS(impute_mean(column_matrix("x", {std::nullopt, std::nullopt}), cfg),
                    AllMissingColumn);
  }
}

TEST_CASE("normalize_minmax maps every column into [0,1]", "[preprocess]") {
  PreprocessConfig cfg;
  SECTION("midpoint symmetry") {
    FeatureMatrix out = normalize_minmax(column_matrix("x", {2.0, 3.0, 4.0}), cfg);
    CHECK(out.at(0, 0) == 0.0);
    CHECK(out.at(1, 0) == 0.5);
    CHECK(out.at(2, 0) == 1.0);
  }
  SECTION("constant columns map to zero") {
    FeatureMatrix out = normalize_minmax(column_matrix("x", {7.0, 7.0, 7.0}), cfg);
    for (std::size_t r = 0; r < 3; ++r) CHECK(out.at(r, 0) == 0.0);
  }
  SECTION("direct formula") {
    FeatureMatrix out =
        normalize_minmax(column_matrix("x", {10.0, 30.0, 20.0, 40.0}), cfg);
    CHECK(out.at(0, 0) == 0.0);
    CHECK(out.at(1, 0) == Catch::Approx(2.0 / 3.0).margin(1e-15));
    CHECK(out.at(2, 0) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK(out.at(3, 0) == 1.0);
  }
  SECTION("idempotent on its own output") {
    Rng rng(5);
    std::vector<std::optional<double>> col(50);
    for (auto& v : col) v = rng.normal(3.0, 10.0);
    FeatureMatrix once = normalize_minmax(column_matrix("x", col), cfg);
    FeatureMatrix twice = normalize_minmax(once, cfg);
    for (std::size_t r = 0; r < 50; ++r)
      CHECK(std::abs(twice.at(r, 0) - once.at(r, 0)) < 1e-12);
  }
  SECTION("missing cells are rejected") {
    CHECK_THROWS_AS(normalize_minmax(column_matrix("x", {1.0, std::nullopt}), cfg),
                    Error);
  }
}

TEST_CASE("run_pipeline applies the five stages in order", "[preprocess]") {
  // build a small labeled cohort through the synthetic generator
  SynthConfig scfg;
  scfg.n_admissions = 120;
  scfg.seed = 99;
  const SynthCohort cohort = generate_cohort(scfg);
  auto records = assign_labels(deduplicate(cohort.rows, cohort.schema));
  records = drop_unlabeled(std::move(records));
  const PreprocessConfig cfg = default_preprocess_config(cohort.schema);

  PreprocessResult result = run_pipeline(records, cohort.schema, cfg);

  SECTION("output is fully observed and inside the unit interval") {
    const FeatureMatrix& m = result.dataset.features;
    CHECK(m.missing_count() == 0);
    for (double v : m.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(result.dataset.labels.size() == m.rows());
  }
  SECTION("audit lists the stages in pipeline order") {
    REQUIRE(result.audit.stages.size() == 5);
    CHECK(result.audit.stages[0].stage == Stage::UnmaskAge);
    CHECK(result.audit.stages[1].stage == Stage::ScrubInvalid);
    CHECK(result.audit.stages[2].stage == Stage::RemoveOutliersIqr);
    CHECK(result.audit.stages[3].stage == Stage::ImputeMean);
    CHECK(result.audit.stages[4].stage == Stage::NormalizeMinmax);
  }
  SECTION("a reordered pipeline is detectable through the audit") {
    PreprocessConfig swapped = cfg;
    swapped.stage_order = {Stage::UnmaskAge, Stage::ScrubInvalid, Stage::ImputeMean,
                           Stage::RemoveOutliersIqr, Stage::NormalizeMinmax};
    PreprocessResult other = run_pipeline(records, cohort.schema, swapped);
    REQUIRE(other.audit.stages.size() == 5);
    CHECK(other.audit.stages[2].stage == Stage::ImputeMean);
    CHECK(other.audit.stages[3].stage == Stage::RemoveOutliersIqr);
    // imputing first leaves nothing for the fence stage to see as missing,
    // so the two orders change different cell counts
    CHECK(other.audit.stages[3].total() >= 0);
  }
  SECTION("masked ages come back to human range before normalization") {
    FeatureMatrix raw = structured_matrix(records, cohort.schema);
    const auto age_col = raw.column_index("age");
    REQUIRE(age_col.has_value());
    detail::apply_unmask(raw, cfg, nullptr);
    auto ages = column_of(raw, *age_col);
    for (const auto& a : ages) {
      REQUIRE(a.has_value());
      CHECK(*a <= 120.0);
      CHECK(*a >= 18.0);
    }
  }
}

TEST_CASE("pipeline reduces to min-max scaling on already-clean data", "[preprocess]") {
  PreprocessConfig cfg;
  cfg.age_columns.clear(); // no age column in this matrix
  FeatureMatrix m = FeatureMatrix::zeros(4, {"a", "b"},
                                         {FeatureGroup::Admission, FeatureGroup::LabChart});
  const double values[4][2] = {{1, 10}, {2, 20}, {3, 30}, {4, 40}};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) m.set(r, c, values[r][c]);

  std::vector<std::size_t> all{0, 1, 2, 3};
  PipelineModel model = fit_pipeline(m, all, cfg);
  FeatureMatrix out = apply_pipeline(m, model);
  FeatureMatrix minmax_only = normalize_minmax(m, cfg);
  CHECK(out.values == minmax_only.values);
}

TEST_CASE("leakage-safe fit uses training rows only and clamps held-out data",
          "[preprocess]") {
  PreprocessConfig cfg;
  cfg.age_columns.clear();
  cfg.fit_scope = FitScope::LeakageSafe;
  // training rows span [0, 10]; the held-out 12 passes the training fences
  // (upper fence 14.6875) but overshoots the training max
  FeatureMatrix m = column_matrix("x", {0.0, 5.0, 10.0, 7.5, 12.0},
                                  FeatureGroup::LabChart);
  std::vector<std::size_t> train{0, 1, 2, 3};

  PipelineModel model = fit_pipeline(m, train, cfg);
  CHECK(model.mean[0] == Catch::Approx(5.625));
  CHECK(model.minv[0] == 0.0);
  CHECK(model.maxv[0] == 10.0);
  CHECK(model.q1[0] == 3.75);
  CHECK(model.q3[0] == 8.125);

  FeatureMatrix out = apply_pipeline(m, model);
  CHECK(out.at(1, 0) == 0.5);
  CHECK(out.at(4, 0) == 1.0); // clamped, not 1.2

  SECTION("held-out missing cells get the training mean") {
    FeatureMatrix with_missing =
        column_matrix("x", {0.0, 5.0, 10.0, 7.5, std::nullopt});
    PipelineModel pm = fit_pipeline(with_missing, train, cfg);
    FeatureMatrix filled = apply_pipeline(with_missing, pm);
    CHECK(filled.at(4, 0) == Catch::Approx(0.5625)); // (5.625-0)/10
  }
}
