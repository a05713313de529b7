#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "mixmort/ingest.hpp"

using namespace mixmort;

namespace {

CohortSchema tiny_schema() {
  CohortSchema s;
  s.features = {{"days", FeatureGroup::Admission, MergeKind::Scalar},
                {"age", FeatureGroup::Demographics, MergeKind::Scalar},
                {"treat_cath", FeatureGroup::Treatment, MergeKind::Indicator},
                {"treat_defib", FeatureGroup::Treatment, MergeKind::Indicator},
                {"n_visits", FeatureGroup::Comorbidity, MergeKind::Count},
                {"lab_00", FeatureGroup::LabChart, MergeKind::Scalar}};
  return s;
}

std::string tiny_header() {
  return "admission_id,subject_id,icd9_code,admit_date,death_date,days,age,"
         "treat_cath,treat_defib,n_visits,lab_00,note_id";
}

std::vector<RawAdmissionRow> parse(const std::string& body) {
  std::istringstream in(tiny_header() + "\n" + body);
  return parse_cohort_stream(in, tiny_schema(), "<test>");
}

RawAdmissionRow make_row(const std::string& id, const std::string& code) {
  RawAdmissionRow r;
  r.admission_id = id;
  r.subject_id = "S1";
  r.icd9_code = code;
  r.admit_date = *CalendarDate::parse("2001-01-01");
  r.features.resize(tiny_schema().features.size());
  return r;
}

} // namespace

TEST_CASE("parse_cohort reads well-formed files in order", "[ingest]") {
  auto rows = parse(
      "A1,S1,410.0,2001-01-01,2001-06-01,3,65,1,0,2,5.5,N1\n"
      "A2,S2,410.5,2002-03-04,,7,77,0,1,1,6.1,\n"
      "A3,S3,411.0,2003-05-06,2004-01-01,2,59,0,0,,0,N3\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].admission_id == "A1");
  CHECK(rows[1].death_date == std::nullopt);
  CHECK(rows[2].features[4] == std::nullopt); // empty cell = missing
  CHECK(rows[2].features[5] == 0.0);          // literal zero is a value
  CHECK(rows[0].note_id == "N1");
  CHECK(rows[1].note_id == std::nullopt);
}

TEST_CASE("parse_cohort handles the empty and malformed cases", "[ingest]") {
  CHECK(parse("").empty()); // header only

  SECTION("header mismatch") {
    std::istringstream in("admission_id,oops\nA1,S1\n");
    CHECK_THROWS_AS(parse_cohort_stream(in, tiny_schema(), "<t>"), SchemaMismatch);
  }
  SECTION("invalid month is reported with its line number") {
    try {
      parse("A1,S1,410.0,2001-13-01,,3,65,1,0,2,5.5,\n");
      FAIL("expected MalformedRow");
    } catch (const MalformedRow& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SECTION("wrong arity") {
    CHECK_THROWS_AS(parse("A1,S1,410.0,2001-01-01,,3\n"), MalformedRow);
  }
  SECTION("unparseable number") {
    CHECK_THROWS_AS(parse("A1,S1,410.0,2001-01-01,,3,sixty,1,0,2,5.5,\n"),
                    MalformedRow);
  }
  SECTION("empty admission id") {
    CHECK_THROWS_AS(parse(",S1,410.0,2001-01-01,,3,65,1,0,2,5.5,\n"), MalformedRow);
  }
}

TEST_CASE("select_by_icd9 keeps the inclusive numeric interval", "[ingest]") {
  std::vector<RawAdmissionRow> rows = {make_row("A1", "410.71"), make_row("A2", "411.1"),
                                       make_row("A3", "409.9"), make_row("A4", "410.0"),
                                       make_row("A5", "411.0"), make_row("A6", "412")};
  auto kept = select_by_icd9(rows);
  std::vector<std::string> codes;
  for (const auto& r : kept) codes.push_back(r.icd9_code);
  CHECK(codes == std::vector<std::string>{"410.71", "410.0", "411.0"});

  SECTION("unparseable codes are skipped with a warning count") {
    rows.push_back(make_row("A7", "V45.81"));
    IngestLog log;
    auto kept2 = select_by_icd9(rows, 410.0, 411.0, &log);
    CHECK(kept2.size() == 3);
    CHECK(log.unparseable_codes == 1);
  }
  SECTION("filtering is idempotent") {
    auto twice = select_by_icd9(kept);
    REQUIRE(twice.size() == kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
      CHECK(twice[i].admission_id == kept[i].admission_id);
  }
}

TEST_CASE("deduplicate merges duplicate admissions", "[ingest]") {
  const CohortSchema schema = tiny_schema();

  SECTION("treatment indicators are unioned") {
    RawAdmissionRow a = make_row("A1", "410.0");
    a.features[2] = 1.0; // catheterization
    RawAdmissionRow b = make_row("A1", "410.1");
    b.features[3] = 1.0; // defibrillator
    auto records = deduplicate({a, b}, schema);
    REQUIRE(records.size() == 1);
    CHECK(records[0].structured.at(FeatureGroup::Treatment).at("treat_cath") == 1.0);
    CHECK(records[0].structured.at(FeatureGroup::Treatment).at("treat_defib") == 1.0);
    CHECK(records[0].icd9_codes.size() == 2);
  }
  SECTION("single row maps to a single identical record") {
    RawAdmissionRow a = make_row("A1", "410.0");
    a.features[0] = 3.0;
    a.features[1] = 65.0;
    auto records = deduplicate({a}, schema);
    REQUIRE(records.size() == 1);
    CHECK(records[0].admission_id == "A1");
    CHECK(records[0].structured.at(FeatureGroup::Admission).at("days") == 3.0);
    CHECK(records[0].structured.at(FeatureGroup::Demographics).at("age") == 65.0);
  }
  SECTION("five rows over two admissions give two records") {
    std::vector<RawAdmissionRow> rows = {make_row("A1", "410.0"), make_row("A2", "410.1"),
                                         make_row("A1", "410.2"), make_row("A1", "410.3"),
                                         make_row("A2", "410.4")};
    auto records = deduplicate(rows, schema);
    REQUIRE(records.size() == 2);
    CHECK(records[0].admission_id == "A1");
    CHECK(records[1].admission_id == "A2");
  }
  SECTION("count features are summed, scalars keep first non-missing") {
    RawAdmissionRow a = make_row("A1", "410.0");
    a.features[4] = 2.0;
    a.features[0] = 3.0;
    RawAdmissionRow b = make_row("A1", "410.0");
    b.features[4] = 1.0;
    b.features[0] = 9.0; // conflicting scalar
    IngestLog log;
    auto records = deduplicate({a, b}, schema, &log);
    CHECK(records[0].structured.at(FeatureGroup::Comorbidity).at("n_visits") == 3.0);
    CHECK(records[0].structured.at(FeatureGroup::Admission).at("days") == 3.0);
    CHECK(log.scalar_conflicts == 1);
  }
  SECTION("output ids are pairwise distinct and count never grows") {
    std::vector<RawAdmissionRow> rows;
    for (int i = 0; i < 40; ++i) rows.push_back(make_row("A" + std::to_string(i % 7), "410.0"));
    auto records = deduplicate(rows, schema);
    CHECK(records.size() == 7);
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.admission_id);
    CHECK(ids.size() == records.size());
  }
}

TEST_CASE("assign_labels applies the inclusive one-year horizon", "[ingest]") {
  auto record_with_death = [](const char* admit, const char* death) {
    AdmissionRecord r;
    r.admission_id = "A1";
    r.admit_date = *CalendarDate::parse(admit);
    if (death) r.death_date = *CalendarDate::parse(death);
    return r;
  };

  auto labeled = assign_labels({record_with_death("2001-01-01", "2001-06-01"),
                                record_with_death("2001-01-01", nullptr),
                                record_with_death("2001-01-01", "2002-01-01"),
                                record_with_death("2001-01-01", "2002-01-02")});
  CHECK(labeled[0].label == 1); // 151 days
  CHECK(labeled[1].label == 0); // no death recorded
  CHECK(labeled[2].label == 1); // exactly 365 days, inclusive boundary
  CHECK(labeled[3].label == 0); // 366 days

  SECTION("death before admission flags the record and clears the label") {
    IngestLog log;
    auto flagged = assign_labels({record_with_death("2001-06-01", "2001-01-01")}, 365, &log);
    CHECK(flagged[0].negative_interval);
    CHECK_FALSE(flagged[0].label.has_value());
    CHECK(log.negative_intervals == 1);
    CHECK(drop_unlabeled(flagged).empty());
  }
  SECTION("label 1 never appears without a death date") {
    for (const auto& r : labeled)
      if (r.label == 1) CHECK(r.death_date.has_value());
  }
  SECTION("horizon must be positive") {
    CHECK_THROWS_AS(assign_labels({}, 0), Error);
  }
}

TEST_CASE("summaries join on admission id", "[ingest]") {
  std::vector<AdmissionRecord> records(2);
  records[0].admission_id = "A1";
  records[1].admission_id = "A2";
  attach_summaries(records, {{"A1", "stable course"}});
  CHECK(records[0].discharge_summary == "stable course");
  CHECK_FALSE(records[1].discharge_summary.has_value());
}

TEST_CASE("structured_matrix lays out schema columns with missing mask", "[ingest]") {
  const CohortSchema schema = tiny_schema();
  RawAdmissionRow a = make_row("A1", "410.0");
  a.features[0] = 3.0;
  auto records = deduplicate({a}, schema);
  FeatureMatrix m = structured_matrix(records, schema);
  REQUIRE(m.rows() == 1);
  REQUIRE(m.cols() == schema.features.size());
  CHECK(m.at(0, 0) == 3.0);
  CHECK(m.is_missing(0, 1)); // age never set
  CHECK(m.column_groups[2] == FeatureGroup::Treatment);
}

TEST_CASE("default schema allocates 79 structured features", "[ingest]") {
  const CohortSchema schema = CohortSchema::default_schema();
  CHECK(schema.features.size() == 79);
  std::map<FeatureGroup, int> counts;
  for (const auto& f : schema.features) counts[f.group]++;
  CHECK(counts[FeatureGroup::Admission] == 5);
  CHECK(counts[FeatureGroup::Demographics] == 6);
  CHECK(counts[FeatureGroup::Treatment] == 10);
  CHECK(counts[FeatureGroup::Comorbidity] == 18);
  CHECK(counts[FeatureGroup::LabChart] == 40);
}
