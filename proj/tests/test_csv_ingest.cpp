#include <doctest.h>

#include <cstdio>
#include <sstream>

#include "readmit/ingest.hpp"

using namespace readmit;

namespace {

const char* kSample =
    "encounter_id,patient_nbr,gender,age_band,time_in_hospital,weight,"
    "medical_specialty,discharge_disposition_id,readmitted\n"
    "10,100,Female,[50-60),3,?,Cardiology,1,NO\n"
    "12,100,Female,[50-60),5,?,Cardiology,1,<30\n"
    "11,101,Male,[60-70),2,?,?,1,>30\n"
    "13,102,Female,[40-50),7,95,Surgery,11,NO\n"
    "14,103,Male,[60-70),1,?,Surgery,2,<30\n";

EncounterData parse_sample(const std::string& text = kSample) {
    std::istringstream schema_in(text);
    IngestRoles roles;
    FeatureSchema schema = infer_schema(schema_in, roles);
    std::istringstream in(text);
    return parse_csv(in, schema, roles);
}

}  // namespace

TEST_CASE("csv parsing handles quotes, flags missing cells, preserves order") {
    EncounterData data = parse_sample();
    REQUIRE(data.rows.size() == 5);
    CHECK(data.rows[0].encounter_id == "10");
    CHECK(data.rows[2].patient_id == "101");

    std::size_t weight_idx = data.schema.index_of("weight");
    CHECK(data.rows[0].missing[weight_idx]);       // "?" flagged
    CHECK_FALSE(data.rows[3].missing[weight_idx]);  // 95 present

    // quoted fields with embedded commas
    std::string quoted =
        "encounter_id,patient_nbr,note,readmitted\n"
        "1,7,\"hello, world\",NO\n";
    IngestRoles roles;
    roles.disposition_column = "none";
    std::istringstream si(quoted);
    FeatureSchema schema = infer_schema(si, roles);
    std::istringstream in(quoted);
    auto d2 = parse_csv(in, schema, roles);
    CHECK(d2.rows[0].cells[2] == "hello, world");
}

TEST_CASE("empty file with a valid header parses to an empty list") {
    std::string text = "encounter_id,patient_nbr,readmitted\n";
    IngestRoles roles;
    std::istringstream si(text);
    FeatureSchema schema = infer_schema(si, roles);
    std::istringstream in(text);
    auto data = parse_csv(in, schema, roles);
    CHECK(data.rows.empty());
}

TEST_CASE("malformed row width raises a parse error naming the line") {
    std::string text = "encounter_id,patient_nbr,readmitted\n1,2,NO\n3,4\n";
    IngestRoles roles;
    std::istringstream si("encounter_id,patient_nbr,readmitted\n1,2,NO\n");
    FeatureSchema schema = infer_schema(si, roles);
    std::istringstream in(text);
    try {
        parse_csv(in, schema, roles);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("unknown header column raises a schema error") {
    IngestRoles roles;
    std::istringstream si("encounter_id,patient_nbr,readmitted\n1,2,NO\n");
    FeatureSchema schema = infer_schema(si, roles);
    std::istringstream in("encounter_id,patient_other,readmitted\n1,2,NO\n");
    CHECK_THROWS_AS(parse_csv(in, schema, roles), SchemaError);
}

TEST_CASE("schema inference types columns and collects levels") {
    EncounterData data = parse_sample();
    const auto& schema = data.schema;
    CHECK(schema.columns[schema.index_of("time_in_hospital")].kind == FeatureKind::Numeric);
    const auto& gender = schema.columns[schema.index_of("gender")];
    CHECK(gender.kind == FeatureKind::Categorical);
    CHECK(gender.levels == std::vector<std::string>{"Female", "Male"});
    // medical_specialty saw "?" so a "missing" level was added
    const auto& spec = schema.columns[schema.index_of("medical_specialty")];
    CHECK(std::count(spec.levels.begin(), spec.levels.end(), "missing") == 1);
}

TEST_CASE("cohort filter keeps the first encounter and drops death dispositions") {
    EncounterData data = parse_sample();
    auto outcome = filter_cohort(data);
    // patient 100 had encounters 10 and 12: only 10 kept;
    // encounter 13 (disposition 11 = expired) removed
    CHECK(outcome.dropped_repeat_encounters == 1);
    CHECK(outcome.dropped_dispositions == 1);
    REQUIRE(data.rows.size() == 3);
    CHECK(data.rows[0].encounter_id == "10");
    CHECK(data.rows[1].encounter_id == "11");
    CHECK(data.rows[2].encounter_id == "14");

    // no duplicate patients remain
    std::set<std::string> patients;
    for (const auto& r : data.rows) CHECK(patients.insert(r.patient_id).second);
}

TEST_CASE("sparse columns drop by threshold and by explicit policy") {
    EncounterData data = parse_sample();
    filter_cohort(data);
    // weight: missing in all kept rows -> over threshold; payer-code analog
    // dropped by policy below threshold
    auto dropped = drop_sparse_columns(data, 0.5, {"age_band"});
    REQUIRE(dropped.size() == 2);
    bool saw_weight = false, saw_age = false;
    for (const auto& d : dropped) {
        if (d.name == "weight") {
            saw_weight = true;
            CHECK(d.reason == "missing fraction over threshold");
        }
        if (d.name == "age_band") {
            saw_age = true;
            CHECK(d.reason == "explicit policy");
        }
    }
    CHECK(saw_weight);
    CHECK(saw_age);
    CHECK_FALSE(data.schema.has_column("weight"));
    // medical_specialty retained despite missing values (below threshold)
    CHECK(data.schema.has_column("medical_specialty"));

    // fully populated column is retained
    CHECK(data.schema.has_column("time_in_hospital"));
}

TEST_CASE("high-cardinality categorical features are dropped with a note") {
    std::ostringstream text;
    text << "encounter_id,patient_nbr,icd_code,readmitted\n";
    for (int i = 0; i < 20; ++i)
        text << i << "," << 100 + i << ",code" << i << "," << (i % 2 ? "<30" : "NO") << "\n";
    IngestRoles roles;
    std::istringstream si(text.str());
    FeatureSchema schema = infer_schema(si, roles);
    std::istringstream in(text.str());
    auto data = parse_csv(in, schema, roles);
    auto dropped = drop_high_cardinality_columns(data, 8);
    CHECK(dropped == std::vector<std::string>{"icd_code"});
    CHECK_FALSE(data.schema.has_column("icd_code"));
}

TEST_CASE("label derivation follows the policy") {
    CHECK(derive_label("<30", LabelPolicy::Under30) == 1);
    CHECK(derive_label(">30", LabelPolicy::Under30) == 0);
    CHECK(derive_label("NO", LabelPolicy::Under30) == 0);
    CHECK(derive_label("<30", LabelPolicy::AnyReadmission) == 1);
    CHECK(derive_label(">30", LabelPolicy::AnyReadmission) == 1);
    CHECK(derive_label("NO", LabelPolicy::AnyReadmission) == 0);
    try {
        derive_label("MAYBE", LabelPolicy::Under30);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("MAYBE") != std::string::npos);
    }
}

TEST_CASE("encoding one-hots categoricals with the missing level and keeps numerics") {
    EncounterData data = parse_sample();
    filter_cohort(data);
    drop_sparse_columns(data, 0.5);
    CohortTable t = encode_features(data, LabelPolicy::Under30);

    // gender indicators sum to 1 in every row
    std::size_t gf = t.column_index("gender=Female");
    std::size_t gm = t.column_index("gender=Male");
    for (std::size_t r = 0; r < t.x.rows(); ++r) CHECK(t.x(r, gf) + t.x(r, gm) == 1.0);

    // row for patient 101 has a missing medical specialty
    std::size_t ms = t.column_index("medical_specialty=missing");
    CHECK(t.x(1, ms) == 1.0);

    // numeric passthrough
    std::size_t tih = t.column_index("time_in_hospital");
    CHECK(t.x(0, tih) == 3.0);
    CHECK(t.columns[tih].kind == FeatureKind::Numeric);

    // labels: rows kept are encounters 10 (NO), 11 (>30), 14 (<30)
    CHECK(t.labels == std::vector<int>{0, 0, 1});

    // encoding is deterministic
    CohortTable t2 = encode_features(data, LabelPolicy::Under30);
    CHECK(t2.x == t.x);
}

TEST_CASE("encoding rejects a level absent from the schema") {
    EncounterData data = parse_sample();
    // corrupt a cell to an unseen level
    std::size_t g = data.schema.index_of("gender");
    data.rows[0].cells[g] = "Unknown";
    try {
        encode_features(data, LabelPolicy::Under30);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        std::string msg = e.what();
        CHECK(msg.find("gender") != std::string::npos);
        CHECK(msg.find("Unknown") != std::string::npos);
    }
}

TEST_CASE("cohort snapshot round-trips through csv plus sidecar") {
    EncounterData data = parse_sample();
    filter_cohort(data);
    drop_sparse_columns(data, 0.5);
    CohortTable t = encode_features(data, LabelPolicy::Under30);
    t.save("cohort_rt.csv", "cohort_rt.meta");
    CohortTable back = CohortTable::load("cohort_rt.csv", "cohort_rt.meta");
    CHECK(back.x == t.x);
    CHECK(back.labels == t.labels);
    REQUIRE(back.columns.size() == t.columns.size());
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        CHECK(back.columns[i].name == t.columns[i].name);
        CHECK(back.columns[i].source == t.columns[i].source);
        CHECK(back.columns[i].kind == t.columns[i].kind);
    }
    CHECK(back.provenance == t.provenance);
    std::remove("cohort_rt.csv");
    std::remove("cohort_rt.meta");
}

TEST_CASE("row count is non-increasing through filtering and invariant through encoding") {
    EncounterData data = parse_sample();
    std::size_t before = data.rows.size();
    filter_cohort(data);
    CHECK(data.rows.size() <= before);
    std::size_t after_filter = data.rows.size();
    CohortTable t = encode_features(data, LabelPolicy::Under30);
    CHECK(t.x.rows() == after_filter);
    CHECK(t.labels.size() == t.x.rows());
}
