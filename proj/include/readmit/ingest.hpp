#pragma once

// Cohort construction from an encounter CSV: schema inference, parsing with
// missing-cell flagging, one-encounter-per-patient filtering, death/hospice
// exclusion, sparse-column dropping, label derivation and one-hot encoding
// into a numeric matrix with full column lineage.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/csv.hpp"

namespace readmit {

enum class FeatureKind { Numeric, Categorical };

struct SchemaColumn {
    std::string name;
    FeatureKind kind = FeatureKind::Categorical;
    std::vector<std::string> levels;  // sorted; categorical only
};

struct FeatureSchema {
    std::vector<SchemaColumn> columns;
    std::string missing_marker = "?";

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].name == name) return i;
        throw SchemaError("column not in schema: " + name);
    }
    bool has_column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return true;
        return false;
    }
};

// Which columns play structural roles; everything else is a feature.
struct IngestRoles {
    std::string encounter_column = "encounter_id";
    std::string patient_column = "patient_nbr";
    std::string label_column = "readmitted";
    std::string disposition_column = "discharge_disposition_id";

    bool is_feature(const std::string& name) const {
        return name != encounter_column && name != patient_column && name != label_column;
    }
};

struct RawEncounter {
    std::string encounter_id;
    std::string patient_id;
    std::vector<std::string> cells;        // aligned to schema columns
    std::vector<std::uint8_t> missing;     // per cell
};

struct EncounterData {
    FeatureSchema schema;
    IngestRoles roles;
    std::vector<RawEncounter> rows;
    std::vector<std::string> provenance;
};

// ---------------------------------------------------------------------------
// schema inference

// One pass over the file: a column whose non-missing cells all parse as
// numbers is numeric, anything else is categorical with its observed levels
// (plus a "missing" level when missing cells occur). force_categorical
// overrides numeric-looking code columns (disposition ids and the like).
inline FeatureSchema infer_schema(std::istream& in, const IngestRoles& roles,
                                  const std::vector<std::string>& force_categorical = {},
                                  std::string missing_marker = "?") {
    std::vector<std::string> header;
    std::vector<std::uint8_t> numeric_ok;
    std::vector<std::uint8_t> saw_missing;
    std::vector<std::set<std::string>> levels;

    for_each_csv_record(in, [&](std::size_t line_no, const std::vector<std::string>& fields) {
        if (header.empty()) {
            header = fields;
            numeric_ok.assign(fields.size(), 1);
            saw_missing.assign(fields.size(), 0);
            levels.resize(fields.size());
            return;
        }
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string& v = fields[c];
            if (v == missing_marker || v.empty()) {
                saw_missing[c] = 1;
                continue;
            }
            if (!try_parse_double(v)) numeric_ok[c] = 0;
            levels[c].insert(v);
        }
    });
    if (header.empty()) throw ParseError("empty file: no header row");

    std::set<std::string> forced(force_categorical.begin(), force_categorical.end());
    FeatureSchema schema;
    schema.missing_marker = std::move(missing_marker);
    for (std::size_t c = 0; c < header.size(); ++c) {
        SchemaColumn col;
        col.name = header[c];
        bool structural = !roles.is_feature(col.name);
        if (numeric_ok[c] && !forced.count(col.name) && !structural && !levels[c].empty()) {
            col.kind = FeatureKind::Numeric;
        } else {
            col.kind = FeatureKind::Categorical;
            col.levels.assign(levels[c].begin(), levels[c].end());
            if (saw_missing[c]) col.levels.push_back("missing");
            std::sort(col.levels.begin(), col.levels.end());
            col.levels.erase(std::unique(col.levels.begin(), col.levels.end()),
                             col.levels.end());
        }
        schema.columns.push_back(std::move(col));
    }
    return schema;
}

inline FeatureSchema infer_schema_file(const std::string& path, const IngestRoles& roles,
                                       const std::vector<std::string>& force_categorical = {},
                                       std::string missing_marker = "?") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    return infer_schema(in, roles, force_categorical, std::move(missing_marker));
}

// ---------------------------------------------------------------------------
// parsing

inline EncounterData parse_csv(std::istream& in, FeatureSchema schema, IngestRoles roles) {
    EncounterData data;
    data.roles = roles;
    std::vector<std::string> header;
    std::size_t enc_idx = 0, pat_idx = 0;
    std::set<std::string> seen_encounters;

    for_each_csv_record(in, [&](std::size_t line_no, const std::vector<std::string>& fields) {
        if (header.empty()) {
            header = fields;
            if (header.size() != schema.columns.size())
                throw SchemaError("header has " + std::to_string(header.size()) +
                                  " columns, schema declares " +
                                  std::to_string(schema.columns.size()));
            for (std::size_t c = 0; c < header.size(); ++c)
                if (header[c] != schema.columns[c].name)
                    throw SchemaError("unknown column in header: '" + header[c] +
                                      "' (schema expects '" + schema.columns[c].name + "')");
            enc_idx = schema.index_of(roles.encounter_column);
            pat_idx = schema.index_of(roles.patient_column);
            return;
        }
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        RawEncounter enc;
        enc.cells = fields;
        enc.missing.resize(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c)
            enc.missing[c] = fields[c] == schema.missing_marker || fields[c].empty() ? 1 : 0;
        enc.encounter_id = fields[enc_idx];
        enc.patient_id = fields[pat_idx];
        if (!enc.encounter_id.empty() && !seen_encounters.insert(enc.encounter_id).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate encounter id '" +
                             enc.encounter_id + "'");
        data.rows.push_back(std::move(enc));
    });
    if (header.empty()) throw ParseError("empty file: no header row");

    data.schema = std::move(schema);
    data.provenance.push_back("parsed " + std::to_string(data.rows.size()) + " encounters, " +
                              std::to_string(data.schema.columns.size()) + " attributes");
    return data;
}

inline EncounterData parse_csv_file(const std::string& path, FeatureSchema schema,
                                    IngestRoles roles) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    return parse_csv(in, std::move(schema), std::move(roles));
}

// ---------------------------------------------------------------------------
// cohort filtering

struct CohortFilter {
    // Disposition codes mapping to death or hospice; defaults follow the
    // public encounter data's disposition codebook.
    std::vector<std::string> excluded_dispositions = {"11", "13", "14", "19", "20", "21"};
};

struct FilterOutcome {
    std::size_t kept = 0;
    std::size_t dropped_repeat_encounters = 0;
    std::size_t dropped_dispositions = 0;
    std::size_t dropped_missing_patient = 0;
};

namespace detail {

// Encounter ids compare numerically when both sides parse, else as strings.
inline bool encounter_id_less(const std::string& a, const std::string& b) {
    auto na = try_parse_double(a), nb = try_parse_double(b);
    if (na && nb) return *na < *nb;
    return a < b;
}

}  // namespace detail

// Keeps the earliest encounter (by ascending encounter id) per patient and
// then removes encounters discharged to death or hospice. Rows with a
// missing patient id are dropped and counted. Output preserves input order.
inline FilterOutcome filter_cohort(EncounterData& data, const CohortFilter& filter = {}) {
    std::unordered_map<std::string, std::size_t> first;  // patient -> row index
    first.reserve(data.rows.size());
    std::size_t pat_idx = data.schema.index_of(data.roles.patient_column);
    bool has_disposition = data.schema.has_column(data.roles.disposition_column);
    std::size_t disp_idx = has_disposition
                               ? data.schema.index_of(data.roles.disposition_column)
                               : 0;
    std::set<std::string> excluded(filter.excluded_dispositions.begin(),
                                   filter.excluded_dispositions.end());

    FilterOutcome out;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const RawEncounter& e = data.rows[i];
        if (e.patient_id.empty() || e.missing[pat_idx]) {
            ++out.dropped_missing_patient;
            continue;
        }
        auto [it, inserted] = first.emplace(e.patient_id, i);
        if (!inserted && detail::encounter_id_less(e.encounter_id,
                                                   data.rows[it->second].encounter_id))
            it->second = i;
    }

    std::vector<RawEncounter> kept;
    kept.reserve(first.size());
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const RawEncounter& e = data.rows[i];
        if (e.patient_id.empty() || e.missing[pat_idx]) continue;
        auto it = first.find(e.patient_id);
        if (it->second != i) {
            ++out.dropped_repeat_encounters;
            continue;
        }
        if (has_disposition && excluded.count(e.cells[disp_idx])) {
            ++out.dropped_dispositions;
            continue;
        }
        kept.push_back(data.rows[i]);
    }
    out.kept = kept.size();
    data.rows = std::move(kept);
    data.provenance.push_back(
        "cohort filter: kept first encounter per patient (" +
        std::to_string(out.dropped_repeat_encounters) + " repeats dropped), removed " +
        std::to_string(out.dropped_dispositions) + " death/hospice dispositions, " +
        std::to_string(out.dropped_missing_patient) + " rows without patient id");
    return out;
}

// ---------------------------------------------------------------------------
// sparse columns

struct DroppedColumn {
    std::string name;
    double missing_fraction = 0.0;
    std::string reason;  // "missing fraction over threshold" | "explicit policy"
};

// Removes feature columns whose missing fraction exceeds the threshold, plus
// any listed in policy_drops regardless of their fraction. Structural columns
// are never dropped. An empty result is valid.
inline std::vector<DroppedColumn> drop_sparse_columns(EncounterData& data,
                                                      double max_missing_fraction,
                                                      const std::vector<std::string>&
                                                          policy_drops = {}) {
    const std::size_t n = data.rows.size();
    std::set<std::string> policy(policy_drops.begin(), policy_drops.end());
    std::vector<DroppedColumn> dropped;
    std::vector<std::size_t> keep_idx;

    for (std::size_t c = 0; c < data.schema.columns.size(); ++c) {
        const std::string& name = data.schema.columns[c].name;
        std::size_t miss = 0;
        for (const auto& r : data.rows) miss += r.missing[c];
        double frac = n == 0 ? 0.0 : static_cast<double>(miss) / static_cast<double>(n);
        bool structural = !data.roles.is_feature(name);
        if (!structural && policy.count(name)) {
            dropped.push_back({name, frac, "explicit policy"});
        } else if (!structural && frac > max_missing_fraction) {
            dropped.push_back({name, frac, "missing fraction over threshold"});
        } else {
            keep_idx.push_back(c);
        }
    }
    if (dropped.empty()) return dropped;

    std::vector<SchemaColumn> new_cols;
    new_cols.reserve(keep_idx.size());
    for (std::size_t c : keep_idx) new_cols.push_back(std::move(data.schema.columns[c]));
    data.schema.columns = std::move(new_cols);
    for (auto& r : data.rows) {
        std::vector<std::string> cells;
        std::vector<std::uint8_t> missing;
        cells.reserve(keep_idx.size());
        missing.reserve(keep_idx.size());
        for (std::size_t c : keep_idx) {
            cells.push_back(std::move(r.cells[c]));
            missing.push_back(r.missing[c]);
        }
        r.cells = std::move(cells);
        r.missing = std::move(missing);
    }
    std::string note = "dropped sparse columns:";
    for (const auto& d : dropped)
        note += " " + d.name + " (" + format_double(d.missing_fraction, 3) + " missing, " +
                d.reason + ")";
    data.provenance.push_back(note);
    return dropped;
}

// Categorical feature columns whose level count exceeds the cap would one-hot
// into an unusable number of indicators (raw diagnosis codes, for instance);
// they are removed with a provenance note.
inline std::vector<std::string> drop_high_cardinality_columns(EncounterData& data,
                                                              std::size_t max_levels) {
    std::vector<std::string> names;
    std::vector<std::size_t> keep_idx;
    for (std::size_t c = 0; c < data.schema.columns.size(); ++c) {
        const SchemaColumn& col = data.schema.columns[c];
        bool drop = data.roles.is_feature(col.name) && col.kind == FeatureKind::Categorical &&
                    col.levels.size() > max_levels;
        if (drop)
            names.push_back(col.name);
        else
            keep_idx.push_back(c);
    }
    if (names.empty()) return names;
    std::vector<SchemaColumn> new_cols;
    for (std::size_t c : keep_idx) new_cols.push_back(std::move(data.schema.columns[c]));
    data.schema.columns = std::move(new_cols);
    for (auto& r : data.rows) {
        std::vector<std::string> cells;
        std::vector<std::uint8_t> missing;
        for (std::size_t c : keep_idx) {
            cells.push_back(std::move(r.cells[c]));
            missing.push_back(r.missing[c]);
        }
        r.cells = std::move(cells);
        r.missing = std::move(missing);
    }
    data.provenance.push_back("dropped high-cardinality columns (over " +
                              std::to_string(max_levels) + " levels): " + join(names, ", "));
    return names;
}

// ---------------------------------------------------------------------------
// labels

enum class LabelPolicy { Under30, AnyReadmission };

inline std::string label_policy_name(LabelPolicy p) {
    return p == LabelPolicy::Under30 ? "under30" : "any";
}

inline LabelPolicy label_policy_from_name(std::string_view s) {
    std::string n = to_lower(trim(s));
    if (n == "under30" || n == "<30") return LabelPolicy::Under30;
    if (n == "any" || n == "any_readmission") return LabelPolicy::AnyReadmission;
    throw ConfigError("unknown label policy: " + std::string(s));
}

// Status tokens in the encounter data: "<30", ">30", "NO".
inline int derive_label(const std::string& status, LabelPolicy policy) {
    if (status == "<30") return 1;
    if (status == ">30") return policy == LabelPolicy::AnyReadmission ? 1 : 0;
    if (status == "NO") return 0;
    throw ParseError("unrecognized readmission status: '" + status + "'");
}

inline std::vector<int> derive_labels(const EncounterData& data, LabelPolicy policy) {
    std::size_t idx = data.schema.index_of(data.roles.label_column);
    std::vector<int> labels;
    labels.reserve(data.rows.size());
    for (const auto& r : data.rows) labels.push_back(derive_label(r.cells[idx], policy));
    return labels;
}

// ---------------------------------------------------------------------------
// encoding

struct ColumnDesc {
    std::string name;    // encoded column name
    std::string source;  // originating attribute
    std::string level;   // empty for numeric passthrough
    FeatureKind kind = FeatureKind::Numeric;
};

struct CohortTable {
    Matrix x;
    std::vector<int> labels;
    std::vector<ColumnDesc> columns;
    std::vector<std::string> provenance;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].name == name) return i;
        throw SchemaError("encoded column not found: " + name);
    }

    std::vector<std::uint8_t> numeric_mask() const {
        std::vector<std::uint8_t> m(columns.size());
        for (std::size_t i = 0; i < columns.size(); ++i)
            m[i] = columns[i].kind == FeatureKind::Numeric ? 1 : 0;
        return m;
    }

    void save(const std::string& csv_path, const std::string& meta_path) const;
    static CohortTable load(const std::string& csv_path, const std::string& meta_path);
};

// One-hot encodes categorical features (missing cells map to the "missing"
// level) and passes numeric features through with NaN for missing cells.
// Column order follows the schema, then level order, so the layout is
// deterministic for a given schema.
inline CohortTable encode_features(const EncounterData& data, LabelPolicy policy) {
    CohortTable t;
    t.provenance = data.provenance;
    std::size_t label_idx = data.schema.index_of(data.roles.label_column);

    struct Plan {
        std::size_t cell;
        const SchemaColumn* col;
    };
    std::vector<Plan> plans;
    for (std::size_t c = 0; c < data.schema.columns.size(); ++c) {
        const SchemaColumn& col = data.schema.columns[c];
        if (!data.roles.is_feature(col.name)) continue;
        plans.push_back({c, &col});
        if (col.kind == FeatureKind::Numeric) {
            t.columns.push_back({col.name, col.name, "", FeatureKind::Numeric});
        } else {
            for (const auto& lvl : col.levels)
                t.columns.push_back({col.name + "=" + lvl, col.name, lvl,
                                     FeatureKind::Categorical});
        }
    }

    t.x = Matrix(data.rows.size(), t.columns.size());
    t.labels.reserve(data.rows.size());
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        const RawEncounter& enc = data.rows[r];
        std::size_t w = 0;
        for (const Plan& plan : plans) {
            const SchemaColumn& col = *plan.col;
            const std::string& cell = enc.cells[plan.cell];
            bool missing = enc.missing[plan.cell];
            if (col.kind == FeatureKind::Numeric) {
                t.x(r, w++) = missing ? std::numeric_limits<double>::quiet_NaN()
                                      : parse_double(cell, col.name);
            } else {
                const std::string& value = missing ? std::string("missing") : cell;
                auto it = std::lower_bound(col.levels.begin(), col.levels.end(), value);
                if (it == col.levels.end() || *it != value)
                    throw SchemaError("column '" + col.name + "': level '" + value +
                                      "' not in schema");
                std::size_t offset = static_cast<std::size_t>(it - col.levels.begin());
                for (std::size_t l = 0; l < col.levels.size(); ++l)
                    t.x(r, w + l) = l == offset ? 1.0 : 0.0;
                w += col.levels.size();
            }
        }
        t.labels.push_back(derive_label(enc.cells[label_idx], policy));
    }
    t.provenance.push_back(
        "encoded " + std::to_string(t.columns.size()) + " feature columns; label policy = " +
        label_policy_name(policy) +
        " (source column encodes <30 / >30 / NO only; no explicit day-count window)");
    return t;
}

// ---------------------------------------------------------------------------
// cohort snapshot persistence (columnar CSV + key-value sidecar)

inline void CohortTable::save(const std::string& csv_path, const std::string& meta_path) const {
    std::ostringstream csv;
    std::vector<std::string> header;
    for (const auto& c : columns) header.push_back(c.name);
    header.push_back("label");
    write_csv_row(csv, header);
    std::vector<std::string> fields(header.size());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double v = x(r, c);
            fields[c] = std::isnan(v) ? "" : format_double(v);
        }
        fields[x.cols()] = std::to_string(labels[r]);
        write_csv_row(csv, fields);
    }
    write_file(csv_path, csv.str());

    KvFile kv;
    kv.set("format", "readmit-cohort/1");
    kv.set_int("rows", static_cast<long long>(x.rows()));
    kv.set_int("columns", static_cast<long long>(x.cols()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        std::string k = "column." + std::to_string(c);
        kv.set(k + ".name", columns[c].name);
        kv.set(k + ".source", columns[c].source);
        kv.set(k + ".level", columns[c].level);
        kv.set(k + ".kind", columns[c].kind == FeatureKind::Numeric ? "numeric" : "indicator");
    }
    for (std::size_t i = 0; i < provenance.size(); ++i)
        kv.set("provenance." + std::to_string(i), provenance[i]);
    kv.save(meta_path);
}

inline CohortTable CohortTable::load(const std::string& csv_path, const std::string& meta_path) {
    KvFile kv = KvFile::load(meta_path);
    if (kv.get("format") != "readmit-cohort/1")
        throw ParseError(meta_path + ": unsupported cohort format");
    CohortTable t;
    std::size_t rows = static_cast<std::size_t>(kv.get_int("rows"));
    std::size_t cols = static_cast<std::size_t>(kv.get_int("columns"));
    for (std::size_t c = 0; c < cols; ++c) {
        std::string k = "column." + std::to_string(c);
        ColumnDesc d;
        d.name = kv.get(k + ".name");
        d.source = kv.get(k + ".source");
        d.level = kv.get_or(k + ".level", "");
        d.kind = kv.get(k + ".kind") == "numeric" ? FeatureKind::Numeric
                                                  : FeatureKind::Categorical;
        t.columns.push_back(std::move(d));
    }
    for (std::size_t i = 0;; ++i) {
        const std::string* p = kv.find("provenance." + std::to_string(i));
        if (!p) break;
        t.provenance.push_back(*p);
    }

    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + csv_path);
    t.x = Matrix(rows, cols);
    t.labels.reserve(rows);
    std::size_t row = 0;
    bool header_seen = false;
    for_each_csv_record(in, [&](std::size_t line_no, const std::vector<std::string>& fields) {
        if (!header_seen) {
            header_seen = true;
            return;
        }
        if (fields.size() != cols + 1)
            throw ParseError(csv_path + ":" + std::to_string(line_no) + ": bad field count");
        if (row >= rows) throw ParseError(csv_path + ": more rows than sidecar declares");
        for (std::size_t c = 0; c < cols; ++c)
            t.x(row, c) = fields[c].empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : parse_double(fields[c]);
        t.labels.push_back(static_cast<int>(parse_int(fields[cols], "label")));
        ++row;
    });
    if (row != rows) throw ParseError(csv_path + ": fewer rows than sidecar declares");
    return t;
}

}  // namespace readmit
