#pragma once

// RFC-4180-style CSV reading and writing. Quoted fields may contain commas,
// doubled quotes and embedded newlines; CRLF line endings are accepted.

#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "readmit/core.hpp"

namespace readmit {

// Invokes fn(line_no, fields) for every record, header included. line_no is
// the physical line the record starts on (1-based).
inline void for_each_csv_record(
    std::istream& in,
    const std::function<void(std::size_t, const std::vector<std::string>&)>& fn) {
    std::vector<std::string> fields;
    std::string field;
    std::size_t line_no = 1, record_line = 1;
    bool in_quotes = false;
    bool any_data = false;

    auto end_field = [&] {
        fields.push_back(field);
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        fn(record_line, fields);
        fields.clear();
        any_data = false;
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                any_data = true;
                break;
            case ',':
                end_field();
                any_data = true;
                break;
            case '\r':
                break;
            case '\n':
                // blank lines are skipped rather than parsed as empty records
                if (any_data || !fields.empty() || !field.empty()) end_record();
                ++line_no;
                record_line = line_no;
                break;
            default:
                field += c;
                any_data = true;
                break;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field at line " +
                                    std::to_string(record_line));
    if (any_data || !field.empty() || !fields.empty()) end_record();
}

inline void write_csv_field(std::ostream& out, std::string_view v) {
    bool needs_quote = v.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quote) {
        out << v;
        return;
    }
    out << '"';
    for (char c : v) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

inline void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        write_csv_field(out, fields[i]);
    }
    out << '\n';
}

}  // namespace readmit
