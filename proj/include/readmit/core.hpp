#pragma once

// Shared plumbing for the readmit toolkit: error types, a deterministic RNG
// whose entire output stream is reproducible from a 64-bit seed, a dense
// row-major matrix, robust statistics, checksums, and the line-oriented
// key = value text format used by sidecar files and manifests.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace readmit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input data (CSV rows, sidecar files, model containers).
class ParseError : public Error {
public:
    using Error::Error;
};

// Column/level mismatches between data and a declared schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Invalid configuration: bad keys, bad ranges, unusable paths.
class ConfigError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// strings

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == delim) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Strict full-string double parse; throws ParseError on trailing junk.
inline double parse_double(std::string_view s, std::string_view what = "number") {
    std::string buf(trim(s));
    if (buf.empty()) throw ParseError("empty " + std::string(what));
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size())
        throw ParseError("not a valid " + std::string(what) + ": '" + buf + "'");
    return v;
}

inline std::optional<double> try_parse_double(std::string_view s) {
    std::string buf(trim(s));
    if (buf.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size()) return std::nullopt;
    return v;
}

inline long long parse_int(std::string_view s, std::string_view what = "integer") {
    std::string buf(trim(s));
    if (buf.empty()) throw ParseError("empty " + std::string(what));
    char* end = nullptr;
    long long v = std::strtoll(buf.c_str(), &end, 10);
    if (end != buf.c_str() + buf.size())
        throw ParseError("not a valid " + std::string(what) + ": '" + buf + "'");
    return v;
}

// Exact text round-trip for doubles (model files, parameter sidecars).
inline std::string to_hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

// Shortest-ish decimal that still round-trips; used in data CSVs.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

// ---------------------------------------------------------------------------
// deterministic randomness
//
// mt19937_64 output is pinned by the standard; the conversions below avoid
// std::*_distribution, whose algorithms are implementation-defined. Every
// consumer derives a private stream so adding a draw in one place cannot
// shift the values seen by another.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ (0x9E3779B97F4A7C15ull * (stream + 1)));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    std::uint64_t next() { return eng_(); }

    // [0, 1)
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // [0, n)
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - u01();  // (0, 1]
        double u2 = u01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k entries of a shuffled 0..n-1; deterministic partial Fisher-Yates.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        k = std::min(k, n);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + uniform_index(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

    // Independent child stream; stable under unrelated code changes.
    Rng derive(std::uint64_t stream) const {
        return Rng(splitmix64(seed_ ^ (0x9E3779B97F4A7C15ull * (stream + 1))));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// matrix

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        Matrix m;
        if (rows.empty()) return m;
        m.cols_ = rows.front().size();
        m.rows_ = rows.size();
        m.v_.reserve(m.rows_ * m.cols_);
        for (const auto& r : rows) {
            if (r.size() != m.cols_) throw Error("ragged row in matrix construction");
            m.v_.insert(m.v_.end(), r.begin(), r.end());
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {v_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) { return {v_.data() + r * cols_, cols_}; }

    void reserve_rows(std::size_t n) { v_.reserve(n * cols_); }

    void set_cols(std::size_t c) {
        if (rows_ != 0) throw Error("set_cols on non-empty matrix");
        cols_ = c;
    }

    void push_row(std::span<const double> r) {
        if (rows_ == 0 && cols_ == 0) cols_ = r.size();
        if (r.size() != cols_) throw Error("row width mismatch in push_row");
        v_.insert(v_.end(), r.begin(), r.end());
        ++rows_;
    }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix m(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto src = row(idx[i]);
            std::copy(src.begin(), src.end(), m.row(i).begin());
        }
        return m;
    }

    Matrix select_cols(std::span<const std::size_t> idx) const {
        Matrix m(rows_, idx.size());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j) m(r, j) = (*this)(r, idx[j]);
        return m;
    }

    bool operator==(const Matrix& o) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> v_;
};

template <typename T>
std::vector<T> select(std::span<const T> v, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

template <typename T>
std::vector<T> select(const std::vector<T>& v, std::span<const std::size_t> idx) {
    return select(std::span<const T>(v), idx);
}

// ---------------------------------------------------------------------------
// statistics

namespace stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw Error("mean of empty range");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double median_inplace(std::vector<double>& v) {
    if (v.empty()) throw Error("median of empty range");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double median(std::span<const double> v) {
    std::vector<double> c(v.begin(), v.end());
    return median_inplace(c);
}

// Median absolute deviation, unscaled.
inline double mad(std::span<const double> v, double center) {
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = std::fabs(v[i] - center);
    return median_inplace(d);
}

// Linear-interpolation quantile (R type 7).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw Error("quantile of empty range");
    std::sort(v.begin(), v.end());
    double h = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double log_choose(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

// P[X >= k] for X ~ Binomial(n, 1/2).
inline double binom_tail_geq(std::size_t k, std::size_t n) {
    double p = 0.0;
    const double ln_half_n = -static_cast<double>(n) * std::log(2.0);
    for (std::size_t i = k; i <= n; ++i) p += std::exp(log_choose(n, i) + ln_half_n);
    return std::min(1.0, p);
}

inline double binom_tail_leq(std::size_t k, std::size_t n) {
    double p = 0.0;
    const double ln_half_n = -static_cast<double>(n) * std::log(2.0);
    for (std::size_t i = 0; i <= k; ++i) p += std::exp(log_choose(n, i) + ln_half_n);
    return std::min(1.0, p);
}

inline double binom_two_sided_p(std::size_t k, std::size_t n) {
    return std::min(1.0, 2.0 * std::min(binom_tail_geq(k, n), binom_tail_leq(k, n)));
}

}  // namespace stats

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// checksums

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write: " + path);
}

inline std::string file_checksum(const std::string& path) {
    return to_hex(fnv1a64(read_file(path)));
}

// ---------------------------------------------------------------------------
// key = value text files
//
// One "key = value" pair per line; '#' starts a comment; insertion order is
// preserved so emitted files are byte-stable. Optional "[section]" headers
// prefix subsequent keys with "section." (used by the pipeline config).

class KvFile {
public:
    void set(std::string key, std::string value) {
        auto it = index_.find(key);
        if (it != index_.end()) {
            items_[it->second].second = std::move(value);
            return;
        }
        index_.emplace(key, items_.size());
        items_.emplace_back(std::move(key), std::move(value));
    }

    void set_double(const std::string& key, double v) { set(key, to_hexfloat(v)); }
    void set_int(const std::string& key, long long v) { set(key, std::to_string(v)); }

    bool has(const std::string& key) const { return index_.count(key) != 0; }

    const std::string* find(const std::string& key) const {
        auto it = index_.find(key);
        return it == index_.end() ? nullptr : &items_[it->second].second;
    }

    std::string get(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) throw ConfigError("missing key: " + key);
        return *v;
    }

    std::string get_or(const std::string& key, std::string def) const {
        const std::string* v = find(key);
        return v ? *v : std::move(def);
    }

    double get_double(const std::string& key) const { return parse_double(get(key), key); }
    double get_double_or(const std::string& key, double def) const {
        const std::string* v = find(key);
        return v ? parse_double(*v, key) : def;
    }
    long long get_int(const std::string& key) const { return parse_int(get(key), key); }
    long long get_int_or(const std::string& key, long long def) const {
        const std::string* v = find(key);
        return v ? parse_int(*v, key) : def;
    }
    bool get_bool_or(const std::string& key, bool def) const {
        const std::string* v = find(key);
        if (!v) return def;
        std::string s = to_lower(trim(*v));
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw ConfigError("not a boolean: " + key + " = " + *v);
    }

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

    static KvFile parse(std::string_view text, bool sections = false,
                        const std::string& origin = "<string>") {
        KvFile kv;
        std::string section;
        std::size_t line_no = 0;
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string line = trim(text.substr(start, end - start));
            start = end + 1;
            ++line_no;
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            if (line.front() == '[') {
                if (!sections || line.back() != ']')
                    throw ParseError(origin + ":" + std::to_string(line_no) +
                                     ": unexpected section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": expected 'key = value'");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
            if (!section.empty()) key = section + "." + key;
            kv.set(std::move(key), std::move(value));
        }
        return kv;
    }

    static KvFile load(const std::string& path, bool sections = false) {
        return parse(read_file(path), sections, path);
    }

    std::string to_string() const {
        std::string out;
        for (const auto& [k, v] : items_) {
            out += k;
            out += " = ";
            out += v;
            out += "\n";
        }
        return out;
    }

    void save(const std::string& path) const { write_file(path, to_string()); }

private:
    std::vector<std::pair<std::string, std::string>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace readmit
