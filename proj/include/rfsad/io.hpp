#pragma once

// Observation files (JSONL) and versioned CSV tables.
//
// JSONL layout: the first line is a header object
//   {"format":"rfsad-observations","version":"1.0","dim":2}
// and every following line is one pattern
//   {"batch":0,"t":1,"points":[[x,y],...]}
// Within a batch t must increase strictly. Batches appear contiguously.
//
// CSV tables start with a comment line "# <format> v<major>.<minor>".

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfsad/error.hpp"
#include "rfsad/rfs_model.hpp"

namespace rfsad {

inline constexpr std::string_view kObservationFormat = "rfsad-observations";
inline constexpr std::string_view kObservationVersion = "1.0";
inline constexpr int kSupportedMajor = 1;

struct Observation {
    std::uint64_t batch = 0;
    PointPattern pattern;
};

namespace detail {

[[noreturn]] inline void line_fail(std::size_t line, const std::string& what) {
    throw DataError("line " + std::to_string(line) + ": " + what);
}

// "1.0" -> 1; anything malformed -> -1.
inline int major_version(std::string_view v) {
    const auto dot = v.find('.');
    const std::string_view head = v.substr(0, dot);
    if (head.empty() || head.size() > 6) return -1;
    int major = 0;
    for (char ch : head) {
        if (ch < '0' || ch > '9') return -1;
        major = major * 10 + (ch - '0');
    }
    return major;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline void write_observation_header(std::ostream& os, std::size_t dim) {
    nlohmann::json h = {{"format", kObservationFormat}, {"version", kObservationVersion}, {"dim", dim}};
    os << h.dump() << '\n';
}

inline void write_observation(std::ostream& os, std::uint64_t batch, const PointPattern& x) {
    // Hand-formatted so every double round-trips (%.17g).
    os << "{\"batch\":" << batch << ",\"t\":" << x.t << ",\"points\":[";
    for (std::size_t j = 0; j < x.points.size(); ++j) {
        if (j) os << ',';
        os << '[';
        for (std::size_t i = 0; i < x.points[j].size(); ++i) {
            if (i) os << ',';
            os << detail::format_double(x.points[j][i]);
        }
        os << ']';
    }
    os << "]}\n";
}

// Streaming reader. Errors carry the 1-based line number.
class ObservationReader {
public:
    explicit ObservationReader(std::istream& is) : is_(is) { read_header(); }

    std::size_t dim() const noexcept { return dim_; }

    // Returns false at end of input.
    bool next(Observation& out) {
        std::string text;
        while (std::getline(is_, text)) {
            ++line_;
            if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
            out = parse(text);
            return true;
        }
        return false;
    }

private:
    void read_header() {
        std::string text;
        while (std::getline(is_, text)) {
            ++line_;
            if (text.find_first_not_of(" \t\r") != std::string::npos) break;
        }
        if (!is_ && text.empty()) detail::line_fail(line_ == 0 ? 1 : line_, "missing header line");
        nlohmann::json h;
        try {
            h = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            detail::line_fail(line_, std::string("header is not valid JSON: ") + e.what());
        }
        if (!h.is_object() || !h.contains("format") || h["format"] != kObservationFormat)
            detail::line_fail(line_, "header must declare format \"" + std::string(kObservationFormat) + "\"");
        if (!h.contains("version") || !h["version"].is_string())
            detail::line_fail(line_, "header is missing a version string");
        const auto ver = h["version"].get<std::string>();
        if (detail::major_version(ver) != kSupportedMajor)
            detail::line_fail(line_, "unsupported observation format version " + ver);
        if (!h.contains("dim") || !h["dim"].is_number_unsigned() || h["dim"].get<std::size_t>() == 0)
            detail::line_fail(line_, "header needs a positive integer dim");
        dim_ = h["dim"].get<std::size_t>();
        if (dim_ > kSoftDimLimit) detail::line_fail(line_, "dim exceeds " + std::to_string(kSoftDimLimit));
    }

    Observation parse(const std::string& text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            detail::line_fail(line_, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) detail::line_fail(line_, "record must be a JSON object");
        Observation ob;
        if (j.contains("batch")) {
            if (!j["batch"].is_number_unsigned()) detail::line_fail(line_, "batch must be a non-negative integer");
            ob.batch = j["batch"].get<std::uint64_t>();
        }
        if (!j.contains("t") || !j["t"].is_number_integer()) detail::line_fail(line_, "t must be an integer");
        ob.pattern.t = j["t"].get<std::int64_t>();
        if (ob.pattern.t < 1) detail::line_fail(line_, "t must be >= 1");
        if (!j.contains("points") || !j["points"].is_array()) detail::line_fail(line_, "points must be an array");
        ob.pattern.dim = dim_;
        for (const auto& p : j["points"]) {
            if (!p.is_array() || p.size() != dim_)
                detail::line_fail(line_, "every point must be an array of " + std::to_string(dim_) + " numbers");
            Vec v(dim_);
            for (std::size_t i = 0; i < dim_; ++i) {
                if (!p[i].is_number()) detail::line_fail(line_, "point coordinates must be numbers");
                v[i] = p[i].get<double>();
                if (!std::isfinite(v[i])) detail::line_fail(line_, "point coordinates must be finite");
            }
            ob.pattern.points.push_back(std::move(v));
        }
        if (have_prev_ && ob.batch == prev_batch_) {
            if (ob.pattern.t <= prev_t_) detail::line_fail(line_, "t must increase strictly within a batch");
        } else if (have_prev_ && ob.batch < prev_batch_) {
            detail::line_fail(line_, "batches must appear in increasing order");
        }
        have_prev_ = true;
        prev_batch_ = ob.batch;
        prev_t_ = ob.pattern.t;
        return ob;
    }

    std::istream& is_;
    std::size_t line_ = 0;
    std::size_t dim_ = 0;
    bool have_prev_ = false;
    std::uint64_t prev_batch_ = 0;
    std::int64_t prev_t_ = 0;
};

inline std::vector<Observation> read_observations(std::istream& is) {
    ObservationReader reader(is);
    std::vector<Observation> out;
    Observation ob;
    while (reader.next(ob)) out.push_back(std::move(ob));
    return out;
}

// --- CSV -----------------------------------------------------------------

inline void write_csv_header(std::ostream& os, std::string_view format, std::string_view version) {
    os << "# " << format << " v" << version << '\n';
}

struct CsvTable {
    std::string format;
    std::string version;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> trailing_comments;  // e.g. summary lines

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw DataError("csv: no column named " + std::string(name));
    }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(std::move(cell));
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    out.push_back(std::move(cell));
    return out;
}

}  // namespace detail

// Reads a table written by this library. Fields never contain commas.
inline CsvTable read_csv(std::istream& is, std::string_view expected_format) {
    CsvTable t;
    std::string line;
    std::size_t n = 0;
    if (!std::getline(is, line)) detail::line_fail(1, "empty CSV");
    ++n;
    const std::string prefix = "# " + std::string(expected_format) + " v";
    if (line.rfind(prefix, 0) != 0) detail::line_fail(n, "expected header \"" + prefix + "<version>\"");
    t.format = expected_format;
    t.version = line.substr(prefix.size());
    while (!t.version.empty() && (t.version.back() == '\r' || t.version.back() == ' ')) t.version.pop_back();
    if (detail::major_version(t.version) != kSupportedMajor)
        detail::line_fail(n, "unsupported " + std::string(expected_format) + " version " + t.version);
    if (!std::getline(is, line)) detail::line_fail(n + 1, "missing column header");
    ++n;
    t.columns = detail::split_csv(line);
    while (std::getline(is, line)) {
        ++n;
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.trailing_comments.push_back(line);
            continue;
        }
        auto cells = detail::split_csv(line);
        if (cells.size() != t.columns.size())
            detail::line_fail(n, "expected " + std::to_string(t.columns.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

}  // namespace rfsad
