#pragma once

// Output artifacts: fixed-precision CSV and JSON, and a checksummed manifest.

#include <boost/crc.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dephasing/error.hpp"

namespace dephasing::io {

using json = nlohmann::ordered_json;

/// 12 significant digits; "nan", "inf", "-inf" for non-finite values.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// v rounded to 12 significant digits, so JSON output is stable across platforms.
inline double round12(double v) {
    if (!std::isfinite(v)) return v;
    return std::stod(format_number(v));
}

/// JSON value for a double; non-finite values become strings.
inline json number(double v) {
    if (!std::isfinite(v)) return format_number(v);
    return round12(v);
}

inline json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row) {
        if (row.size() != header.size()) throw ValidationError("table: row width differs from header");
        rows.push_back(std::move(row));
    }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
        out += '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_number(r[i]);
            out += '\n';
        }
        return out;
    }
};

inline std::uint32_t crc32(const std::string& bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

/// Collects files written into one directory and records them for the manifest.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ValidationError("output: cannot create " + dir_.string() + ": " + ec.message());
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

    void write_text(const std::string& name, const std::string& text) {
        const auto path = dir_ / name;
        std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ValidationError("output: cannot write " + path.string());
        f << text;
        if (!f) throw ValidationError("output: write failed for " + path.string());
        for (auto& e : files_)
            if (e.name == name) {
                e = {name, text.size(), crc32(text)};
                return;
            }
        files_.push_back({name, text.size(), crc32(text)});
    }

    void write_csv(const std::string& name, const Table& t) { write_text(name, t.str()); }
    void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }

    /// manifest.json: every file with size and CRC-32, plus a creation timestamp.
    void finish(const json& meta = json::object()) {
        json m;
        m["created"] = timestamp();
        m["meta"] = meta;
        json list = json::array();
        for (const auto& e : files_) {
            char hex[16];
            std::snprintf(hex, sizeof hex, "%08x", e.crc);
            list.push_back({{"file", e.name}, {"bytes", e.bytes}, {"crc32", hex}});
        }
        m["files"] = list;
        const auto path = dir_ / "manifest.json";
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ValidationError("output: cannot write " + path.string());
        f << m.dump(2) << "\n";
    }

    std::size_t file_count() const noexcept { return files_.size(); }

private:
    struct Entry {
        std::string name;
        std::size_t bytes;
        std::uint32_t crc;
    };

    static std::string timestamp() {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    std::filesystem::path dir_;
    std::vector<Entry> files_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ValidationError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace dephasing::io
