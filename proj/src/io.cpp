#include "sheat/io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "sheat/errors.hpp"

#ifndef SHEAT_VERSION
#define SHEAT_VERSION "0.0.0"
#endif

namespace sheat {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    // %.17g only emits '.', but snprintf honours LC_NUMERIC; fix the separator.
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    std::string s(buf.data());
    for (char& c : s) {
        if (c == ',') c = '.';
    }
    return s;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    if (header_.empty()) throw DomainError("CSV header must not be empty");
}

void CsvTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw DomainError("CSV row length does not match the header");
    rows_.push_back(std::move(cells));
}

void CsvTable::add_numbers(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    add_row(std::move(cells));
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw NumericalError("SHA-256 digest failed", 0);
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string code_version() { return SHEAT_VERSION; }

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["code_version"] = code_version;
    j["config"] = config_ini;
    j["calibration"] = calibration;
    j["parameters"] = parameters;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["outputs"] = nlohmann::json::array();
    for (const auto& o : outputs) j["outputs"].push_back({{"path", o.path}, {"sha256", o.sha256}});
    j["failed_cells"] = failed_cells;
    j["exit_code"] = exit_code;
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    try {
        RunManifest m;
        m.subcommand = j.at("subcommand").get<std::string>();
        m.code_version = j.at("code_version").get<std::string>();
        m.config_ini = j.at("config").get<std::string>();
        m.calibration = j.value("calibration", nlohmann::json::object());
        m.parameters = j.value("parameters", nlohmann::json::object());
        m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
        for (const auto& o : j.value("outputs", nlohmann::json::array())) {
            m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
        }
        for (const auto& c : j.value("failed_cells", nlohmann::json::array())) m.failed_cells.push_back(c);
        m.exit_code = j.value("exit_code", 0);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
}

void write_output(const std::filesystem::path& out_dir, const std::string& rel, std::string_view content,
                  RunManifest& manifest) {
    write_file_atomic(out_dir / rel, content);
    const auto digest = sha256_hex(content);
    for (auto& o : manifest.outputs) {
        if (o.path == rel) {
            o.sha256 = digest;
            return;
        }
    }
    manifest.outputs.push_back({rel, digest});
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

} // namespace sheat
