#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sheat {

/// Shortest round-trip decimal ("%.17g", '.' separator regardless of locale).
std::string format_number(double v);

/// In-memory long-format table. Cells are preformatted strings.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    /// Row length must equal the header length (DomainError).
    void add_row(std::vector<std::string> cells);
    void add_numbers(const std::vector<double>& values);

    const std::vector<std::string>& header() const { return header_; }
    std::size_t rows() const { return rows_.size(); }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Version string compiled into the library.
std::string code_version();

struct OutputRecord {
    std::string path; // relative to the output directory
    std::string sha256;
};

struct RunManifest {
    std::string subcommand;
    std::string code_version;
    std::string config_ini;           // to_ini snapshot, seed resolved
    nlohmann::json calibration = nlohmann::json::object();
    nlohmann::json parameters = nlohmann::json::object(); // windows, cfl, grids
    double wall_clock_seconds = 0;
    std::vector<OutputRecord> outputs;
    std::vector<nlohmann::json> failed_cells;
    int exit_code = 0;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// Records `content` at out_dir / rel and appends its checksum to the manifest.
void write_output(const std::filesystem::path& out_dir, const std::string& rel, std::string_view content,
                  RunManifest& manifest);

/// Pretty JSON with a trailing newline.
std::string dump_json(const nlohmann::json& j);

} // namespace sheat
