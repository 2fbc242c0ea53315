#include "doctest.h"

#include <clocale>
#include <filesystem>

#include "sheat/errors.hpp"
#include "sheat/io.hpp"

using namespace sheat;

TEST_CASE("numbers round-trip with a dot separator") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(-2.5) == "-2.5");
    CHECK(format_number(1e300) == "1.0000000000000001e+300");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("csv table") {
    CsvTable t({"a", "b"});
    t.add_numbers({1.0, 0.5});
    t.add_row({"x", "y"});
    CHECK(t.str() == "a,b\n1,0.5\nx,y\n");
    CHECK_THROWS_AS(t.add_row({"only"}), DomainError);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic write and manifest round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "sheat_test_io";
    std::filesystem::remove_all(dir);
    RunManifest m;
    m.subcommand = "moments";
    m.code_version = code_version();
    m.config_ini = "[model]\nnu = 0.5\n";
    m.calibration["kappa1"] = 0.25;
    write_output(dir, "sub/a.csv", "a\n1\n", m);
    write_output(dir, "sub/a.csv", "a\n2\n", m);
    REQUIRE(m.outputs.size() == 1);
    CHECK(m.outputs[0].sha256 == sha256_file(dir / "sub/a.csv"));
    CHECK(read_file(dir / "sub/a.csv") == "a\n2\n");
    m.failed_cells.push_back({{"lambda", 4.0}});
    const auto back = RunManifest::from_json(nlohmann::json::parse(dump_json(m.to_json())));
    CHECK(back.to_json() == m.to_json());
    CHECK_THROWS_AS(RunManifest::from_json(nlohmann::json::object()), ConfigError);
    std::filesystem::remove_all(dir);
}
