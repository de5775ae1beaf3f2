#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "lpdm/config.h"
#include "lpdm/errors.h"

using namespace lpdm;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& body) {
    static int counter = 0;
    const auto path =
        fs::temp_directory_path() / ("lpdm_cfg_" + std::to_string(counter++) + ".ini");
    std::ofstream(path) << body;
    return path.string();
}

}  // namespace

TEST_CASE("key value pairs parse with trimming and comments") {
    const auto path = write_temp(
        "# full-line comment\n"
        "\n"
        "lr = 0.001\n"
        "  seed=42  \n"
        "name = spaced value here\n"
        "steps = 10 # trailing comment\n");
    const auto kv = parse_config_file(path);
    CHECK(kv.size() == 4);
    CHECK(kv.at("lr") == "0.001");
    CHECK(kv.at("seed") == "42");
    CHECK(kv.at("name") == "spaced value here");
    CHECK(kv.at("steps") == "10");
}

TEST_CASE("duplicate keys keep the last value") {
    const auto kv = parse_config_file(write_temp("a = 1\na = 2\n"));
    CHECK(kv.at("a") == "2");
}

TEST_CASE("empty values are allowed") {
    const auto kv = parse_config_file(write_temp("a =\n"));
    CHECK(kv.at("a").empty());
}

TEST_CASE("value may contain an equals sign") {
    const auto kv = parse_config_file(write_temp("expr = a=b\n"));
    CHECK(kv.at("expr") == "a=b");
}

TEST_CASE("missing separator reports the line number") {
    const auto path = write_temp("good = 1\nbad line\n");
    try {
        parse_config_file(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("empty key is rejected") {
    CHECK_THROWS_AS(parse_config_file(write_temp("= 3\n")), ConfigError);
}

TEST_CASE("missing file is a data error") {
    CHECK_THROWS_AS(parse_config_file("/nonexistent/lpdm.ini"), DataError);
}

TEST_CASE("comment-only file parses empty") {
    CHECK(parse_config_file(write_temp("# nothing\n\n")).empty());
}
