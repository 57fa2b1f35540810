#pragma once

// Shared helpers for the test suite: parsing with hard failure on
// diagnostics, source-tree paths, and subprocess runs of the CLI binary.

#include <statl/statl.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef STATL_SOURCE_DIR
#define STATL_SOURCE_DIR "."
#endif
#ifndef STATL_CLI_PATH
#define STATL_CLI_PATH "./statl"
#endif

namespace testutil {

inline statl::TermPtr parse_ok(const std::string& src) {
    statl::ParseResult r = statl::parse_term_text(src);
    if (std::holds_alternative<statl::ParseDiagnostic>(r)) {
        const auto& d = std::get<statl::ParseDiagnostic>(r);
        throw std::runtime_error("parse failed at " + std::to_string(d.line) + ":" +
                                 std::to_string(d.column) + ": " + d.message + "\nsource:\n" + src);
    }
    return std::get<statl::TermPtr>(r);
}

inline std::string source_path(const std::string& rel) {
    return std::string(STATL_SOURCE_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline statl::TermPtr parse_file(const std::string& path) { return parse_ok(read_file(path)); }

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
    static int counter = 0;
    std::string out_file = "statl_test_out_" + std::to_string(counter) + ".tmp";
    std::string err_file = "statl_test_err_" + std::to_string(counter) + ".tmp";
    ++counter;
    std::string cmd = std::string(STATL_CLI_PATH);
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " >" + out_file + " 2>" + err_file;
    int rc = std::system(cmd.c_str());
    CliResult res;
    res.exit_code = WEXITSTATUS(rc);
    res.out = read_file(out_file);
    res.err = read_file(err_file);
    std::remove(out_file.c_str());
    std::remove(err_file.c_str());
    return res;
}

// Strips the run-dependent timing field so reports can be compared for
// byte identity.
inline std::string strip_wall_time(const std::string& report) {
    std::string out;
    std::stringstream ss(report);
    std::string line;
    while (std::getline(ss, line))
        if (line.find("wall_time_ms") == std::string::npos) out += line + "\n";
    return out;
}

}  // namespace testutil
