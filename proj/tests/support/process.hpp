#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace scbv::testkit {

struct Outcome {
    int code = -1;
    std::string out;
};

// Runs a shell command and captures stdout; stderr is merged into it or
// discarded.
inline Outcome run_command(const std::string& cmd, bool merge_stderr = false) {
    FILE* p = popen((cmd + (merge_stderr ? " 2>&1" : " 2>/dev/null")).c_str(), "r");
    if (!p) throw std::runtime_error("popen failed: " + cmd);
    Outcome o;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) o.out.append(buf.data(), n);
    int status = pclose(p);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

inline std::string write_temp(const std::string& name, const std::string& text) {
    std::string path = std::string(SCBV_TEST_TMPDIR) + "/" + name;
    std::ofstream(path) << text;
    return path;
}

inline std::string cli() { return SCBV_CLI_PATH; }

} // namespace scbv::testkit
