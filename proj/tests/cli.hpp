#pragma once

// Runs the cascadex binary in a shell and captures its combined output.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace cli {

struct Result {
    int code = -1;
    std::string output;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

inline Result run(const std::string& binary, const std::string& args) {
    const auto capture =
        std::filesystem::temp_directory_path() / ("cascadex_cli_" + std::to_string(::getpid()) + ".txt");
    const std::string command = binary + " " + args + " > " + capture.string() + " 2>&1";
    const int status = std::system(command.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = read_file(capture);
    std::filesystem::remove(capture);
    return r;
}

}  // namespace cli
