#pragma once

#include <string>
#include <vector>

namespace kgfuse::cli {

// Exit codes: 0 success, 1 failure, 2 usage/config error, 3 consistency
// report non-empty, 4 scope not clean, 5 missing artifacts.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace kgfuse::cli
