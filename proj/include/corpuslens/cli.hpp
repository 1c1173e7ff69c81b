#pragma once

#include <ostream>

namespace corpuslens::cli {

// Exit codes: 0 success, 1 pipeline error, 2 usage error. Errors are written
// to `err` as `error: <Code>: <detail>`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace corpuslens::cli
