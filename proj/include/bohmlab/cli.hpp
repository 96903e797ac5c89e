#pragma once

// Command-line front end. Exit codes: 0 success, 1 I/O or internal failure,
// 2 invalid configuration or arguments, 3 numerical guard tripped mid-run.

#include <ostream>
#include <string>
#include <vector>

namespace bohmlab::cli {

/// `args` excludes the program name.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// --threads, else BOHMLAB_THREADS, else 1.
unsigned resolve_threads(int flag);

} // namespace bohmlab::cli
