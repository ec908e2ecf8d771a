#pragma once

#include <iosfwd>
#include <string>

#include "qv/campaign.hpp"

namespace qv::cli {

// Parses argv, runs one campaign and writes its report. Exit codes: 0 all
// assertions passed, 1 an assertion failed (or a warning under --strict),
// 2 bad arguments, bad config or missing input.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Config as `qvtool --config path <command>` would see it. Throws
// InvalidInput on unknown keys or unreadable files.
campaign::Config load_config(const std::string& path, const std::string& command);

// INI text of every option at its default, one section per subcommand.
std::string default_config();

}  // namespace qv::cli
