#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pafrob::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     // runtime or I/O failure
inline constexpr int kExitUsage = 2;       // bad flags or config
inline constexpr int kExitCheckpoint = 3;  // unreadable or malformed checkpoint

// `args` excludes the program name: {"train", "--config", "c.json", ...}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace pafrob::cli
