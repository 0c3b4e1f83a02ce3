#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fairtext {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Runs one command line (without the program name). Data goes to `out`,
// diagnostics to `err`. Returns 0 on success, 1 on invalid input or usage,
// 2 on runtime failure.
int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);

// Reads one word per line; blank lines and '#' comments are skipped.
std::vector<std::string> read_word_list(const std::string& path);

}  // namespace fairtext
