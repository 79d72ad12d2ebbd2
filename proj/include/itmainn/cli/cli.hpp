#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace itmainn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

const std::vector<std::string>& subcommand_names();

// args excludes the program name. Results go to `out`, diagnostics to `err`;
// logs go to stderr.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace itmainn::cli
