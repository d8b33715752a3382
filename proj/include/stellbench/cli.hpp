#ifndef STELLBENCH_CLI_HPP
#define STELLBENCH_CLI_HPP

#include <memory>
#include <string>

#include "stellbench/oracle.hpp"

namespace stellbench {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsageError = 2;

// "synthetic", "replay:PATH" (store directory or record JSONL) or
// "subprocess:COMMAND". An empty spec falls back to $STELLOPT_ORACLE, then
// to "synthetic".
std::unique_ptr<Oracle> make_oracle(const std::string& spec);

// Entry point of the stellbench executable.
int cli_dispatch(int argc, char** argv);

}  // namespace stellbench

#endif  // STELLBENCH_CLI_HPP
