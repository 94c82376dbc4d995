#ifndef TZC_CLI_HPP
#define TZC_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace tzc {

// Entry point shared by the binary and in-process tests. Subcommands:
//   inspect    match an op against an instruction, list feasible mappings
//   tensorize  emit the rewritten loop nest (and optionally the schedule)
//   verify     differential-test the tensorized kernel vs the reference
//   tune       search mapping x sketch candidates, report the best
//   run        execute a program (optionally scheduled) on the VM
// Exit codes: 0 success, 1 no feasible mapping / verification failure,
// 2 usage or parse errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace tzc

#endif  // TZC_CLI_HPP
