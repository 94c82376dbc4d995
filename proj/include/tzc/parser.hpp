#ifndef TZC_PARSER_HPP
#define TZC_PARSER_HPP

#include <string>

#include "tzc/compute_op.hpp"

namespace tzc {

// Parses the loop-nest DSL:
//
//   tensor <name> : <dtype> [ <extent> {, <extent>} ] (input|output)
//   loop   <name> : (dp|red) <extent>
//   <out>[<idx>{, <idx>}] (=|+=) <expr>
//
// expr     := term { '+' term }
// term     := factor { '*' factor }
// factor   := int | float | 'cast' '<' dtype '>' '(' expr ')'
//           | ident '[' expr {',' expr} ']' | ident | '(' expr ')'
//
// '#' starts a comment running to end of line. Integer literals type as i32,
// float literals as fp32; anything else needs an explicit cast. "+=" is
// accumulate form: the parser materializes the output load as the left
// addend of the stored value and sets `update`.
//
// The result is validated (throws SyntaxError / ValidationError) but not
// type-resolved; run infer_types for that.
ComputeOp parse_compute(const std::string& text);

}  // namespace tzc

#endif  // TZC_PARSER_HPP
