#ifndef TZC_WORKLOADS_HPP
#define TZC_WORKLOADS_HPP

#include <string>
#include <vector>

#include "tzc/compute_op.hpp"

namespace tzc {

// Conv layer description in valid-convolution arithmetic:
// out_hw = (in_hw - kernel) / stride + 1 (floor).
struct ConvShape {
  std::string name;
  int64_t in_c = 0;
  int64_t in_hw = 0;
  int64_t out_c = 0;
  int64_t kernel = 0;  // square (and cubic for the 3-D variant)
  int64_t stride = 1;
  int64_t out_hw() const { return (in_hw - kernel) / stride + 1; }
};

// Element type profile for generated workloads.
struct DtypeProfile {
  DType data;   // e.g. u8
  DType weight; // e.g. i8
  DType acc;    // e.g. i32
};
inline DtypeProfile int8_profile() { return {kU8, kI8, kI32}; }
inline DtypeProfile fp16_profile() { return {kF16, kF16, kF32}; }

// ---- generators -------------------------------------------------------------
// All generators emit surface-DSL text (accumulate form) with channels laid
// out in blocked form: data [C/cb, H, W, cb], kernel [K/kb, C/cb, R, S, kb,
// cb], output [K/kb, OH, OW, kb], so the innermost channel loops line up
// with instruction lanes. Channel counts must divide evenly.

std::string matmul_tdsl(int64_t m, int64_t n, int64_t k,
                        const DtypeProfile& p = int8_profile());
std::string conv2d_tdsl(const ConvShape& c, int64_t lane_block,
                        int64_t red_block,
                        const DtypeProfile& p = int8_profile());
// Depth mirrors the spatial extents: input D = in_hw, kernel depth = kernel.
std::string conv3d_tdsl(const ConvShape& c, int64_t lane_block,
                        int64_t red_block,
                        const DtypeProfile& p = int8_profile());

// ---- workload banks ----------------------------------------------------------

// 16 production conv layers used for tuner sweeps (mixed channel widths,
// spatial sizes 7..71, strides 1..2).
const std::vector<ConvShape>& table1_bank();

// The distinct conv layers of an 18-layer residual classifier, re-read as
// 3-D convolutions (depth = spatial size). The stem layer is omitted: its
// 3 input channels cannot be blocked.
const std::vector<ConvShape>& resnet18_3d_bank();

struct BankEntry {
  ConvShape shape;
  std::string tdsl;  // blocked for 16-lane / 4-deep integer dot product
  bool is_3d = false;
};
std::vector<BankEntry> bank_by_name(const std::string& name);

}  // namespace tzc

#endif  // TZC_WORKLOADS_HPP
