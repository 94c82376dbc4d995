#include "tzc/workloads.hpp"

#include <sstream>

#include "tzc/errors.hpp"

namespace tzc {

namespace {

void check_blocking(const ConvShape& c, int64_t lane_block, int64_t red_block) {
  if (lane_block <= 0 || red_block <= 0)
    throw ValidationError("channel blocks must be positive");
  if (c.out_c % lane_block != 0)
    throw ValidationError("output channels " + std::to_string(c.out_c) +
                          " not divisible by lane block " +
                          std::to_string(lane_block));
  if (c.in_c % red_block != 0)
    throw ValidationError("input channels " + std::to_string(c.in_c) +
                          " not divisible by channel block " +
                          std::to_string(red_block));
  if (c.out_hw() <= 0)
    throw ValidationError("kernel " + std::to_string(c.kernel) +
                          " does not fit input extent " +
                          std::to_string(c.in_hw));
}

// "oh * 2 + r" (or just "oh + r" for unit stride).
std::string strided(const std::string& outer, int64_t stride,
                    const std::string& inner) {
  if (stride == 1) return outer + " + " + inner;
  return outer + " * " + std::to_string(stride) + " + " + inner;
}

std::string cast_to(const DType& t, const std::string& e) {
  return "cast<" + dtype_name(t) + ">(" + e + ")";
}

}  // namespace

std::string matmul_tdsl(int64_t m, int64_t n, int64_t k,
                        const DtypeProfile& p) {
  if (m <= 0 || n <= 0 || k <= 0)
    throw ValidationError("matmul extents must be positive");
  std::ostringstream os;
  bool bt = !p.weight.is_float();  // integer profile keeps B row-major in N
  os << "tensor A : " << dtype_name(p.data) << " [" << m << ", " << k
     << "] input\n";
  if (bt)
    os << "tensor B : " << dtype_name(p.weight) << " [" << n << ", " << k
       << "] input\n";
  else
    os << "tensor B : " << dtype_name(p.weight) << " [" << k << ", " << n
       << "] input\n";
  os << "tensor C : " << dtype_name(p.acc) << " [" << m << ", " << n
     << "] output\n";
  os << "loop x : dp " << m << "\n";
  os << "loop y : dp " << n << "\n";
  os << "loop k : red " << k << "\n";
  os << "C[x, y] += " << cast_to(p.acc, "A[x, k]") << " * "
     << cast_to(p.acc, bt ? "B[y, k]" : "B[k, y]") << "\n";
  return os.str();
}

std::string conv2d_tdsl(const ConvShape& c, int64_t lane_block,
                        int64_t red_block, const DtypeProfile& p) {
  check_blocking(c, lane_block, red_block);
  int64_t co = c.in_c / red_block, ko = c.out_c / lane_block;
  int64_t ohw = c.out_hw();
  std::ostringstream os;
  os << "tensor data : " << dtype_name(p.data) << " [" << co << ", " << c.in_hw
     << ", " << c.in_hw << ", " << red_block << "] input\n";
  os << "tensor kernel : " << dtype_name(p.weight) << " [" << ko << ", " << co
     << ", " << c.kernel << ", " << c.kernel << ", " << lane_block << ", "
     << red_block << "] input\n";
  os << "tensor out : " << dtype_name(p.acc) << " [" << ko << ", " << ohw
     << ", " << ohw << ", " << lane_block << "] output\n";
  os << "loop ko : dp " << ko << "\n";
  os << "loop oh : dp " << ohw << "\n";
  os << "loop ow : dp " << ohw << "\n";
  os << "loop ki : dp " << lane_block << "\n";
  os << "loop co : red " << co << "\n";
  os << "loop r : red " << c.kernel << "\n";
  os << "loop s : red " << c.kernel << "\n";
  os << "loop ci : red " << red_block << "\n";
  std::string d = "data[co, " + strided("oh", c.stride, "r") + ", " +
                  strided("ow", c.stride, "s") + ", ci]";
  std::string w = "kernel[ko, co, r, s, ki, ci]";
  os << "out[ko, oh, ow, ki] += " << cast_to(p.acc, d) << " * "
     << cast_to(p.acc, w) << "\n";
  return os.str();
}

std::string conv3d_tdsl(const ConvShape& c, int64_t lane_block,
                        int64_t red_block, const DtypeProfile& p) {
  check_blocking(c, lane_block, red_block);
  int64_t co = c.in_c / red_block, ko = c.out_c / lane_block;
  int64_t ohw = c.out_hw();
  std::ostringstream os;
  os << "tensor data : " << dtype_name(p.data) << " [" << co << ", " << c.in_hw
     << ", " << c.in_hw << ", " << c.in_hw << ", " << red_block << "] input\n";
  os << "tensor kernel : " << dtype_name(p.weight) << " [" << ko << ", " << co
     << ", " << c.kernel << ", " << c.kernel << ", " << c.kernel << ", "
     << lane_block << ", " << red_block << "] input\n";
  os << "tensor out : " << dtype_name(p.acc) << " [" << ko << ", " << ohw
     << ", " << ohw << ", " << ohw << ", " << lane_block << "] output\n";
  os << "loop ko : dp " << ko << "\n";
  os << "loop od : dp " << ohw << "\n";
  os << "loop oh : dp " << ohw << "\n";
  os << "loop ow : dp " << ohw << "\n";
  os << "loop ki : dp " << lane_block << "\n";
  os << "loop co : red " << co << "\n";
  os << "loop rd : red " << c.kernel << "\n";
  os << "loop rh : red " << c.kernel << "\n";
  os << "loop rw : red " << c.kernel << "\n";
  os << "loop ci : red " << red_block << "\n";
  std::string d = "data[co, " + strided("od", c.stride, "rd") + ", " +
                  strided("oh", c.stride, "rh") + ", " +
                  strided("ow", c.stride, "rw") + ", ci]";
  std::string w = "kernel[ko, co, rd, rh, rw, ki, ci]";
  os << "out[ko, od, oh, ow, ki] += " << cast_to(p.acc, d) << " * "
     << cast_to(p.acc, w) << "\n";
  return os.str();
}

const std::vector<ConvShape>& table1_bank() {
  static const std::vector<ConvShape> bank = {
      // name, in_c, in_hw, out_c, kernel, stride
      {"conv01", 288, 35, 384, 3, 2},
      {"conv02", 160, 9, 224, 3, 1},
      {"conv03", 1056, 7, 192, 1, 1},
      {"conv04", 80, 73, 192, 3, 1},
      {"conv05", 128, 16, 128, 3, 1},
      {"conv06", 192, 16, 192, 3, 1},
      {"conv07", 256, 16, 256, 3, 1},
      {"conv08", 1024, 14, 512, 1, 1},
      {"conv09", 128, 16, 160, 3, 1},
      {"conv10", 576, 14, 192, 1, 1},
      {"conv11", 96, 16, 128, 3, 1},
      {"conv12", 1024, 14, 256, 1, 1},
      {"conv13", 576, 14, 128, 1, 1},
      {"conv14", 64, 29, 96, 3, 1},
      {"conv15", 64, 56, 128, 1, 2},
      {"conv16", 608, 14, 192, 1, 1},
  };
  return bank;
}

const std::vector<ConvShape>& resnet18_3d_bank() {
  static const std::vector<ConvShape> bank = {
      {"block2_conv", 64, 56, 64, 3, 1},
      {"block3_down", 64, 56, 128, 3, 2},
      {"block3_conv", 128, 28, 128, 3, 1},
      {"block3_skip", 64, 56, 128, 1, 2},
      {"block4_down", 128, 28, 256, 3, 2},
      {"block4_conv", 256, 14, 256, 3, 1},
      {"block4_skip", 128, 28, 256, 1, 2},
      {"block5_down", 256, 14, 512, 3, 2},
      {"block5_conv", 512, 7, 512, 3, 1},
      {"block5_skip", 256, 14, 512, 1, 2},
  };
  return bank;
}

std::vector<BankEntry> bank_by_name(const std::string& name) {
  std::vector<BankEntry> out;
  if (name == "table1") {
    for (const auto& c : table1_bank())
      out.push_back({c, conv2d_tdsl(c, 16, 4), false});
    return out;
  }
  if (name == "resnet18-3d") {
    for (const auto& c : resnet18_3d_bank())
      out.push_back({c, conv3d_tdsl(c, 16, 4), true});
    return out;
  }
  throw ValidationError("unknown workload bank '" + name +
                        "' (try table1 or resnet18-3d)");
}

}  // namespace tzc
