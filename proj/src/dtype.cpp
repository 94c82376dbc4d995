#include "tzc/dtype.hpp"

#include <bit>
#include <cmath>

namespace tzc {

std::string dtype_name(const DType& t) {
  std::string base;
  switch (t.kind) {
    case DType::Kind::Int:
      base = "i" + std::to_string(t.bits);
      break;
    case DType::Kind::UInt:
      base = "u" + std::to_string(t.bits);
      break;
    case DType::Kind::Float:
      base = "fp" + std::to_string(t.bits);
      break;
    case DType::Kind::Invalid:
      base = "invalid";
      break;
  }
  if (t.lanes != 1) base += "x" + std::to_string(t.lanes);
  return base;
}

DType dtype_from_name(const std::string& name) {
  if (name == "u8") return kU8;
  if (name == "i8") return kI8;
  if (name == "u16") return kU16;
  if (name == "i16") return kI16;
  if (name == "u32") return kU32;
  if (name == "i32") return kI32;
  if (name == "fp16") return kF16;
  if (name == "fp32") return kF32;
  throw SyntaxError("unknown dtype '" + name + "'");
}

int64_t wrap_int(int64_t v, const DType& t) {
  internal_check(t.is_int() && t.bits >= 1 && t.bits <= 64,
                 "wrap_int on non-integer dtype " + dtype_name(t));
  if (t.bits == 64) return v;
  uint64_t mask = (uint64_t{1} << t.bits) - 1;
  uint64_t u = static_cast<uint64_t>(v) & mask;
  if (t.is_signed() && (u & (uint64_t{1} << (t.bits - 1)))) u |= ~mask;
  return static_cast<int64_t>(u);
}

// Round-to-nearest-even conversion from binary64. Done directly on the bit
// pattern so the (exactly computed) double result of a binary16 operation
// rounds once, with no float32 intermediate that could double-round ties.
uint16_t f64_to_f16_bits(double x) {
  uint64_t u = std::bit_cast<uint64_t>(x);
  uint16_t sign = static_cast<uint16_t>((u >> 48) & 0x8000u);
  int64_t exp = static_cast<int64_t>((u >> 52) & 0x7ff);
  uint64_t man = u & 0x000fffffffffffffULL;

  if (exp == 0x7ff) return man ? (sign | 0x7e00) : (sign | 0x7c00);  // nan/inf
  if (exp == 0 && man == 0) return sign;                             // +-0

  // value = sig * 2^(e - 52), sig has <= 53 significant bits.
  int64_t e = (exp == 0) ? -1022 : exp - 1023;
  uint64_t sig = (exp == 0) ? man : (man | (1ULL << 52));
  int lead = 63 - std::countl_zero(sig);
  int64_t msb_exp = e - 52 + lead;  // exponent of the most significant bit

  // Unit in the last place of the target: 2^(msb-10) for normals, 2^-24
  // once the value drops into the subnormal range.
  int64_t ulp_exp = (msb_exp < -14) ? -24 : msb_exp - 10;
  int64_t shift = (e - 52) - ulp_exp;  // sig * 2^shift counts ulps

  uint64_t q;
  bool round_up = false;
  if (shift >= 0) {
    q = (shift >= 64) ? 0 : (sig << shift);  // shift>=64 cannot occur (<=53 bits)
  } else {
    int s = static_cast<int>(-shift);
    if (s >= 64) {
      q = 0;  // below half of the smallest subnormal
    } else {
      q = sig >> s;
      uint64_t rem = sig & ((1ULL << s) - 1);
      uint64_t half = 1ULL << (s - 1);
      round_up = rem > half || (rem == half && (q & 1));
    }
  }
  if (round_up) q += 1;

  if (msb_exp < -14) {
    // Subnormal result; rounding can promote to the smallest normal.
    return sign | static_cast<uint16_t>(q >= 1024 ? 0x0400 : q);
  }
  int64_t E = msb_exp;
  while (q >= 2048) {  // carry out of the 11-bit significand
    q >>= 1;
    E += 1;
  }
  if (E > 15) return sign | 0x7c00;  // overflow to infinity
  return sign | static_cast<uint16_t>(((E + 15) << 10) | (q & 0x3ff));
}

double f16_bits_to_f64(uint16_t bits) {
  int sign = (bits & 0x8000) ? -1 : 1;
  int exp = (bits >> 10) & 0x1f;
  int frac = bits & 0x3ff;
  if (exp == 0x1f) {
    if (frac) return std::bit_cast<double>(uint64_t{0x7ff8000000000000ULL});
    return sign * std::bit_cast<double>(uint64_t{0x7ff0000000000000ULL});
  }
  double mag;
  if (exp == 0) {
    mag = std::ldexp(static_cast<double>(frac), -24);
  } else {
    mag = std::ldexp(static_cast<double>(frac | 0x400), exp - 15 - 10);
  }
  return sign * mag;
}

double round_f16(double x) { return f16_bits_to_f64(f64_to_f16_bits(x)); }

}  // namespace tzc
