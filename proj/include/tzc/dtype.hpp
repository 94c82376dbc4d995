#ifndef TZC_DTYPE_HPP
#define TZC_DTYPE_HPP

#include <cstdint>
#include <string>

#include "tzc/errors.hpp"

namespace tzc {

// Scalar element type. `lanes > 1` only appears on vector expressions inside
// lowered IR (ramp/broadcast/concat operands); declared tensors and the DSL
// itself are scalar-typed.
struct DType {
  enum class Kind : uint8_t { Invalid = 0, Int, UInt, Float };

  Kind kind = Kind::Invalid;
  int bits = 0;
  int lanes = 1;

  constexpr DType() = default;
  constexpr DType(Kind k, int b, int l = 1) : kind(k), bits(b), lanes(l) {}

  bool defined() const { return kind != Kind::Invalid; }
  bool is_int() const { return kind == Kind::Int || kind == Kind::UInt; }
  bool is_signed() const { return kind == Kind::Int; }
  bool is_float() const { return kind == Kind::Float; }
  bool is_scalar() const { return lanes == 1; }

  DType scalar() const { return DType(kind, bits, 1); }
  DType with_lanes(int l) const { return DType(kind, bits, l); }

  friend bool operator==(const DType& a, const DType& b) {
    return a.kind == b.kind && a.bits == b.bits && a.lanes == b.lanes;
  }
  friend bool operator!=(const DType& a, const DType& b) { return !(a == b); }
};

inline constexpr DType kU8{DType::Kind::UInt, 8};
inline constexpr DType kI8{DType::Kind::Int, 8};
inline constexpr DType kU16{DType::Kind::UInt, 16};
inline constexpr DType kI16{DType::Kind::Int, 16};
inline constexpr DType kU32{DType::Kind::UInt, 32};
inline constexpr DType kI32{DType::Kind::Int, 32};
inline constexpr DType kF16{DType::Kind::Float, 16};
inline constexpr DType kF32{DType::Kind::Float, 32};

std::string dtype_name(const DType& t);

// Parses "u8", "i32", "fp16", ... Throws SyntaxError on unknown names.
DType dtype_from_name(const std::string& name);

// Wraps `v` into the two's-complement value range of integer dtype `t`
// (canonical representation: unsigned in [0, 2^bits), signed sign-extended).
int64_t wrap_int(int64_t v, const DType& t);

// IEEE binary16 emulation. Stored values travel as doubles that are exactly
// representable in binary16; every arithmetic result funnels through
// round_f16 (round-to-nearest-even). Conversions are bit-exact.
uint16_t f64_to_f16_bits(double x);
double f16_bits_to_f64(uint16_t bits);
double round_f16(double x);

// binary32 rounding for fp32 arithmetic performed in double precision.
inline double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace tzc

#endif  // TZC_DTYPE_HPP
