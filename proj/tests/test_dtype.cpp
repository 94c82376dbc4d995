#include <cmath>
#include <limits>

#include "doctest.h"
#include "tzc/dtype.hpp"
#include "tzc/errors.hpp"

using namespace tzc;

TEST_CASE("dtype names round-trip") {
  const char* names[] = {"u8", "i8", "u16", "i16", "u32", "i32", "fp16",
                         "fp32"};
  for (const char* n : names) {
    DType t = dtype_from_name(n);
    CHECK(dtype_name(t) == n);
    CHECK(t.lanes == 1);
  }
  CHECK(dtype_from_name("i32").is_signed());
  CHECK(!dtype_from_name("u8").is_signed());
  CHECK(dtype_from_name("fp16").is_float());
  CHECK(dtype_from_name("fp32").bits == 32);
  CHECK_THROWS_AS(dtype_from_name("f64"), SyntaxError);
  CHECK_THROWS_AS(dtype_from_name(""), SyntaxError);
}

TEST_CASE("lane helpers") {
  DType v = dtype_from_name("i32").with_lanes(16);
  CHECK(v.lanes == 16);
  CHECK(!v.is_scalar());
  CHECK(v.scalar() == dtype_from_name("i32"));
  CHECK(v != dtype_from_name("i32"));
}

TEST_CASE("wrap_int two's-complement behavior") {
  DType u8 = dtype_from_name("u8"), i8 = dtype_from_name("i8");
  DType u16 = dtype_from_name("u16"), i16 = dtype_from_name("i16");
  DType i32 = dtype_from_name("i32"), u32 = dtype_from_name("u32");

  CHECK(wrap_int(0, u8) == 0);
  CHECK(wrap_int(255, u8) == 255);
  CHECK(wrap_int(256, u8) == 0);
  CHECK(wrap_int(257, u8) == 1);
  CHECK(wrap_int(-1, u8) == 255);
  CHECK(wrap_int(-256, u8) == 0);

  CHECK(wrap_int(127, i8) == 127);
  CHECK(wrap_int(128, i8) == -128);
  CHECK(wrap_int(-128, i8) == -128);
  CHECK(wrap_int(-129, i8) == 127);
  CHECK(wrap_int(255, i8) == -1);

  CHECK(wrap_int(65535, u16) == 65535);
  CHECK(wrap_int(65536, u16) == 0);
  CHECK(wrap_int(32768, i16) == -32768);
  CHECK(wrap_int(-32769, i16) == 32767);

  CHECK(wrap_int(2147483647LL, i32) == 2147483647LL);
  CHECK(wrap_int(2147483648LL, i32) == -2147483648LL);
  CHECK(wrap_int(-2147483649LL, i32) == 2147483647LL);
  CHECK(wrap_int(4294967296LL, u32) == 0);
  CHECK(wrap_int(-1, u32) == 4294967295LL);

  // Wrapping is a pure modular map: adding the modulus is a no-op.
  for (int64_t v : {-300LL, -5LL, 0LL, 7LL, 123456LL})
    CHECK(wrap_int(v, u8) == wrap_int(v + 256, u8));
}

// Binary16 round-to-nearest-even vectors, frozen from an independent IEEE-754
// implementation (numpy float16). Each row: double input -> expected bits.
struct F16Case {
  double in;
  uint16_t bits;
};
static const F16Case kF16Vectors[] = {
    {0.0, 0x0000},
    {-0.0, 0x8000},
    {1.0, 0x3c00},
    {-1.0, 0xbc00},
    {2.0, 0x4000},
    {65504.0, 0x7bff},                  // max finite
    {65520.0, 0x7c00},                  // halfway above max -> inf
    {65519.999, 0x7bff},                // just below halfway -> max finite
    {-65520.0, 0xfc00},
    {0.1, 0x2e66},                      // 0.0999755859375
    {1.0 / 3.0, 0x3555},                // 0.333251953125
    {2048.5, 0x6800},                   // tie -> even (2048)
    {2049.0, 0x6800},                   // tie -> even (2048)
    {2050.0, 0x6801},
    {5.960464477539063e-08, 0x0001},    // smallest subnormal
    {2.9802322387695312e-08, 0x0000},   // tie with zero -> even (0)
    {2.980232238769532e-08, 0x0001},    // just above the tie
    {6.103515625e-05, 0x0400},          // smallest normal
    {6.097555160522461e-05, 0x03ff},    // largest subnormal
    {1e-10, 0x0000},
    {-1e-10, 0x8000},
    {1.5, 0x3e00},
    {0.5005, 0x3801},                   // 0.50048828125
    {3.0000000001, 0x4200},
    {1024.03125, 0x6400},               // tie -> even (1024)
};

TEST_CASE("f64_to_f16_bits matches IEEE-754 binary16 RNE vectors") {
  for (const auto& c : kF16Vectors) {
    CAPTURE(c.in);
    CHECK(f64_to_f16_bits(c.in) == c.bits);
  }
  CHECK(f64_to_f16_bits(std::numeric_limits<double>::infinity()) == 0x7c00);
  CHECK(f64_to_f16_bits(-std::numeric_limits<double>::infinity()) == 0xfc00);
}

TEST_CASE("f16_bits_to_f64 decodes exactly") {
  CHECK(f16_bits_to_f64(0x3c00) == 1.0);
  CHECK(f16_bits_to_f64(0xbc00) == -1.0);
  CHECK(f16_bits_to_f64(0x3555) == 0.333251953125);
  CHECK(f16_bits_to_f64(0x0001) == 5.960464477539063e-08);
  CHECK(f16_bits_to_f64(0x03ff) == 6.097555160522461e-05);
  CHECK(f16_bits_to_f64(0x0400) == 6.103515625e-05);
  CHECK(f16_bits_to_f64(0x7bff) == 65504.0);
  CHECK(f16_bits_to_f64(0x0000) == 0.0);
  CHECK(std::signbit(f16_bits_to_f64(0x8000)));
  CHECK(std::isinf(f16_bits_to_f64(0x7c00)));
}

TEST_CASE("round_f16 is decode-of-encode") {
  for (const auto& c : kF16Vectors) {
    CAPTURE(c.in);
    CHECK(round_f16(c.in) == f16_bits_to_f64(c.bits));
  }
  // Idempotence: a value already representable maps to itself.
  for (const auto& c : kF16Vectors) {
    double once = round_f16(c.in);
    CHECK(round_f16(once) == once);
  }
}

// fp16 multiply vectors: operands are representable binary16 values, the
// expected product is the RNE-rounded binary16 result (frozen from numpy).
TEST_CASE("fp16 multiply emulation vectors") {
  struct MulCase {
    double a, b;
    uint16_t bits;
  };
  const MulCase cases[] = {
      {1.0009765625, 1.0009765625, 0x3c02},        // 1.001953125
      {0.0999755859375, 0.199951171875, 0x251e},   // 0.019989013671875
      {123.375, 0.01000213623046875, 0x3cf0},      // 1.234375
      {300.0, 300.0, 0x7c00},                      // overflow -> inf
      {-2.5, 3.30078125, 0xc820},                  // -8.25
  };
  for (const auto& c : cases) {
    CAPTURE(c.a);
    CAPTURE(c.b);
    CHECK(f64_to_f16_bits(round_f16(c.a * c.b)) == c.bits);
  }
}

TEST_CASE("round_f32 matches float cast") {
  CHECK(round_f32(0.1) == static_cast<double>(0.1f));
  CHECK(round_f32(1.0) == 1.0);
  CHECK(round_f32(16777217.0) == 16777216.0);  // above float precision
  double big = 3.5e38;
  CHECK(std::isinf(round_f32(big)));
}
