#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "lgn/error.hpp"

// The 16 two-input Boolean operators and their real-valued relaxations.
//
// An operator id encodes its truth table: bit (3 - (2a + b)) of the id is
// the output for inputs (a, b), so the id read in binary is the output
// column for (a,b) = (0,0), (0,1), (1,0), (1,1) from the top bit down.
//
//   id  name   f(a,b)         relaxation
//    0  FALSE  0              0
//    1  AND    a AND b        a*b
//    2  GT     a AND NOT b    a - a*b
//    3  A      a              a
//    4  LT     NOT a AND b    b - a*b
//    5  B      b              b
//    6  XOR    a XOR b        a + b - 2*a*b
//    7  OR     a OR b         a + b - a*b
//    8  NOR    NOT (a OR b)   1 - (a + b - a*b)
//    9  XNOR   NOT (a XOR b)  1 - (a + b - 2*a*b)
//   10  NOTB   NOT b          1 - b
//   11  GE     a OR NOT b     1 - b + a*b
//   12  NOTA   NOT a          1 - a
//   13  LE     NOT a OR b     1 - a + a*b
//   14  NAND   NOT (a AND b)  1 - a*b
//   15  TRUE   1              1
//
// Each relaxation is the multilinear polynomial equal to the expectation of
// the operator over independent Bernoulli(a), Bernoulli(b) inputs; it agrees
// with the truth table on {0,1}^2 and maps [0,1]^2 into [0,1]. Complements
// pair up as id <-> 15 - id.

namespace lgn {

inline constexpr int kNumOps = 16;

// Well-known ids referenced elsewhere.
inline constexpr uint8_t kOpFalse = 0;
inline constexpr uint8_t kOpAnd = 1;
inline constexpr uint8_t kOpPassA = 3;
inline constexpr uint8_t kOpPassB = 5;
inline constexpr uint8_t kOpXor = 6;
inline constexpr uint8_t kOpOr = 7;
inline constexpr uint8_t kOpNor = 8;
inline constexpr uint8_t kOpXnor = 9;
inline constexpr uint8_t kOpNotB = 10;
inline constexpr uint8_t kOpNotA = 12;
inline constexpr uint8_t kOpNand = 14;
inline constexpr uint8_t kOpTrue = 15;

inline constexpr std::array<std::string_view, kNumOps> kOpNames = {
    "FALSE", "AND", "GT",   "A",  "LT",   "B",  "XOR",  "OR",
    "NOR",   "XNOR", "NOTB", "GE", "NOTA", "LE", "NAND", "TRUE"};

inline void check_op(int op_id) {
  if (op_id < 0 || op_id >= kNumOps) throw Error("invalid operator id " + std::to_string(op_id));
}

inline std::string_view op_name(int op_id) {
  check_op(op_id);
  return kOpNames[size_t(op_id)];
}

// Returns -1 when the name is unknown.
inline int op_from_name(std::string_view name) {
  for (int i = 0; i < kNumOps; ++i)
    if (kOpNames[size_t(i)] == name) return i;
  return -1;
}

inline constexpr int truth(uint8_t op_id, int a, int b) {
  return (op_id >> (3 - (2 * a + b))) & 1;
}

// Coefficients of the multilinear relaxation f = c0 + c1*a + c2*b + c3*a*b.
struct RelaxCoef {
  int8_t c0, c1, c2, c3;
};

namespace detail {
constexpr std::array<RelaxCoef, kNumOps> make_coef_table() {
  std::array<RelaxCoef, kNumOps> t{};
  for (uint8_t op = 0; op < kNumOps; ++op) {
    int t00 = truth(op, 0, 0), t01 = truth(op, 0, 1);
    int t10 = truth(op, 1, 0), t11 = truth(op, 1, 1);
    t[op] = {int8_t(t00), int8_t(t10 - t00), int8_t(t01 - t00), int8_t(t11 - t10 - t01 + t00)};
  }
  return t;
}
}  // namespace detail

inline constexpr std::array<RelaxCoef, kNumOps> kRelaxCoef = detail::make_coef_table();

template <typename T>
T eval_relaxed(int op_id, T a, T b) {
  check_op(op_id);
  const RelaxCoef& c = kRelaxCoef[size_t(op_id)];
  return T(c.c0) + T(c.c1) * a + T(c.c2) * b + T(c.c3) * a * b;
}

// Analytic partials (df/da, df/db) of the relaxation.
template <typename T>
std::pair<T, T> grad_relaxed(int op_id, T a, T b) {
  check_op(op_id);
  const RelaxCoef& c = kRelaxCoef[size_t(op_id)];
  return {T(c.c1) + T(c.c3) * b, T(c.c2) + T(c.c3) * a};
}

inline int eval_boolean(int op_id, int a, int b) {
  check_op(op_id);
  return truth(uint8_t(op_id), a, b);
}

// Word-wide bitwise evaluation, one sample per bit lane.
inline uint64_t eval_word(uint8_t op_id, uint64_t a, uint64_t b) {
  switch (op_id) {
    case 0: return 0;
    case 1: return a & b;
    case 2: return a & ~b;
    case 3: return a;
    case 4: return ~a & b;
    case 5: return b;
    case 6: return a ^ b;
    case 7: return a | b;
    case 8: return ~(a | b);
    case 9: return ~(a ^ b);
    case 10: return ~b;
    case 11: return a | ~b;
    case 12: return ~a;
    case 13: return ~a | b;
    case 14: return ~(a & b);
    case 15: return ~uint64_t(0);
    default: check_op(op_id); return 0;
  }
}

// --- truth-table algebra used by netlist optimization ---

inline constexpr uint8_t op_complement(uint8_t op) { return uint8_t(~op & 0xf); }

constexpr uint8_t make_op(int t00, int t01, int t10, int t11) {
  return uint8_t(t00 << 3 | t01 << 2 | t10 << 1 | t11);
}

// f'(a,b) = f(b,a)
inline constexpr uint8_t op_swap_inputs(uint8_t op) {
  return make_op(truth(op, 0, 0), truth(op, 1, 0), truth(op, 0, 1), truth(op, 1, 1));
}

// f'(a,b) = f(NOT a, b)
inline constexpr uint8_t op_negate_a(uint8_t op) {
  return make_op(truth(op, 1, 0), truth(op, 1, 1), truth(op, 0, 0), truth(op, 0, 1));
}

// f'(a,b) = f(a, NOT b)
inline constexpr uint8_t op_negate_b(uint8_t op) {
  return make_op(truth(op, 0, 1), truth(op, 0, 0), truth(op, 1, 1), truth(op, 1, 0));
}

// Pin input a to the constant v; the result depends on b alone.
inline constexpr uint8_t op_restrict_a(uint8_t op, int v) {
  return make_op(truth(op, v, 0), truth(op, v, 1), truth(op, v, 0), truth(op, v, 1));
}

// Pin input b to the constant v; the result depends on a alone.
inline constexpr uint8_t op_restrict_b(uint8_t op, int v) {
  return make_op(truth(op, 0, v), truth(op, 0, v), truth(op, 1, v), truth(op, 1, v));
}

inline constexpr bool op_depends_on_a(uint8_t op) {
  return truth(op, 0, 0) != truth(op, 1, 0) || truth(op, 0, 1) != truth(op, 1, 1);
}

inline constexpr bool op_depends_on_b(uint8_t op) {
  return truth(op, 0, 0) != truth(op, 0, 1) || truth(op, 1, 0) != truth(op, 1, 1);
}

inline constexpr bool op_is_const(uint8_t op) { return op == kOpFalse || op == kOpTrue; }

}  // namespace lgn
