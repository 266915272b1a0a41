#pragma once

namespace lqgent::constants {

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double epsilon0 = 8.8541878128e-12;         // F/m
inline constexpr double pi = 3.14159265358979323846;

}  // namespace lqgent::constants
