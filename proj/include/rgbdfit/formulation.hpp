#pragma once

#include <array>
#include <string>
#include <string_view>

#include "rgbdfit/error.hpp"

namespace rgbdfit {

// Standard fits work on back-projected (X, Y, Z); range-space ("rgbd") fits
// work on (tan_x, tan_y, 1/Z).
enum class Formulation { implicit_standard, implicit_rgbd, explicit_standard, explicit_rgbd };

enum class Backend { naive, integral };

inline constexpr std::array<Formulation, 4> kAllFormulations = {
    Formulation::implicit_standard, Formulation::implicit_rgbd, Formulation::explicit_standard,
    Formulation::explicit_rgbd};

inline constexpr bool is_implicit(Formulation f) {
  return f == Formulation::implicit_standard || f == Formulation::implicit_rgbd;
}
inline constexpr bool is_rgbd(Formulation f) {
  return f == Formulation::implicit_rgbd || f == Formulation::explicit_rgbd;
}
inline constexpr int min_samples(Formulation f) { return is_implicit(f) ? 4 : 3; }

inline std::string_view to_string(Formulation f) {
  switch (f) {
    case Formulation::implicit_standard: return "implicit-standard";
    case Formulation::implicit_rgbd: return "implicit-rgbd";
    case Formulation::explicit_standard: return "explicit-standard";
    case Formulation::explicit_rgbd: return "explicit-rgbd";
  }
  return "?";
}

inline std::string_view to_string(Backend b) { return b == Backend::naive ? "naive" : "integral"; }

inline Formulation parse_formulation(std::string_view s) {
  for (auto f : kAllFormulations) {
    if (to_string(f) == s) return f;
  }
  throw ParseError("unknown formulation '" + std::string(s) + "'");
}

inline Backend parse_backend(std::string_view s) {
  if (s == "naive") return Backend::naive;
  if (s == "integral") return Backend::integral;
  throw ParseError("unknown backend '" + std::string(s) + "'");
}

}  // namespace rgbdfit
