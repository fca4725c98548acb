#pragma once

#include <stdexcept>
#include <string>

namespace skembed {

/// Typed failure reasons surfaced by the library.
enum class Errc {
  not_probability,
  not_centered,
  bad_atom,
  bad_density,
  bad_preset,
  curve_above_c,
  point_above_c,
  not_admissible,
  degenerate_curve,
  out_of_range,
  wrong_preset,
  config_error,
  degenerate_boundaries,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::not_probability: return "NotProbability";
    case Errc::not_centered: return "NotCentered";
    case Errc::bad_atom: return "BadAtom";
    case Errc::bad_density: return "BadDensity";
    case Errc::bad_preset: return "BadPreset";
    case Errc::curve_above_c: return "CurveAboveC";
    case Errc::point_above_c: return "PointAboveC";
    case Errc::not_admissible: return "NotAdmissible";
    case Errc::degenerate_curve: return "DegenerateCurve";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::wrong_preset: return "WrongPreset";
    case Errc::config_error: return "ConfigError";
    case Errc::degenerate_boundaries: return "DegenerateBoundaries";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace skembed
