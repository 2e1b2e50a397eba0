#ifndef CTWIN_COMMON_HPP
#define CTWIN_COMMON_HPP

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctwin {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 299792458.0;     // m/s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // F/m

/// Thrown when an input violates a documented shape/dimension contract.
class dimension_error : public std::invalid_argument {
  public:
    explicit dimension_error(const std::string &what) : std::invalid_argument(what) {}
};

/// Thrown when a value is non-finite or otherwise numerically unusable.
class numeric_error : public std::runtime_error {
  public:
    explicit numeric_error(const std::string &what) : std::runtime_error(what) {}
};

/// Thrown when an operation is called out of order (e.g. backward before forward).
class state_error : public std::logic_error {
  public:
    explicit state_error(const std::string &what) : std::logic_error(what) {}
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

} // namespace ctwin

#endif
