#pragma once

#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fcollide {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Hz <-> rad/s. Config files hold ordinary frequencies; the engine works in angular units.
inline constexpr double angular(double hz) { return two_pi * hz; }
inline constexpr double ordinary(double rad_per_s) { return rad_per_s / two_pi; }

/// Invalid input or violated precondition.
class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A configurable size cap was exceeded (subspace states, walk count, ...).
class ResourceError : public std::runtime_error {
public:
  ResourceError(const std::string& what, std::size_t partial)
      : std::runtime_error(what), partial_(partial) {}
  std::size_t partial() const { return partial_; }

private:
  std::size_t partial_;
};

}  // namespace fcollide
