#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace casim {

// Exact arithmetic for communication and storage accounting. Every cost in
// the system is a multiple of 1/k for small k, so int64 components are far
// from overflow. No floating point appears anywhere in accounting.
using Rational = boost::rational<std::int64_t>;

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline Rational rational_from_string(const std::string& s) {
  try {
    auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)),
                    std::stoll(s.substr(slash + 1)));
  } catch (const boost::bad_rational&) {
    throw std::invalid_argument("malformed rational: " + s);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("malformed rational: " + s);
  }
}

}  // namespace casim
