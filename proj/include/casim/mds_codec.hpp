#pragma once

// Maximum-distance-separable coding over GF(256). A value of length L is
// zero-padded to a multiple of k, split into k shares of ceil(L/k) bytes,
// and viewed as k evaluations of a polynomial at field points 0..k-1.
// Coordinate i of the codeword is the evaluation at point i, so the first
// k coordinates are the shares themselves and any k coordinates recover the
// value. With k = 1 this degenerates to plain replication; with k = 3 the
// interpolation nodes {0,1,2} give all-ones weights at x = 3, so coordinate
// 3 is the XOR parity of the three shares.

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "casim/core_types.hpp"

namespace casim {

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace gf256 {

// GF(2^8) with primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11d).
struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<int, 256> log{};

  Tables() {
    int x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<std::uint8_t>(x);
      log[x] = i;
      x <<= 1;
      if (x & 0x100) x ^= 0x11d;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
    log[0] = -1;
  }
};

inline const Tables& tables() {
  static const Tables t;
  return t;
}

inline std::uint8_t mul(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0) return 0;
  const auto& t = tables();
  return t.exp[t.log[a] + t.log[b]];
}

inline std::uint8_t div(std::uint8_t a, std::uint8_t b) {
  if (b == 0) throw CodecError("GF(256) division by zero");
  if (a == 0) return 0;
  const auto& t = tables();
  return t.exp[t.log[a] + 255 - t.log[b]];
}

}  // namespace gf256

struct CodecParams {
  int n = 0;
  int k = 0;
};

inline void validate_params(CodecParams p) {
  if (p.k < 1 || p.k >= p.n || p.n > 255)
    throw CodecError("codec params must satisfy 1 <= k < n <= 255, got n=" +
                     std::to_string(p.n) + " k=" + std::to_string(p.k));
}

inline std::size_t share_size(std::size_t length, int k) {
  return (length + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
}

inline Bytes pad(const Bytes& value, int k) {
  Bytes out = value;
  out.resize(share_size(value.size(), k) * static_cast<std::size_t>(k), 0);
  return out;
}

inline Bytes unpad(const Bytes& padded, std::size_t original_length) {
  if (original_length > padded.size())
    throw CodecError("unpad: original length exceeds padded length");
  return Bytes(padded.begin(), padded.begin() + original_length);
}

namespace detail {

// Lagrange basis L_j over interpolation nodes xs, evaluated at x.
inline std::uint8_t lagrange_coeff(const std::vector<std::uint8_t>& xs,
                                   std::size_t j, std::uint8_t x) {
  std::uint8_t num = 1, den = 1;
  for (std::size_t m = 0; m < xs.size(); ++m) {
    if (m == j) continue;
    num = gf256::mul(num, static_cast<std::uint8_t>(x ^ xs[m]));
    den = gf256::mul(den, static_cast<std::uint8_t>(xs[j] ^ xs[m]));
  }
  return gf256::div(num, den);
}

}  // namespace detail

inline std::vector<CodedElement> encode(const Bytes& value, CodecParams p) {
  validate_params(p);
  const Bytes padded = pad(value, p.k);
  const std::size_t m = padded.size() / static_cast<std::size_t>(p.k);

  std::vector<std::uint8_t> nodes(p.k);
  for (int j = 0; j < p.k; ++j) nodes[j] = static_cast<std::uint8_t>(j);

  std::vector<CodedElement> out(p.n);
  for (int i = 0; i < p.n; ++i) {
    out[i].index = i;
    if (i < p.k) {
      out[i].data.assign(padded.begin() + i * m, padded.begin() + (i + 1) * m);
      continue;
    }
    std::vector<std::uint8_t> coeff(p.k);
    for (int j = 0; j < p.k; ++j)
      coeff[j] = detail::lagrange_coeff(nodes, j, static_cast<std::uint8_t>(i));
    out[i].data.assign(m, 0);
    for (int j = 0; j < p.k; ++j)
      for (std::size_t b = 0; b < m; ++b)
        out[i].data[b] ^= gf256::mul(coeff[j], padded[j * m + b]);
  }
  return out;
}

// Recovers the original value from any k coded elements. When more than k
// are supplied, the k with the lowest coordinate indices are used.
inline Bytes decode(std::vector<CodedElement> elements, CodecParams p,
                    std::size_t value_length) {
  validate_params(p);
  const std::size_t m = share_size(value_length, p.k);

  std::sort(elements.begin(), elements.end(),
            [](const CodedElement& a, const CodedElement& b) { return a.index < b.index; });
  std::vector<CodedElement> picked;
  for (const auto& e : elements) {
    if (e.index < 0 || e.index >= p.n)
      throw CodecError("decode: coordinate index out of range");
    if (e.data.size() != m) throw CodecError("decode: share size mismatch");
    if (!picked.empty() && picked.back().index == e.index) continue;
    picked.push_back(e);
    if (static_cast<int>(picked.size()) == p.k) break;
  }
  if (static_cast<int>(picked.size()) < p.k)
    throw CodecError("decode: need " + std::to_string(p.k) +
                     " distinct coordinates, got " + std::to_string(picked.size()));

  std::vector<std::uint8_t> xs(p.k);
  for (int j = 0; j < p.k; ++j) xs[j] = static_cast<std::uint8_t>(picked[j].index);

  Bytes padded(m * static_cast<std::size_t>(p.k), 0);
  for (int t = 0; t < p.k; ++t) {
    bool direct = false;
    for (int j = 0; j < p.k; ++j) {
      if (picked[j].index == t) {
        std::copy(picked[j].data.begin(), picked[j].data.end(), padded.begin() + t * m);
        direct = true;
        break;
      }
    }
    if (direct) continue;
    for (int j = 0; j < p.k; ++j) {
      std::uint8_t c = detail::lagrange_coeff(xs, j, static_cast<std::uint8_t>(t));
      for (std::size_t b = 0; b < m; ++b)
        padded[t * m + b] ^= gf256::mul(c, picked[j].data[b]);
    }
  }
  return unpad(padded, value_length);
}

}  // namespace casim
