#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace p2pbench {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data (CSV rows, unparseable cells).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Schema mismatch between declared and observed columns.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Precondition violations on configs and table states.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A compliance rule needed a field that is missing for a row.
class LabelingError : public Error {
 public:
  LabelingError(const std::string& msg, std::string field, std::size_t row)
      : Error(msg), field(std::move(field)), row(row) {}
  std::string field;
  std::size_t row = 0;
};

// A fold ended up without positives; downstream metrics would be degenerate.
class InfeasibleStratificationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Dense row-major matrix of doubles. Small on purpose; all numeric model
// code works on this single representation.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64_bytes(const void* bytes, std::size_t n,
                                   std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

// splitmix64 finalizer; FNV's high bits are too weak to use directly as a
// uniform variate on short, similar strings.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Streaming FNV-1a hasher for content hashes. Doubles are hashed through
// their %.17g text form so the hash is identical across platforms
// regardless of how the bits would serialize.
class Hasher {
 public:
  void add(std::string_view s) {
    h_ = fnv1a64(s, h_);
    h_ = fnv1a64("\x1f", h_);
  }
  void add_u64(std::uint64_t v) {
    h_ = fnv1a64_bytes(&v, sizeof(v), h_);
  }
  void add_i64(std::int64_t v) { add_u64(static_cast<std::uint64_t>(v)); }
  void add_double(double v);
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = kFnvOffset;
};

// Shortest text that round-trips a double (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void Hasher::add_double(double v) { add(format_double(v)); }

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace p2pbench
