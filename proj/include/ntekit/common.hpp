#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ntekit {

// Half-open token range [start, end).
struct TokenRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool empty() const { return end <= start; }
  bool contains(std::size_t pos) const { return pos >= start && pos < end; }
  bool contains(const TokenRange& other) const {
    return other.start >= start && other.end <= end;
  }
  bool overlaps(const TokenRange& other) const {
    return start < other.end && other.start < end;
  }
  bool operator==(const TokenRange&) const = default;
};

enum class Tag : std::uint8_t { O, B, I };

enum class Role : std::uint8_t { user, assistant };

enum class Stage : std::uint8_t { pretrain, posttrain };

enum class Polarity : std::uint8_t { positive, negative };

std::string_view to_string(Tag tag);
std::string_view to_string(Role role);
std::string_view to_string(Stage stage);
std::string_view to_string(Polarity polarity);

Tag parse_tag(std::string_view text);
Role parse_role(std::string_view text);
Stage parse_stage(std::string_view text);
Polarity parse_polarity(std::string_view text);

// Malformed or inconsistent input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad invocation or configuration. Maps to CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An external service (the judge endpoint) could not be reached. Exit code 3.
class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ntekit
