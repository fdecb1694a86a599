#pragma once

#include "lightfit/common.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace lightfit::detail {

// Reads JSON with path-qualified errors and rejects unknown keys.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const nlohmann::json& value() const { return j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(fmt::format("{}: {}", path_.empty() ? "/" : path_, what));
  }

  /// For well-formed values that break a documented invariant.
  [[noreturn]] void violate(const std::string& what) const {
    throw PreconditionError(fmt::format("{}: {}", path_.empty() ? "/" : path_, what));
  }

  void expect_object(std::initializer_list<std::string_view> keys) const {
    if (!j_.is_object()) {
      fail("expected an object");
    }
    for (const auto& [k, v] : j_.items()) {
      bool known = false;
      for (auto key : keys) {
        known = known || key == k;
      }
      if (!known) {
        Reader(v, path_ + "/" + k).fail("unknown key");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  Reader at(const char* key) const { return Reader(j_.at(key), path_ + "/" + key); }
  Reader at(std::size_t i) const { return Reader(j_.at(i), path_ + "/" + std::to_string(i)); }

  double number() const {
    if (!j_.is_number()) {
      fail("expected a number");
    }
    return j_.get<double>();
  }
  long long integer() const {
    if (!j_.is_number_integer()) {
      fail("expected an integer");
    }
    return j_.get<long long>();
  }
  std::uint64_t seed() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<long long>() >= 0)) {
      fail("expected a non-negative integer");
    }
    return j_.get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) {
      fail("expected true or false");
    }
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) {
      fail("expected a string");
    }
    return j_.get<std::string>();
  }
  std::size_t array_size() const {
    if (!j_.is_array()) {
      fail("expected an array");
    }
    return j_.size();
  }

  template <typename T>
  void optional(const char* key, T& out, T (Reader::*get)() const) const {
    if (has(key)) {
      out = (at(key).*get)();
    }
  }
  void optional_int(const char* key, int& out) const {
    if (has(key)) {
      out = static_cast<int>(at(key).integer());
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

}  // namespace lightfit::detail
