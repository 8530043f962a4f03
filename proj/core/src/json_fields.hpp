#pragma once

// Checked access into parsed JSON with dotted field paths in every error.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynalloc/error.hpp"

namespace dynalloc::detail {

using json = nlohmann::json;

class Fields {
 public:
  Fields(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "document" : path_, "must be an object");
  }

  const std::string& path() const noexcept { return path_; }
  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  Fields object(const char* key) const { return Fields(require(key), join(key)); }
  std::optional<Fields> optional_object(const char* key) const {
    if (!has(key)) return std::nullopt;
    return object(key);
  }
  const json& raw(const char* key) const { return require(key); }

  double number(const char* key) const { return as_number(require(key), join(key)); }
  double number_or(const char* key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  std::size_t count(const char* key) const { return as_count(require(key), join(key)); }
  std::size_t count_or(const char* key, std::size_t fallback) const {
    return has(key) ? count(key) : fallback;
  }
  std::uint64_t seed(const char* key) const {
    const json& v = require(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(join(key), "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t seed_or(const char* key, std::uint64_t fallback) const {
    return has(key) ? seed(key) : fallback;
  }
  std::string string(const char* key) const {
    const json& v = require(key);
    if (!v.is_string()) fail(join(key), "must be a string");
    return v.get<std::string>();
  }
  std::string string_or(const char* key, std::string fallback) const {
    return has(key) ? string(key) : fallback;
  }
  bool boolean_or(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_boolean()) fail(join(key), "must be true or false");
    return v.get<bool>();
  }
  std::vector<double> numbers(const char* key) const {
    const json& v = require(key);
    if (!v.is_array()) fail(join(key), "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_number(v[i], join(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  std::vector<Fields> objects(const char* key) const {
    const json& v = require(key);
    if (!v.is_array()) fail(join(key), "must be an array of objects");
    std::vector<Fields> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.emplace_back(v[i], join(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ValidationError("config: field '" + path + "' " + what);
  }

 private:
  std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& require(const char* key) const {
    if (!has(key)) throw ValidationError("config: missing required field '" + join(key) + "'");
    return node_.at(key);
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "must be finite");
    return x;
  }
  static std::size_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
      fail(path, "must be a non-negative integer");
    return v.get<std::size_t>();
  }

  const json& node_;
  std::string path_;
};

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace dynalloc::detail

namespace dynalloc {
struct ObjectiveSpec;
struct MarketModel;
namespace detail {
ObjectiveSpec objective_from_fields(const Fields& f);
MarketModel model_from_fields(const Fields& f);
}  // namespace detail
}  // namespace dynalloc
