#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace modeladapt {

using json = nlohmann::json;

enum class ScalarType { Text, Markdown, Int, Float, Boolean, Date, Timestamp };

const char* scalar_type_name(ScalarType type) noexcept;
std::optional<ScalarType> parse_scalar_type(std::string_view name) noexcept;

bool is_textual(ScalarType type) noexcept;   // text, markdown
bool is_numeric(ScalarType type) noexcept;   // int, float
bool is_temporal(ScalarType type) noexcept;  // date, timestamp

/// Days since 1970-01-01.
struct Date {
  std::int32_t days = 0;
  auto operator<=>(const Date&) const = default;
};

/// Microseconds since 1970-01-01T00:00:00Z.
struct Timestamp {
  std::int64_t micros = 0;
  auto operator<=>(const Timestamp&) const = default;
};

std::int32_t days_from_civil(std::int64_t year, unsigned month, unsigned day) noexcept;
void civil_from_days(std::int64_t days, std::int64_t& year, unsigned& month, unsigned& day) noexcept;

/// Strict YYYY-MM-DD.
std::optional<Date> parse_date(std::string_view text) noexcept;
std::string format_date(Date date);

/// RFC 3339 with 'T' or ' ' separator, optional fraction, Z or +HH:MM offset.
std::optional<Timestamp> parse_timestamp(std::string_view text) noexcept;
/// RFC 3339 UTC: fraction emitted only when non-zero (microsecond precision).
std::string format_timestamp(Timestamp ts);

/// A typed scalar or null.
class Value {
 public:
  using Storage = std::variant<std::monostate, std::string, std::int64_t, double, bool, Date, Timestamp>;

  Value() = default;
  Value(std::string text) : v_(std::move(text)) {}
  Value(const char* text) : v_(std::string(text)) {}
  Value(std::int64_t n) : v_(n) {}
  Value(int n) : v_(static_cast<std::int64_t>(n)) {}
  Value(double d) : v_(d) {}
  Value(bool b) : v_(b) {}
  Value(Date d) : v_(d) {}
  Value(Timestamp t) : v_(t) {}

  bool is_null() const noexcept { return std::holds_alternative<std::monostate>(v_); }
  bool is_text() const noexcept { return std::holds_alternative<std::string>(v_); }
  bool is_int() const noexcept { return std::holds_alternative<std::int64_t>(v_); }
  bool is_float() const noexcept { return std::holds_alternative<double>(v_); }
  bool is_bool() const noexcept { return std::holds_alternative<bool>(v_); }
  bool is_date() const noexcept { return std::holds_alternative<Date>(v_); }
  bool is_timestamp() const noexcept { return std::holds_alternative<Timestamp>(v_); }

  const std::string& text() const { return std::get<std::string>(v_); }
  std::int64_t integer() const { return std::get<std::int64_t>(v_); }
  double real() const { return std::get<double>(v_); }
  bool boolean() const { return std::get<bool>(v_); }
  Date date() const { return std::get<Date>(v_); }
  Timestamp timestamp() const { return std::get<Timestamp>(v_); }

  /// Numeric view for int and float values.
  double as_double() const;

  const Storage& storage() const noexcept { return v_; }

  /// Total order: null < text < int < float < bool < date < timestamp, then by value.
  /// Int and float compare numerically with each other.
  friend std::strong_ordering compare(const Value& a, const Value& b);
  friend bool operator==(const Value& a, const Value& b) { return compare(a, b) == 0; }
  friend bool operator<(const Value& a, const Value& b) { return compare(a, b) < 0; }

  /// Canonical text used for hashing and logs.
  std::string key() const;

 private:
  Storage v_;
};

/// Coerce a JSON value to the column type. Throws ConstraintError("type").
Value value_from_json(const json& j, ScalarType type, const std::string& location = {});
/// Parse the textual (CSV) representation; empty text is null.
Value value_from_text(std::string_view text, ScalarType type, const std::string& location = {});
json value_to_json(const Value& v);

/// Whether a value carries the representation required by type.
bool value_matches(const Value& v, ScalarType type) noexcept;

}  // namespace modeladapt
