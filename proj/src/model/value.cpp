#include "model/value.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "common/error.hpp"

namespace modeladapt {

namespace {

constexpr std::int64_t kMicrosPerSecond = 1'000'000;
constexpr std::int64_t kMicrosPerDay = 86'400 * kMicrosPerSecond;

bool parse_digits(std::string_view text, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > text.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < count; ++i) {
    char c = text[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

bool valid_civil(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int limit = kDays[m - 1];
  bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m == 2 && leap) limit = 29;
  return d <= limit;
}

int type_rank(const Value::Storage& s) { return static_cast<int>(s.index()); }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const char* scalar_type_name(ScalarType type) noexcept {
  switch (type) {
    case ScalarType::Text: return "text";
    case ScalarType::Markdown: return "markdown";
    case ScalarType::Int: return "int";
    case ScalarType::Float: return "float";
    case ScalarType::Boolean: return "boolean";
    case ScalarType::Date: return "date";
    case ScalarType::Timestamp: return "timestamp";
  }
  return "text";
}

std::optional<ScalarType> parse_scalar_type(std::string_view name) noexcept {
  if (name == "text") return ScalarType::Text;
  if (name == "markdown") return ScalarType::Markdown;
  if (name == "int") return ScalarType::Int;
  if (name == "float") return ScalarType::Float;
  if (name == "boolean") return ScalarType::Boolean;
  if (name == "date") return ScalarType::Date;
  if (name == "timestamp") return ScalarType::Timestamp;
  return std::nullopt;
}

bool is_textual(ScalarType type) noexcept {
  return type == ScalarType::Text || type == ScalarType::Markdown;
}
bool is_numeric(ScalarType type) noexcept {
  return type == ScalarType::Int || type == ScalarType::Float;
}
bool is_temporal(ScalarType type) noexcept {
  return type == ScalarType::Date || type == ScalarType::Timestamp;
}

// Howard Hinnant's civil calendar algorithms.
std::int32_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int32_t>(era * 146097 + static_cast<std::int64_t>(doe) - 719468);
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) noexcept {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
}

std::optional<Date> parse_date(std::string_view text) noexcept {
  int y, m, d;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!parse_digits(text, 0, 4, y) || !parse_digits(text, 5, 2, m) || !parse_digits(text, 8, 2, d))
    return std::nullopt;
  if (!valid_civil(y, m, d)) return std::nullopt;
  return Date{days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d))};
}

std::string format_date(Date date) {
  std::int64_t y;
  unsigned m, d;
  civil_from_days(date.days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) noexcept {
  if (text.size() < 19) return std::nullopt;
  auto date = parse_date(text.substr(0, 10));
  if (!date) return std::nullopt;
  if (text[10] != 'T' && text[10] != 't' && text[10] != ' ') return std::nullopt;
  int hh, mm, ss;
  if (!parse_digits(text, 11, 2, hh) || text[13] != ':' || !parse_digits(text, 14, 2, mm) ||
      text[16] != ':' || !parse_digits(text, 17, 2, ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  std::size_t pos = 19;
  std::int64_t frac = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 6) frac = frac * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int i = digits; i < 6; ++i) frac *= 10;
  }
  std::int64_t offset_seconds = 0;
  if (pos == text.size()) {
    // no zone designator: treat as UTC
  } else if (text[pos] == 'Z' || text[pos] == 'z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    int oh, om;
    int sign = text[pos] == '-' ? -1 : 1;
    if (!parse_digits(text, pos + 1, 2, oh)) return std::nullopt;
    std::size_t mpos = pos + 3;
    if (mpos < text.size() && text[mpos] == ':') ++mpos;
    if (!parse_digits(text, mpos, 2, om)) return std::nullopt;
    offset_seconds = sign * (oh * 3600 + om * 60);
    pos = mpos + 2;
  } else {
    return std::nullopt;
  }
  if (pos != text.size()) return std::nullopt;
  std::int64_t micros = static_cast<std::int64_t>(date->days) * kMicrosPerDay +
                        (static_cast<std::int64_t>(hh) * 3600 + mm * 60 + ss - offset_seconds) * kMicrosPerSecond +
                        frac;
  return Timestamp{micros};
}

std::string format_timestamp(Timestamp ts) {
  std::int64_t days = ts.micros / kMicrosPerDay;
  std::int64_t rem = ts.micros % kMicrosPerDay;
  if (rem < 0) {
    rem += kMicrosPerDay;
    --days;
  }
  std::int64_t secs = rem / kMicrosPerSecond;
  std::int64_t frac = rem % kMicrosPerSecond;
  std::string out = format_date(Date{static_cast<std::int32_t>(days)});
  char buf[48];
  std::snprintf(buf, sizeof buf, "T%02lld:%02lld:%02lld", static_cast<long long>(secs / 3600),
                static_cast<long long>((secs / 60) % 60), static_cast<long long>(secs % 60));
  out += buf;
  if (frac != 0) {
    std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(frac));
    out += buf;
  }
  out += 'Z';
  return out;
}

double Value::as_double() const {
  if (is_int()) return static_cast<double>(integer());
  if (is_float()) return real();
  return std::nan("");
}

std::strong_ordering compare(const Value& a, const Value& b) {
  const auto& x = a.v_;
  const auto& y = b.v_;
  bool xnum = a.is_int() || a.is_float();
  bool ynum = b.is_int() || b.is_float();
  if (xnum && ynum && x.index() != y.index()) {
    double dx = a.as_double(), dy = b.as_double();
    if (dx < dy) return std::strong_ordering::less;
    if (dx > dy) return std::strong_ordering::greater;
    return a.is_int() ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  if (x.index() != y.index()) return type_rank(x) <=> type_rank(y);
  switch (x.index()) {
    case 0: return std::strong_ordering::equal;
    case 1: {
      int c = std::get<std::string>(x).compare(std::get<std::string>(y));
      return c < 0 ? std::strong_ordering::less : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
    }
    case 2: return std::get<std::int64_t>(x) <=> std::get<std::int64_t>(y);
    case 3: {
      double dx = std::get<double>(x), dy = std::get<double>(y);
      if (dx < dy) return std::strong_ordering::less;
      if (dx > dy) return std::strong_ordering::greater;
      return std::strong_ordering::equal;
    }
    case 4: return std::get<bool>(x) <=> std::get<bool>(y);
    case 5: return std::get<Date>(x) <=> std::get<Date>(y);
    case 6: return std::get<Timestamp>(x) <=> std::get<Timestamp>(y);
  }
  return std::strong_ordering::equal;
}

std::string Value::key() const {
  switch (v_.index()) {
    case 0: return "\x01null";
    case 1: return "s:" + text();
    case 2: return "i:" + std::to_string(integer());
    case 3: {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, real());
      return "f:" + std::string(buf, res.ptr);
    }
    case 4: return boolean() ? "b:1" : "b:0";
    case 5: return "d:" + format_date(date());
    case 6: return "t:" + std::to_string(timestamp().micros);
  }
  return {};
}

bool value_matches(const Value& v, ScalarType type) noexcept {
  if (v.is_null()) return true;
  switch (type) {
    case ScalarType::Text:
    case ScalarType::Markdown: return v.is_text();
    case ScalarType::Int: return v.is_int();
    case ScalarType::Float: return v.is_float();
    case ScalarType::Boolean: return v.is_bool();
    case ScalarType::Date: return v.is_date();
    case ScalarType::Timestamp: return v.is_timestamp();
  }
  return false;
}

Value value_from_json(const json& j, ScalarType type, const std::string& location) {
  auto fail = [&]() -> Value {
    throw ConstraintError("type", "value " + j.dump() + " is not a valid " + scalar_type_name(type), location);
  };
  if (j.is_null()) return Value{};
  switch (type) {
    case ScalarType::Text:
    case ScalarType::Markdown:
      if (j.is_string()) return Value{j.get<std::string>()};
      return fail();
    case ScalarType::Int:
      if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
      if (j.is_number_float()) {
        double d = j.get<double>();
        if (std::floor(d) == d && std::fabs(d) < 9.0e15) return Value{static_cast<std::int64_t>(d)};
      }
      if (j.is_string()) return value_from_text(j.get<std::string>(), type, location);
      return fail();
    case ScalarType::Float:
      if (j.is_number()) return Value{j.get<double>()};
      if (j.is_string()) return value_from_text(j.get<std::string>(), type, location);
      return fail();
    case ScalarType::Boolean:
      if (j.is_boolean()) return Value{j.get<bool>()};
      return fail();
    case ScalarType::Date:
      if (j.is_string()) {
        if (auto d = parse_date(j.get<std::string>())) return Value{*d};
      }
      return fail();
    case ScalarType::Timestamp:
      if (j.is_string()) {
        if (auto t = parse_timestamp(j.get<std::string>())) return Value{*t};
      }
      return fail();
  }
  return fail();
}

Value value_from_text(std::string_view raw, ScalarType type, const std::string& location) {
  auto fail = [&]() -> Value {
    throw ConstraintError("type", "text '" + std::string(raw) + "' is not a valid " + scalar_type_name(type),
                          location);
  };
  if (is_textual(type)) return raw.empty() ? Value{} : Value{std::string(raw)};
  std::string text = trim(raw);
  if (text.empty()) return Value{};
  switch (type) {
    case ScalarType::Int: {
      std::int64_t n = 0;
      auto res = std::from_chars(text.data(), text.data() + text.size(), n);
      if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return fail();
      return Value{n};
    }
    case ScalarType::Float: {
      double d = 0;
      auto res = std::from_chars(text.data(), text.data() + text.size(), d);
      if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(d)) return fail();
      return Value{d};
    }
    case ScalarType::Boolean:
      if (text == "true" || text == "t" || text == "TRUE" || text == "True") return Value{true};
      if (text == "false" || text == "f" || text == "FALSE" || text == "False") return Value{false};
      return fail();
    case ScalarType::Date:
      if (auto d = parse_date(text)) return Value{*d};
      return fail();
    case ScalarType::Timestamp:
      if (auto t = parse_timestamp(text)) return Value{*t};
      return fail();
    default: break;
  }
  return fail();
}

json value_to_json(const Value& v) {
  switch (v.storage().index()) {
    case 0: return nullptr;
    case 1: return v.text();
    case 2: return v.integer();
    case 3: return v.real();
    case 4: return v.boolean();
    case 5: return format_date(v.date());
    case 6: return format_timestamp(v.timestamp());
  }
  return nullptr;
}

}  // namespace modeladapt
