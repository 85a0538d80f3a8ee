#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "model/value.hpp"

namespace modeladapt {

/// Display text for a value: thousands-separated ints, shortest round-trip
/// floats, YYYY-MM-DD dates, "YYYY-MM-DD HH:MM" UTC timestamps, "" for null.
std::string format_value(const Value& value, ScalarType type);
std::string format_value(const Value& value);

/// Backslash-escapes \ ` * _ [ ] ( ) #.
std::string escape_markdown(std::string_view text);

/// Escapes & < > " '.
std::string escape_html(std::string_view text);

/// Mustache subset: {{x}}, {{{x}}}, {{#x}}..{{/x}}, {{^x}}..{{/x}}, {{! comment}},
/// dotted paths, "." for the current item.
class Template {
 public:
  struct Node;

  /// Throws ParseError on unbalanced or malformed tags.
  static Template parse(std::string_view source);

  /// Unknown names render as "". Bindings are a JSON object.
  std::string render(const json& bindings) const;

  const std::string& source() const { return source_; }
  /// Top-level names referenced by the template (first path segment).
  std::vector<std::string> referenced_names() const;

 private:
  std::string source_;
  std::shared_ptr<const std::vector<Node>> nodes_;
};

std::string render_template(std::string_view source, const json& bindings);

/// Whether a URL uses an allowed scheme (http, https, mailto, ftp) or is relative.
bool is_safe_url(std::string_view url);

/// Safe HTML subset. All input text is escaped; tags come only from markdown
/// constructs. A document that is a single paragraph renders without <p>.
std::string markdown_to_html(std::string_view markdown);

}  // namespace modeladapt
