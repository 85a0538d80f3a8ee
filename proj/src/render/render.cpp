#include "render/render.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <optional>

#include "common/error.hpp"

namespace modeladapt {

// ---------------------------------------------------------------------------
// Values

namespace {

std::string group_thousands(std::int64_t n) {
  unsigned long long magnitude =
      n < 0 ? static_cast<unsigned long long>(-(n + 1)) + 1ULL : static_cast<unsigned long long>(n);
  std::string digits = std::to_string(magnitude);
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count && count % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++count;
  }
  if (n < 0) out.push_back('-');
  return {out.rbegin(), out.rend()};
}

std::string shortest_double(double d) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

std::string format_minutes(Timestamp ts) {
  constexpr std::int64_t kDay = 86400LL * 1000000LL;
  std::int64_t days = ts.micros / kDay;
  std::int64_t rem = ts.micros % kDay;
  if (rem < 0) {
    rem += kDay;
    --days;
  }
  std::int64_t minutes = rem / 60000000LL;
  char buf[16];
  std::snprintf(buf, sizeof buf, " %02d:%02d", static_cast<int>(minutes / 60), static_cast<int>(minutes % 60));
  return format_date(Date{static_cast<std::int32_t>(days)}) + buf;
}

}  // namespace

std::string format_value(const Value& v) {
  if (v.is_null()) return "";
  if (v.is_text()) return v.text();
  if (v.is_int()) return group_thousands(v.integer());
  if (v.is_float()) return shortest_double(v.real());
  if (v.is_bool()) return v.boolean() ? "true" : "false";
  if (v.is_date()) return format_date(v.date());
  return format_minutes(v.timestamp());
}

std::string format_value(const Value& v, ScalarType type) {
  if (v.is_null()) return "";
  if (type == ScalarType::Float && v.is_int()) return shortest_double(static_cast<double>(v.integer()));
  return format_value(v);
}

std::string escape_markdown(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\\': case '`': case '*': case '_': case '[': case ']': case '(': case ')': case '#':
        out.push_back('\\');
        [[fallthrough]];
      default: out.push_back(c);
    }
  }
  return out;
}

std::string escape_html(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Templates

struct Template::Node {
  enum class Kind { Text, Var, Raw, Section, Inverted };
  Kind kind = Kind::Text;
  std::string text;
  std::vector<Node> children;
};

namespace {

using Node = Template::Node;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  if (name == ".") return true;
  for (char c : name)
    if (c == '{' || c == '}' || c == ' ' || c == '#' || c == '^' || c == '/') return false;
  return true;
}

std::vector<Node> parse_nodes(std::string_view src, std::size_t& pos, const std::string* closing) {
  std::vector<Node> out;
  std::string text;
  auto flush = [&] {
    if (!text.empty()) out.push_back(Node{Node::Kind::Text, std::move(text), {}});
    text.clear();
  };
  while (pos < src.size()) {
    std::size_t open = src.find("{{", pos);
    if (open == std::string_view::npos) {
      text.append(src.substr(pos));
      pos = src.size();
      break;
    }
    text.append(src.substr(pos, open - pos));
    if (src.compare(open, 3, "{{{") == 0) {
      std::size_t close = src.find("}}}", open + 3);
      if (close == std::string_view::npos) throw ParseError("unterminated {{{ tag", "template@" + std::to_string(open));
      std::string name = trim(src.substr(open + 3, close - open - 3));
      if (!valid_name(name)) throw ParseError("invalid variable name", "template@" + std::to_string(open));
      flush();
      out.push_back(Node{Node::Kind::Raw, name, {}});
      pos = close + 3;
      continue;
    }
    std::size_t close = src.find("}}", open + 2);
    if (close == std::string_view::npos) throw ParseError("unterminated {{ tag", "template@" + std::to_string(open));
    std::string body = trim(src.substr(open + 2, close - open - 2));
    pos = close + 2;
    if (body.empty()) throw ParseError("empty tag", "template@" + std::to_string(open));
    char sigil = body.front();
    if (sigil == '!') continue;
    if (sigil == '#' || sigil == '^') {
      std::string name = trim(std::string_view(body).substr(1));
      if (!valid_name(name)) throw ParseError("invalid section name", "template@" + std::to_string(open));
      flush();
      Node n{sigil == '#' ? Node::Kind::Section : Node::Kind::Inverted, name, {}};
      n.children = parse_nodes(src, pos, &name);
      out.push_back(std::move(n));
      continue;
    }
    if (sigil == '/') {
      std::string name = trim(std::string_view(body).substr(1));
      if (!closing || *closing != name)
        throw ParseError("unbalanced closing tag '" + name + "'", "template@" + std::to_string(open));
      flush();
      return out;
    }
    if (sigil == '&') body = trim(std::string_view(body).substr(1));
    if (!valid_name(body)) throw ParseError("invalid variable name", "template@" + std::to_string(open));
    flush();
    out.push_back(Node{sigil == '&' ? Node::Kind::Raw : Node::Kind::Var, body, {}});
  }
  if (closing) throw ParseError("unclosed section '" + *closing + "'", "template");
  flush();
  return out;
}

const json* lookup(const std::vector<const json*>& stack, const std::string& name) {
  if (name == ".") return stack.back();
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = name.find('.', start);
    parts.push_back(name.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  const json* found = nullptr;
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
    if ((*it)->is_object()) {
      auto f = (*it)->find(parts[0]);
      if (f != (*it)->end()) {
        found = &*f;
        break;
      }
    }
  }
  for (std::size_t i = 1; found && i < parts.size(); ++i) {
    if (!found->is_object()) return nullptr;
    auto f = found->find(parts[i]);
    found = f == found->end() ? nullptr : &*f;
  }
  return found;
}

bool truthy(const json* v) {
  if (!v || v->is_null()) return false;
  if (v->is_boolean()) return v->get<bool>();
  if (v->is_string()) return !v->get_ref<const std::string&>().empty();
  if (v->is_array()) return !v->empty();
  return true;
}

std::string to_text(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) return shortest_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += ", ";
      out += to_text(e);
    }
    return out;
  }
  return "";
}

void render_nodes(const std::vector<Node>& nodes, std::vector<const json*>& stack, std::string& out) {
  for (const auto& n : nodes) {
    switch (n.kind) {
      case Node::Kind::Text: out += n.text; break;
      case Node::Kind::Var:
        if (const json* v = lookup(stack, n.text)) out += escape_markdown(to_text(*v));
        break;
      case Node::Kind::Raw:
        if (const json* v = lookup(stack, n.text)) out += to_text(*v);
        break;
      case Node::Kind::Section: {
        const json* v = lookup(stack, n.text);
        if (!truthy(v)) break;
        if (v->is_array()) {
          for (const auto& item : *v) {
            stack.push_back(&item);
            render_nodes(n.children, stack, out);
            stack.pop_back();
          }
        } else {
          stack.push_back(v);
          render_nodes(n.children, stack, out);
          stack.pop_back();
        }
        break;
      }
      case Node::Kind::Inverted:
        if (!truthy(lookup(stack, n.text))) render_nodes(n.children, stack, out);
        break;
    }
  }
}

void collect_names(const std::vector<Node>& nodes, std::vector<std::string>& out) {
  for (const auto& n : nodes) {
    if (n.kind == Node::Kind::Text) continue;
    std::string head = n.text.substr(0, n.text.find('.'));
    if (!head.empty() && std::find(out.begin(), out.end(), head) == out.end()) out.push_back(head);
    collect_names(n.children, out);
  }
}

}  // namespace

Template Template::parse(std::string_view source) {
  Template t;
  t.source_ = std::string(source);
  std::size_t pos = 0;
  t.nodes_ = std::make_shared<const std::vector<Node>>(parse_nodes(t.source_, pos, nullptr));
  return t;
}

std::string Template::render(const json& bindings) const {
  std::string out;
  std::vector<const json*> stack{&bindings};
  if (nodes_) render_nodes(*nodes_, stack, out);
  return out;
}

std::vector<std::string> Template::referenced_names() const {
  std::vector<std::string> out;
  if (nodes_) collect_names(*nodes_, out);
  return out;
}

std::string render_template(std::string_view source, const json& bindings) {
  return Template::parse(source).render(bindings);
}

// ---------------------------------------------------------------------------
// Markdown

bool is_safe_url(std::string_view url) {
  std::size_t colon = url.find(':');
  std::size_t stop = url.find_first_of("/?#");
  if (colon == std::string_view::npos || (stop != std::string_view::npos && stop < colon)) return true;
  std::string scheme;
  for (char c : url.substr(0, colon)) scheme.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return scheme == "http" || scheme == "https" || scheme == "mailto" || scheme == "ftp";
}

namespace {

bool is_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string render_inline(std::string_view s);

// Parses "[text](url)" starting at s[i] == '['. Returns end index past ')'.
std::optional<std::size_t> parse_link(std::string_view s, std::size_t i, std::string_view& text, std::string_view& url) {
  int depth = 0;
  std::size_t j = i;
  for (; j < s.size(); ++j) {
    if (s[j] == '\\') {
      ++j;
      continue;
    }
    if (s[j] == '[') ++depth;
    if (s[j] == ']' && --depth == 0) break;
  }
  if (j >= s.size() || j + 1 >= s.size() || s[j + 1] != '(') return std::nullopt;
  std::size_t k = j + 2;
  int parens = 1;
  for (; k < s.size(); ++k) {
    if (s[k] == '(') ++parens;
    if (s[k] == ')' && --parens == 0) break;
    if (s[k] == ' ' || s[k] == '\n') return std::nullopt;
  }
  if (k >= s.size()) return std::nullopt;
  text = s.substr(i + 1, j - i - 1);
  url = s.substr(j + 2, k - j - 2);
  return k + 1;
}

std::optional<std::size_t> find_closing(std::string_view s, std::size_t from, char d, std::size_t n) {
  for (std::size_t j = from; j + n <= s.size(); ++j) {
    if (s[j] == '\\') {
      ++j;
      continue;
    }
    if (s[j] == '`') {
      std::size_t end = s.find('`', j + 1);
      if (end != std::string_view::npos) j = end;
      continue;
    }
    if (s[j] != d) continue;
    std::size_t run = 0;
    while (j + run < s.size() && s[j + run] == d) ++run;
    bool matches = n == 2 ? run >= 2 : run == 1;
    if (matches && j > from && s[j - 1] != ' ' && !(d == '_' && j + n < s.size() && is_alnum(s[j + n]))) return j;
    j += run - 1;
  }
  return std::nullopt;
}

std::string safe_href(std::string_view url) { return is_safe_url(url) ? escape_html(url) : std::string("#"); }

std::string render_inline(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size() && is_punct(s[i + 1])) {
      out += escape_html(s.substr(i + 1, 1));
      i += 2;
      continue;
    }
    if (c == '`') {
      std::size_t end = s.find('`', i + 1);
      if (end != std::string_view::npos) {
        out += "<code>" + escape_html(s.substr(i + 1, end - i - 1)) + "</code>";
        i = end + 1;
        continue;
      }
    }
    if (c == '!' && i + 1 < s.size() && s[i + 1] == '[') {
      std::string_view text, url;
      if (auto end = parse_link(s, i + 1, text, url)) {
        out += "<img src=\"" + safe_href(url) + "\" alt=\"" + escape_html(text) + "\">";
        i = *end;
        continue;
      }
    }
    if (c == '[') {
      std::string_view text, url;
      if (auto end = parse_link(s, i, text, url)) {
        out += "<a href=\"" + safe_href(url) + "\">" + render_inline(text) + "</a>";
        i = *end;
        continue;
      }
    }
    if (c == '*' || c == '_') {
      bool left_ok = !(c == '_' && i > 0 && is_alnum(s[i - 1]));
      std::size_t run = 0;
      while (i + run < s.size() && s[i + run] == c) ++run;
      std::size_t n = run >= 2 ? 2 : 1;
      if (left_ok && i + n < s.size() && s[i + n] != ' ') {
        if (auto close = find_closing(s, i + n, c, n)) {
          const char* tag = n == 2 ? "strong" : "em";
          out += std::string("<") + tag + ">" + render_inline(s.substr(i + n, *close - i - n)) + "</" + tag + ">";
          i = *close + n;
          continue;
        }
      }
      out.append(run, c);
      i += run;
      continue;
    }
    out += escape_html(s.substr(i, 1));
    ++i;
  }
  return out;
}

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Iframe {
  std::string caption, url, width, height, cls;
};

// "::: iframe [caption](url){width=.. height=.. class=..}" or ":::iframe ...".
std::optional<Iframe> parse_iframe_open(std::string_view line) {
  line = trim_view(line);
  if (line.substr(0, 3) != ":::") return std::nullopt;
  line = trim_view(line.substr(3));
  if (line.substr(0, 6) != "iframe") return std::nullopt;
  line = trim_view(line.substr(6));
  if (line.empty() || line.front() != '[') return std::nullopt;
  std::string_view text, url;
  auto end = parse_link(line, 0, text, url);
  if (!end || url.empty() || !is_safe_url(url)) return std::nullopt;
  Iframe f;
  f.caption = std::string(text);
  f.url = std::string(url);
  std::string_view rest = trim_view(line.substr(*end));
  if (!rest.empty()) {
    if (rest.front() != '{' || rest.back() != '}') return std::nullopt;
    rest = rest.substr(1, rest.size() - 2);
    std::size_t p = 0;
    while (p < rest.size()) {
      while (p < rest.size() && rest[p] == ' ') ++p;
      if (p >= rest.size()) break;
      std::size_t eq = rest.find('=', p);
      if (eq == std::string_view::npos) return std::nullopt;
      std::string key(trim_view(rest.substr(p, eq - p)));
      std::size_t v = eq + 1;
      std::string value;
      if (v < rest.size() && (rest[v] == '"' || rest[v] == '\'')) {
        std::size_t q = rest.find(rest[v], v + 1);
        if (q == std::string_view::npos) return std::nullopt;
        value = std::string(rest.substr(v + 1, q - v - 1));
        p = q + 1;
      } else {
        std::size_t sp = rest.find(' ', v);
        if (sp == std::string_view::npos) sp = rest.size();
        value = std::string(rest.substr(v, sp - v));
        p = sp;
      }
      if (key == "width") f.width = value;
      else if (key == "height") f.height = value;
      else if (key == "class") f.cls = value;
    }
  }
  return f;
}

std::string render_iframe(const Iframe& f) {
  std::string url = escape_html(f.url);
  std::string out = "<figure class=\"embed\"><figcaption><a href=\"" + url + "\" target=\"_blank\">" +
                    render_inline(f.caption) + "</a></figcaption><iframe src=\"" + url + "\"";
  if (!f.width.empty()) out += " width=\"" + escape_html(f.width) + "\"";
  if (!f.height.empty()) out += " height=\"" + escape_html(f.height) + "\"";
  if (!f.cls.empty()) out += " class=\"" + escape_html(f.cls) + "\"";
  out += "></iframe></figure>";
  return out;
}

bool is_bullet(std::string_view line, std::string_view& content) {
  std::string_view t = trim_view(line);
  if (t.size() >= 2 && (t[0] == '-' || t[0] == '*' || t[0] == '+') && t[1] == ' ') {
    content = trim_view(t.substr(2));
    return true;
  }
  return false;
}

bool is_ordered(std::string_view line, std::string_view& content) {
  std::string_view t = trim_view(line);
  std::size_t d = 0;
  while (d < t.size() && std::isdigit(static_cast<unsigned char>(t[d]))) ++d;
  if (d == 0 || d > 9 || d + 1 >= t.size() || t[d] != '.' || t[d + 1] != ' ') return false;
  content = trim_view(t.substr(d + 2));
  return true;
}

int heading_level(std::string_view line, std::string_view& content) {
  std::size_t n = 0;
  while (n < line.size() && line[n] == '#') ++n;
  if (n == 0 || n > 6 || (n < line.size() && line[n] != ' ')) return 0;
  content = trim_view(line.substr(n));
  return static_cast<int>(n);
}

}  // namespace

std::string markdown_to_html(std::string_view markdown) {
  std::vector<std::string_view> lines;
  for (std::size_t p = 0; p <= markdown.size();) {
    std::size_t nl = markdown.find('\n', p);
    if (nl == std::string_view::npos) {
      lines.push_back(markdown.substr(p));
      break;
    }
    lines.push_back(markdown.substr(p, nl - p));
    p = nl + 1;
  }

  std::vector<std::string> blocks;
  std::size_t paragraphs = 0;
  std::string paragraph_inline;
  std::vector<std::string_view> para;
  auto flush_para = [&] {
    if (para.empty()) return;
    std::string joined;
    for (std::size_t k = 0; k < para.size(); ++k) {
      if (k) joined += "\n";
      joined += std::string(trim_view(para[k]));
    }
    paragraph_inline = render_inline(joined);
    blocks.push_back("<p>" + paragraph_inline + "</p>");
    ++paragraphs;
    para.clear();
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    std::string_view t = trim_view(line);
    std::string_view content;
    if (t.empty()) {
      flush_para();
      continue;
    }
    if (auto f = parse_iframe_open(t)) {
      std::size_t j = i + 1;
      while (j < lines.size() && trim_view(lines[j]).empty()) ++j;
      if (j < lines.size() && trim_view(lines[j]) == ":::") {
        flush_para();
        blocks.push_back(render_iframe(*f));
        i = j;
        continue;
      }
    }
    if (t.substr(0, 3) == "```") {
      std::size_t j = i + 1;
      while (j < lines.size() && trim_view(lines[j]).substr(0, 3) != "```") ++j;
      if (j < lines.size()) {
        flush_para();
        std::string code;
        for (std::size_t k = i + 1; k < j; ++k) code += std::string(lines[k]) + "\n";
        blocks.push_back("<pre><code>" + escape_html(code) + "</code></pre>");
        i = j;
        continue;
      }
    }
    if (int level = heading_level(t, content)) {
      flush_para();
      std::string tag = "h" + std::to_string(level);
      blocks.push_back("<" + tag + ">" + render_inline(content) + "</" + tag + ">");
      continue;
    }
    bool bullet = is_bullet(t, content);
    if (bullet || is_ordered(t, content)) {
      flush_para();
      const char* tag = bullet ? "ul" : "ol";
      std::string html = std::string("<") + tag + ">";
      std::size_t j = i;
      for (; j < lines.size(); ++j) {
        std::string_view item;
        if (!(bullet ? is_bullet(lines[j], item) : is_ordered(lines[j], item))) break;
        html += "<li>" + render_inline(item) + "</li>";
      }
      html += std::string("</") + tag + ">";
      blocks.push_back(html);
      i = j - 1;
      continue;
    }
    para.push_back(line);
  }
  flush_para();

  if (blocks.size() == 1 && paragraphs == 1) return paragraph_inline;
  std::string out;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (k) out += "\n";
    out += blocks[k];
  }
  return out;
}

}  // namespace modeladapt
