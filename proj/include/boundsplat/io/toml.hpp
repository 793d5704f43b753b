#pragma once

#include "boundsplat/core/errors.hpp"

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace boundsplat::io {

// A small TOML subset: [tables], key = value, # comments. Values are numbers,
// booleans, basic strings ("..." with \" \\ \n \t escapes) and flat arrays of
// numbers or strings. Keys may contain dots; they are taken literally.

struct TomlValue {
    using Array = std::vector<std::variant<double, std::string>>;
    std::variant<double, bool, std::string, Array> v;
    int line = 0;

    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_array() const { return std::holds_alternative<Array>(v); }
};

/// Flattened "table.key" -> value, in file order.
using TomlDocument = std::vector<std::pair<std::string, TomlValue>>;

namespace toml_detail {

inline bool bare_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
}

class Cursor {
public:
    Cursor(const std::string& s, int line, std::string source) : s_(s), line_(line), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(source_ + ":" + std::to_string(line_) + ": " + msg);
    }
    void skip_ws() {
        while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
    }
    bool at_end_or_comment() {
        skip_ws();
        return i_ >= s_.size() || s_[i_] == '#';
    }
    char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
    bool eat(char c) {
        skip_ws();
        if (peek() != c) return false;
        ++i_;
        return true;
    }
    void expect(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "'");
    }

    std::string key() {
        skip_ws();
        if (peek() == '"') return string();
        const std::size_t b = i_;
        while (i_ < s_.size() && bare_char(s_[i_])) ++i_;
        if (b == i_) fail("expected a key");
        return s_.substr(b, i_ - b);
    }

    std::string string() {
        expect('"');
        std::string out;
        while (i_ < s_.size() && s_[i_] != '"') {
            char c = s_[i_++];
            if (c == '\\') {
                if (i_ >= s_.size()) break;
                const char e = s_[i_++];
                switch (e) {
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                default: fail(std::string("unsupported escape '\\") + e + "'");
                }
            }
            out.push_back(c);
        }
        if (i_ >= s_.size()) fail("unterminated string");
        ++i_;
        return out;
    }

    double number() {
        skip_ws();
        const std::size_t b = i_;
        while (i_ < s_.size() && (bare_char(s_[i_]) || s_[i_] == '+')) ++i_;
        std::string tok = s_.substr(b, i_ - b);
        std::erase(tok, '_');
        if (tok == "inf" || tok == "+inf" || tok == "-inf" || tok == "nan")
            fail("non-finite number '" + tok + "' is not allowed");
        double v = 0.0;
        const char* first = tok.data() + (tok.starts_with('+') ? 1 : 0);
        const auto r = std::from_chars(first, tok.data() + tok.size(), v);
        if (tok.empty() || r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) fail("bad value '" + tok + "'");
        return v;
    }

    TomlValue value() {
        skip_ws();
        TomlValue out;
        out.line = line_;
        const char c = peek();
        if (c == '"') {
            out.v = string();
        } else if (c == '[') {
            ++i_;
            TomlValue::Array arr;
            while (!eat(']')) {
                skip_ws();
                if (peek() == '"') arr.emplace_back(string());
                else arr.emplace_back(number());
                if (!eat(',')) {
                    expect(']');
                    break;
                }
            }
            out.v = std::move(arr);
        } else if (s_.compare(i_, 4, "true") == 0 && !bare_char(s_.size() > i_ + 4 ? s_[i_ + 4] : ' ')) {
            i_ += 4;
            out.v = true;
        } else if (s_.compare(i_, 5, "false") == 0 && !bare_char(s_.size() > i_ + 5 ? s_[i_ + 5] : ' ')) {
            i_ += 5;
            out.v = false;
        } else {
            out.v = number();
        }
        return out;
    }

private:
    const std::string& s_;
    std::size_t i_ = 0;
    int line_;
    std::string source_;
};

} // namespace toml_detail

inline TomlDocument parse_toml(const std::string& text, const std::string& source = "config") {
    TomlDocument doc;
    std::map<std::string, int> seen;
    std::string table;
    std::istringstream in(text);
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        toml_detail::Cursor c(line, n, source);
        if (c.at_end_or_comment()) continue;
        if (c.eat('[')) {
            table = c.key();
            c.expect(']');
            if (!c.at_end_or_comment()) c.fail("unexpected text after table header");
            continue;
        }
        const std::string key = c.key();
        c.expect('=');
        TomlValue v = c.value();
        if (!c.at_end_or_comment()) c.fail("unexpected text after value");
        const std::string full = table.empty() ? key : table + "." + key;
        if (const auto it = seen.find(full); it != seen.end())
            c.fail("duplicate key '" + full + "' (first set on line " + std::to_string(it->second) + ")");
        seen[full] = n;
        doc.emplace_back(full, std::move(v));
    }
    return doc;
}

/// Parses the right-hand side of a command-line override ("key=value").
inline TomlValue parse_toml_value(const std::string& text, const std::string& source = "override") {
    toml_detail::Cursor c(text, 1, source);
    TomlValue v = c.value();
    if (!c.at_end_or_comment()) c.fail("unexpected text after value");
    return v;
}

/// Quotes a string for output.
inline std::string toml_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') out += "\\n";
        else if (c == '\t') out += "\\t";
        else out += c;
    }
    return out + "\"";
}

} // namespace boundsplat::io
