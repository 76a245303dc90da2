#include "feedrec/config.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "feedrec/errors.hpp"
#include "feedrec/trajectory_io.hpp"

namespace feedrec {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, const std::string& value, const char* kind) {
  throw std::invalid_argument("config key '" + std::string(key) + "': '" + value + "' is not " + kind);
}

}  // namespace

Config Config::parse(std::istream& in, std::string_view source) {
  Config c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(std::string(source) + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(t.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(std::string(source) + ":" + std::to_string(lineno) + ": empty key");
    c.set(std::string(key), std::string(trim(t.substr(eq + 1))));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot read config " + path.string());
  return parse(in, path.string());
}

void Config::set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty()) {
    throw std::invalid_argument("override '" + std::string(assignment) + "' is not key=value");
  }
  set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

const std::string* Config::find(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(std::string(key));
  return &it->second;
}

bool Config::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  const auto* v = find(key);
  return v ? *v : std::string(fallback);
}

double Config::get_double(std::string_view key, double fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  try {
    return parse_double(*v);
  } catch (const std::exception&) {
    bad_value(key, *v, "a number");
  }
}

std::uint64_t Config::get_u64(std::string_view key, std::uint64_t fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto* end = v->data() + v->size();
  const auto res = std::from_chars(v->data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, *v, "a nonnegative integer");
  return out;
}

std::size_t Config::get_size(std::string_view key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  bad_value(key, *v, "a boolean");
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.contains(k)) out.push_back(k);
  }
  return out;
}

void Config::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
}

}  // namespace feedrec
