#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace feedrec {

// Flat key=value settings. Blank lines and lines starting with '#' are
// ignored; later assignments win. Typed getters throw std::invalid_argument
// naming the key when a value does not parse.
class Config {
 public:
  static Config parse(std::istream& in, std::string_view source = "<config>");
  // Throws MissingInput when the file cannot be opened.
  static Config load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  // "key=value"
  void apply_override(std::string_view assignment);

  bool has(std::string_view key) const;
  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  const std::map<std::string, std::string, std::less<>>& entries() const { return values_; }
  // Keys that were set but never read, usually typos.
  std::vector<std::string> unused_keys() const;

  void write(std::ostream& out) const;

 private:
  const std::string* find(std::string_view key) const;

  std::map<std::string, std::string, std::less<>> values_;
  mutable std::set<std::string, std::less<>> used_;
};

}  // namespace feedrec
