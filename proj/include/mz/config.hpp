#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mz {

// Structured text configuration: `[section.sub]` headers and `key = value`
// lines become a flat map with dotted keys ("section.sub.key"). Lines starting
// with '#' and blank lines are ignored. Keys are unique; redefinition throws.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  // Typed getters; throw std::runtime_error naming the key when missing or
  // not convertible. The *_or forms return the fallback when absent.
  std::string get_str(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_str_or(const std::string& key, const std::string& fb) const;
  double get_double_or(const std::string& key, double fb) const;
  long long get_int_or(const std::string& key, long long fb) const;
  bool get_bool_or(const std::string& key, bool fb) const;

  void set(const std::string& key, const std::string& value);

  // All keys under `prefix.` (prefix given without the trailing dot).
  std::vector<std::string> keys_under(const std::string& prefix) const;

  // Throws naming the first key not present in `allowed` (exact match) and
  // not under any prefix in `allowed_prefixes`.
  void validate_keys(const std::vector<std::string>& allowed,
                     const std::vector<std::string>& allowed_prefixes = {}) const;

  // Sorted `key = value` lines, one per key; the canonical form that the
  // content hash is computed over.
  std::string canonical() const;
  std::string hash() const;  // SHA-1 of canonical()

  const std::map<std::string, std::string>& items() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace mz
