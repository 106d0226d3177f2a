#include "mz/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mz/sha1.hpp"

namespace mz {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

Config Config::parse(std::string_view text) {
  Config cfg;
  std::string section;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail("config line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty())
        fail("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty())
      fail("config line " + std::to_string(lineno) + ": empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (cfg.kv_.count(full))
      fail("config line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
    cfg.kv_[full] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Config::get_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) fail("missing config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string s = get_str(key);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    fail("config key '" + key + "': expected a number, got '" + s + "'");
  return v;
}

long long Config::get_int(const std::string& key) const {
  const std::string s = get_str(key);
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    // Accept scientific notation for counts (1e5) when integral.
    double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || d != static_cast<double>(static_cast<long long>(d)))
      fail("config key '" + key + "': expected an integer, got '" + s + "'");
    v = static_cast<long long>(d);
  }
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const std::string s = get_str(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail("config key '" + key + "': expected a boolean, got '" + s + "'");
}

std::string Config::get_str_or(const std::string& key, const std::string& fb) const {
  return has(key) ? get_str(key) : fb;
}
double Config::get_double_or(const std::string& key, double fb) const {
  return has(key) ? get_double(key) : fb;
}
long long Config::get_int_or(const std::string& key, long long fb) const {
  return has(key) ? get_int(key) : fb;
}
bool Config::get_bool_or(const std::string& key, bool fb) const {
  return has(key) ? get_bool(key) : fb;
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

std::vector<std::string> Config::keys_under(const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : kv_)
    if (k.rfind(p, 0) == 0) out.push_back(k);
  return out;
}

void Config::validate_keys(const std::vector<std::string>& allowed,
                           const std::vector<std::string>& allowed_prefixes) const {
  for (const auto& [k, v] : kv_) {
    if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) continue;
    bool ok = false;
    for (const auto& p : allowed_prefixes) {
      if (k.rfind(p + ".", 0) == 0) {
        ok = true;
        break;
      }
    }
    if (!ok) fail("unknown config key '" + k + "'");
  }
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

std::string Config::hash() const { return sha1_hex(canonical()); }

}  // namespace mz
