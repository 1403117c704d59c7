#include "asyncsl/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace asyncsl {

int Config::var_index(std::string_view name) const {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i] == name) return static_cast<int>(i);
  return -1;
}

int Config::lock_index(std::string_view name) const {
  for (std::size_t i = 0; i < locks.size(); ++i)
    if (locks[i] == name) return static_cast<int>(i);
  return -1;
}

int Config::location_index(int loc) const {
  for (std::size_t i = 0; i < locations.size(); ++i)
    if (locations[i] == loc) return static_cast<int>(i);
  return -1;
}

int Config::value_index(int v) const {
  auto it = std::lower_bound(values.begin(), values.end(), v);
  if (it == values.end() || *it != v) return -1;
  return static_cast<int>(it - values.begin());
}

int Config::wrap(long long raw) const {
  long long n = static_cast<long long>(values.size());
  long long i = ((raw % n) + n) % n;
  return values[static_cast<std::size_t>(i)];
}

void validate(const Config& cfg) {
  if (cfg.values.empty()) throw ConfigError("value domain is empty");
  if (!std::is_sorted(cfg.values.begin(), cfg.values.end()))
    throw ConfigError("values must be sorted");
  if (std::adjacent_find(cfg.values.begin(), cfg.values.end()) !=
      cfg.values.end())
    throw ConfigError("values must be distinct");
  std::set<std::string> names(cfg.vars.begin(), cfg.vars.end());
  if (names.size() != cfg.vars.size())
    throw ConfigError("variable names must be distinct");
  std::set<std::string> lnames(cfg.locks.begin(), cfg.locks.end());
  if (lnames.size() != cfg.locks.size())
    throw ConfigError("lock names must be distinct");
  for (auto& n : cfg.vars)
    if (n.empty() || lnames.count(n))
      throw ConfigError("variable name empty or clashes with a lock");
  std::set<int> locs(cfg.locations.begin(), cfg.locations.end());
  if (locs.size() != cfg.locations.size())
    throw ConfigError("locations must be distinct");
  for (int l : cfg.locations)
    if (cfg.value_index(l) < 0)
      throw ConfigError(
          "every location must also be a value (allocation stores it)");
  if (cfg.cell_count() > 64)
    throw ConfigError("too many memory cells for the footprint mask");
  if (cfg.locks.size() > 32) throw ConfigError("too many locks");
  if (cfg.perm_denominator < 1 || cfg.perm_denominator > 64)
    throw ConfigError("permission denominator out of range");
}

Config default_config() {
  Config cfg;
  cfg.vars = {"x", "y"};
  cfg.values = {0, 1, 2, 3};
  cfg.locations = {0, 1};
  cfg.locks = {"r", "s"};
  cfg.perm_denominator = 4;
  return cfg;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::vector<int> to_ints(const std::vector<std::string>& items,
                         const std::string& key) {
  std::vector<int> out;
  for (auto& s : items) {
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad integer '" + s + "' in " + key);
    }
  }
  return out;
}

void apply_key(Config& cfg, const std::string& key, const std::string& value) {
  if (key == "vars")
    cfg.vars = split_list(value);
  else if (key == "values")
    cfg.values = to_ints(split_list(value), key);
  else if (key == "locations")
    cfg.locations = to_ints(split_list(value), key);
  else if (key == "locks")
    cfg.locks = split_list(value);
  else if (key == "perm_denominator")
    cfg.perm_denominator = to_ints({value}, key)[0];
  else if (key == "homotopy_budget")
    cfg.homotopy_budget = static_cast<std::size_t>(std::stoll(value));
  else if (key == "unroll_cap")
    cfg.unroll_cap = static_cast<std::size_t>(std::stoll(value));
  else if (key == "oracle_pair_cap")
    cfg.oracle_pair_cap = static_cast<std::size_t>(std::stoll(value));
  else
    throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config cfg = default_config();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto notspace = [](unsigned char c) { return !isspace(c); };
    line.erase(line.begin(),
               std::find_if(line.begin(), line.end(), notspace));
    line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(),
               line.end());
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key=value, got '" + line + "'");
    std::string key = line.substr(0, eq);
    key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(),
              key.end());
    std::string value = line.substr(eq + 1);
    value.erase(value.begin(),
                std::find_if(value.begin(), value.end(), notspace));
    apply_key(cfg, key, value);
  }
  std::sort(cfg.values.begin(), cfg.values.end());
  cfg.values.erase(std::unique(cfg.values.begin(), cfg.values.end()),
                   cfg.values.end());
  validate(cfg);
  return cfg;
}

Config parse_config_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("bad JSON config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("JSON config must be an object");
  Config cfg = default_config();
  for (auto& [key, val] : j.items()) {
    if (key == "vars")
      cfg.vars = val.get<std::vector<std::string>>();
    else if (key == "values")
      cfg.values = val.get<std::vector<int>>();
    else if (key == "locations")
      cfg.locations = val.get<std::vector<int>>();
    else if (key == "locks")
      cfg.locks = val.get<std::vector<std::string>>();
    else if (key == "perm_denominator")
      cfg.perm_denominator = val.get<int>();
    else if (key == "homotopy_budget")
      cfg.homotopy_budget = val.get<std::size_t>();
    else if (key == "unroll_cap")
      cfg.unroll_cap = val.get<std::size_t>();
    else if (key == "oracle_pair_cap")
      cfg.oracle_pair_cap = val.get<std::size_t>();
    else
      throw ConfigError("unknown config key '" + key + "'");
  }
  std::sort(cfg.values.begin(), cfg.values.end());
  cfg.values.erase(std::unique(cfg.values.begin(), cfg.values.end()),
                   cfg.values.end());
  validate(cfg);
  return cfg;
}

}  // namespace asyncsl
