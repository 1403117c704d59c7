#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace asyncsl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finite domains everything is interpreted over. Memory cells are the
// variables followed by the heap locations; the combined count must fit in a
// 64-bit footprint mask.
struct Config {
  std::vector<std::string> vars;
  std::vector<int> values;     // kept sorted, duplicates removed
  std::vector<int> locations;  // must be a subset of values (alloc stores one)
  std::vector<std::string> locks;
  int perm_denominator = 4;

  std::size_t homotopy_budget = 1000000;
  std::size_t unroll_cap = 64;         // loop unrollings before giving up
  std::size_t oracle_pair_cap = 10000; // sampled pairs in the tile oracle

  int var_index(std::string_view name) const;
  int lock_index(std::string_view name) const;
  int location_index(int loc) const;  // -1 when not an address
  int value_index(int v) const;

  std::size_t cell_count() const { return vars.size() + locations.size(); }
  std::size_t var_cell(std::size_t v) const { return v; }
  std::size_t loc_cell(std::size_t l) const { return vars.size() + l; }

  // Total: arbitrary integers fold back into the value domain by index.
  int wrap(long long raw) const;
};

// Shape constraints (distinct names, nonempty domains, mask width, addresses
// being storable values). Throws ConfigError.
void validate(const Config& cfg);

// Desk-scale defaults: x y / 0..3 / two addresses / two locks / quarters.
Config default_config();

// key=value lines; '#' comments. Lists are comma separated.
Config parse_config_text(const std::string& text);
// Same keys as a JSON object.
Config parse_config_json(const std::string& text);

}  // namespace asyncsl
