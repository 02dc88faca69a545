#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qising {

inline constexpr const char* kCodeVersion = "1.0.0";

// configuration problems carry the offending key or file in the message and
// map to exit code 2 at the CLI boundary
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// flat key=value text, one pair per line, '#' lines and blanks skipped
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  // throwing getters name the key; fallback forms never throw on absence
  std::string get_str(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

std::string format_g17(double v);  // shortest round-trip decimal, %.17g

// every table starts with "# schema_version 1" and a header row; cells are
// strings or %.17g numbers, never timestamps, so reruns are byte-identical
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t n_cols_;
};

// run provenance: the effective config, seed, code version, wall time
void write_manifest(const std::string& path, const Config& config,
                    std::uint64_t seed, double wall_seconds);

}  // namespace qising
