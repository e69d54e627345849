#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toughopt/bayesopt.hpp"
#include "toughopt/geometry.hpp"
#include "toughopt/solver.hpp"

namespace toughopt {

// Run configuration: a flat "section.key" -> string store parsed from an
// INI-style text file. Unknown keys are kept (and hashed) but ignored by the
// builders; missing keys fall back to the compiled-in defaults, so the file
// only needs to name what deviates from them.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string str(const std::string& key, const std::string& dflt) const;
  double num(const std::string& key, double dflt) const;
  int integer(const std::string& key, int dflt) const;
  bool flag(const std::string& key, bool dflt) const;
  std::vector<double> nums(const std::string& key) const;  // empty if missing

  // Sections sorted, one "key = value" per line; parse(canonical()) == *this.
  std::string canonical() const;
  // FNV-1a over the canonical text; stamped into every artifact.
  std::uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// "section.key=value" command-line override.
void apply_override(Config& cfg, const std::string& assignment);

struct SweepAxis {
  std::string param;  // design key suffix, e.g. "x1"
  double lo = 0.0, hi = 0.0;
  int n = 0;
};

SimulationConfig sim_config_from(const Config& cfg);
CampaignOptions campaign_options_from(const Config& cfg);
DesignVector design_from(const Config& cfg);
DesignBounds design_bounds_from(const Config& cfg);
LayoutOptions layout_options_from(const Config& cfg, const Rect& domain);
double min_gap_from(const Config& cfg);
bool inclusions_enabled(const Config& cfg);
double crack_offset_from(const Config& cfg);
std::vector<double> sweep_scenarios_from(const Config& cfg);
std::vector<SweepAxis> sweep_axes_from(const Config& cfg);

}  // namespace toughopt
