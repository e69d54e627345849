#include "toughopt/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace toughopt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_num(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (trim(s.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error("config value for '" + key + "' is not a number: '" +
                           s + "'");
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.kv_[key] = val;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse(buf.str());
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[trim(key)] = trim(value);
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::str(const std::string& key, const std::string& dflt) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? dflt : it->second;
}

double Config::num(const std::string& key, double dflt) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? dflt : parse_num(key, it->second);
}

int Config::integer(const std::string& key, int dflt) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  const double v = parse_num(key, it->second);
  const int n = int(v);
  if (double(n) != v)
    throw std::runtime_error("config value for '" + key +
                             "' is not an integer: '" + it->second + "'");
  return n;
}

bool Config::flag(const std::string& key, bool dflt) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  const std::string& v = it->second;
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw std::runtime_error("config value for '" + key +
                           "' is not a boolean: '" + v + "'");
}

std::vector<double> Config::nums(const std::string& key) const {
  const auto it = kv_.find(key);
  std::vector<double> out;
  if (it == kv_.end()) return out;
  std::istringstream is(it->second);
  std::string tok;
  while (is >> tok) out.push_back(parse_num(key, tok));
  return out;
}

std::string Config::canonical() const {
  // Bare keys first (they must precede any section header to reparse
  // unqualified), then sections in sorted order.
  std::ostringstream os;
  for (const auto& [key, val] : kv_)
    if (key.find('.') == std::string::npos) os << key << " = " << val << "\n";
  std::string section;
  bool any = false;
  for (const auto& [key, val] : kv_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string sec = key.substr(0, dot);
    if (sec != section || !any) {
      os << "[" << sec << "]\n";
      section = sec;
      any = true;
    }
    os << key.substr(dot + 1) << " = " << val << "\n";
  }
  return os.str();
}

std::uint64_t Config::hash() const {
  const std::string text = canonical();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void apply_override(Config& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::runtime_error("override must be key=value: '" + assignment +
                             "'");
  cfg.set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

SimulationConfig sim_config_from(const Config& cfg) {
  SimulationConfig sc;
  const double W = cfg.num("domain.width", sc.domain.width());
  const double H = cfg.num("domain.height", sc.domain.height());
  sc.domain = Rect{0.0, -0.5 * H, W, 0.5 * H};

  sc.mesh.domain = sc.domain;
  sc.mesh.root_cell = cfg.num("mesh.root_cell", sc.mesh.root_cell);
  sc.mesh.max_level = cfg.integer("mesh.max_level", sc.mesh.max_level);
  sc.mesh.alpha_refine = cfg.num("mesh.alpha_refine", sc.mesh.alpha_refine);
  sc.mesh.alpha_coarsen = cfg.num("mesh.alpha_coarsen", sc.mesh.alpha_coarsen);
  sc.mesh.alpha_tip = cfg.num("mesh.alpha_tip", sc.mesh.alpha_tip);
  sc.refine_margin = cfg.num("mesh.refine_margin", sc.refine_margin);
  sc.interface_level = cfg.integer("mesh.interface_level", sc.interface_level);
  sc.min_support = cfg.num("mesh.min_support", sc.min_support);

  sc.materials.E_matrix = cfg.num("material.E_matrix", sc.materials.E_matrix);
  sc.materials.E_inclusion =
      cfg.num("material.E_inclusion", sc.materials.E_inclusion);
  sc.materials.nu = cfg.num("material.nu", sc.materials.nu);
  sc.materials.k_interface =
      cfg.num("material.k_interface", sc.materials.k_interface);
  sc.materials.G_c = cfg.num("material.Gc", sc.materials.G_c);
  sc.materials.l_ch = cfg.num("material.l_ch", sc.materials.l_ch);
  sc.eps = cfg.num("model.eps", sc.eps);

  sc.surf.K_I = cfg.num("surfing.K_I", sc.surf.K_I);
  sc.surf.v = cfg.num("surfing.v", sc.surf.v);
  sc.surf.E = sc.materials.E_matrix;
  sc.surf.nu = sc.materials.nu;

  sc.controls.dt = cfg.num("step.dt", sc.controls.dt);
  sc.controls.t_max = cfg.num("step.t_max", sc.controls.t_max);
  sc.controls.max_crack_advance =
      cfg.num("step.max_crack_advance", sc.controls.max_crack_advance);
  sc.controls.target_crack_length =
      cfg.num("step.target_crack_length", sc.controls.target_crack_length);
  sc.controls.irrev_threshold =
      cfg.num("step.irrev_threshold", sc.controls.irrev_threshold);
  sc.controls.notch_len = cfg.num("step.notch_len", sc.controls.notch_len);
  sc.controls.max_dt_halvings =
      cfg.integer("step.max_dt_halvings", sc.controls.max_dt_halvings);

  sc.newton.tol = cfg.num("newton.tol", sc.newton.tol);
  sc.newton.max_iter = cfg.integer("newton.max_iter", sc.newton.max_iter);
  sc.newton.mu_init = cfg.num("newton.mu_init", sc.newton.mu_init);
  sc.newton.mu_min = cfg.num("newton.mu_min", sc.newton.mu_min);
  sc.newton.mu_factor = cfg.num("newton.mu_factor", sc.newton.mu_factor);
  sc.newton.ftb = cfg.num("newton.ftb", sc.newton.ftb);
  sc.newton.armijo = cfg.num("newton.armijo", sc.newton.armijo);
  sc.newton.max_backtrack =
      cfg.integer("newton.max_backtrack", sc.newton.max_backtrack);
  sc.newton.pin_gap = cfg.num("newton.pin_gap", sc.newton.pin_gap);

  sc.window_lo = cfg.num("window.lo", sc.window_lo);
  sc.window_hi = cfg.num("window.hi", sc.window_hi);
  sc.smooth_half_width =
      cfg.integer("window.half_width", sc.smooth_half_width);
  return sc;
}

CampaignOptions campaign_options_from(const Config& cfg) {
  CampaignOptions o;
  o.n_init = cfg.integer("campaign.n_init", o.n_init);
  o.q = cfg.integer("campaign.q", o.q);
  o.iterations = cfg.integer("campaign.iterations", o.iterations);
  o.beta = cfg.num("campaign.beta", o.beta);
  o.n_mc = cfg.integer("campaign.n_mc", o.n_mc);
  o.de_N = cfg.integer("campaign.de_N", o.de_N);
  o.seed = std::uint64_t(cfg.num("campaign.seed", double(o.seed)));
  o.tr_up = cfg.num("campaign.tr_up", o.tr_up);
  o.tr_down = cfg.num("campaign.tr_down", o.tr_down);
  o.tr_floor = cfg.num("campaign.tr_floor", o.tr_floor);
  o.feasible_budget_factor =
      cfg.integer("campaign.feasible_budget_factor", o.feasible_budget_factor);

  o.de.F = cfg.num("de.F", o.de.F);
  o.de.CR = cfg.num("de.CR", o.de.CR);
  o.de.generations = cfg.integer("de.generations", o.de.generations);
  o.de.stall_generations =
      cfg.integer("de.stall_generations", o.de.stall_generations);

  o.gp.noise = cfg.num("gp.noise", o.gp.noise);
  o.gp.jitter = cfg.num("gp.jitter", o.gp.jitter);
  o.gp.len_lo = cfg.num("gp.len_lo", o.gp.len_lo);
  o.gp.len_hi = cfg.num("gp.len_hi", o.gp.len_hi);
  o.gp.sig_lo = cfg.num("gp.sig_lo", o.gp.sig_lo);
  o.gp.sig_hi = cfg.num("gp.sig_hi", o.gp.sig_hi);
  o.gp.fit_pop = cfg.integer("gp.fit_pop", o.gp.fit_pop);
  o.gp.fit_generations =
      cfg.integer("gp.fit_generations", o.gp.fit_generations);

  o.config_hash = cfg.hash();
  return o;
}

DesignVector design_from(const Config& cfg) {
  // Staggered circle lattice (radius 2.5, cell 15 x 6) unless overridden.
  DesignVector x;
  x.v = {0.5, 0.5, 2.5, 2.5, 0.0, 2.5, 2.5, 0.0, 6.0};
  for (int i = 0; i < DesignVector::kDim; ++i) {
    char key[16];
    std::snprintf(key, sizeof key, "design.x%d", i + 1);
    x[i] = cfg.num(key, x[i]);
  }
  return x;
}

DesignBounds design_bounds_from(const Config& cfg) {
  DesignBounds b = DesignBounds::reference();
  for (int i = 0; i < DesignVector::kDim; ++i) {
    char key[16];
    std::snprintf(key, sizeof key, "bounds.x%d", i + 1);
    const std::vector<double> v = cfg.nums(key);
    if (v.empty()) continue;
    if (v.size() != 2 || v[0] > v[1])
      throw std::runtime_error(std::string("config key '") + key +
                               "' must hold 'lo hi'");
    b.lo[size_t(i)] = v[0];
    b.hi[size_t(i)] = v[1];
  }
  return b;
}

LayoutOptions layout_options_from(const Config& cfg, const Rect& domain) {
  LayoutOptions o;
  o.domain = domain;
  o.boundary_clear = cfg.num("design.boundary_clear", o.boundary_clear);
  o.hull_points = cfg.integer("design.hull_points", o.hull_points);
  return o;
}

double min_gap_from(const Config& cfg) { return cfg.num("design.min_gap", 1.0); }

bool inclusions_enabled(const Config& cfg) {
  return cfg.flag("design.inclusions", true);
}

double crack_offset_from(const Config& cfg) { return cfg.num("design.w", 0.0); }

std::vector<double> sweep_scenarios_from(const Config& cfg) {
  std::vector<double> w = cfg.nums("sweep.scenarios");
  if (w.empty()) w.assign(kScenarios.begin(), kScenarios.end());
  return w;
}

std::vector<SweepAxis> sweep_axes_from(const Config& cfg) {
  std::istringstream is(cfg.str("sweep.params", ""));
  std::vector<SweepAxis> axes;
  std::string name;
  while (is >> name) {
    const std::vector<double> v = cfg.nums("sweep." + name);
    if (v.size() != 3 || v[2] < 1 || double(int(v[2])) != v[2])
      throw std::runtime_error("sweep axis '" + name +
                               "' must hold 'lo hi count'");
    axes.push_back({name, v[0], v[1], int(v[2])});
  }
  if (axes.empty() || axes.size() > 2)
    throw std::runtime_error("sweep needs one or two axes in sweep.params");
  return axes;
}

}  // namespace toughopt
