#include "fluxfilter/config.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fluxfilter/errors.hpp"
#include "fluxfilter/filter.hpp"

namespace fluxfilter {

namespace {

enum Scope : unsigned {
  kResult = 1u,  // changes assimilation results
  kTwin = 2u,    // changes the twin dataset
};

struct Field {
  const char* section;
  const char* key;
  bool required;
  unsigned scope;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string num(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return v;
}

template <typename Int>
Int to_integer(const std::string& s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("expected an integer, got '" + s + "'");
  }
  return v;
}

std::vector<double> to_list(const std::string& s, char sep) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(to_double(t));
  }
  return out;
}

std::vector<double> to_words(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string word;
  while (in >> word) out.push_back(to_double(word));
  return out;
}

Vec3 to_vec3(const std::string& s) {
  const auto v = to_words(s);
  if (v.size() != 3) throw ConfigError("expected three coordinates 'x y z', got '" + s + "'");
  return {v[0], v[1], v[2]};
}

std::string from_vec3(const Vec3& v) { return num(v.x) + " " + num(v.y) + " " + num(v.z); }

std::string from_centers(const std::vector<Vec3>& centers) {
  if (centers.empty()) return "auto";
  std::string out;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    if (j) out += "; ";
    out += num(centers[j].x) + " " + num(centers[j].z);
  }
  return out;
}

std::vector<Vec3> to_centers(const std::string& s) {
  if (s == "auto") return {};
  std::vector<Vec3> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ';')) {
    const auto v = to_words(item);
    if (v.size() != 2) throw ConfigError("RBF centre must be 'x z', got '" + trim(item) + "'");
    out.push_back({v[0], 0.0, v[1]});
  }
  return out;
}

std::string from_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += num(values[i]);
  }
  return out;
}

#define FF_DOUBLE(sec, name, member, req, scope)                                \
  Field {                                                                        \
    sec, name, req, scope, [](const RunConfig& c) { return num(c.member); },     \
        [](RunConfig& c, const std::string& v) { c.member = to_double(v); }      \
  }
#define FF_INT(sec, name, member, req, scope)                                    \
  Field {                                                                        \
    sec, name, req, scope,                                                       \
        [](const RunConfig& c) { return std::to_string(c.member); },             \
        [](RunConfig& c, const std::string& v) { c.member = to_integer<int>(v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FF_DOUBLE("grid", "lx", extents.lx, true, kResult | kTwin),
      FF_DOUBLE("grid", "ly", extents.ly, true, kResult | kTwin),
      FF_DOUBLE("grid", "lz", extents.lz, true, kResult | kTwin),
      FF_INT("grid", "nx", resolution.nx, true, kResult | kTwin),
      FF_INT("grid", "ny", resolution.ny, true, kResult | kTwin),
      FF_INT("grid", "nz", resolution.nz, true, kResult | kTwin),

      FF_DOUBLE("material", "rho", material.rho, true, kResult | kTwin),
      FF_DOUBLE("material", "cp", material.cp, true, kResult | kTwin),
      FF_DOUBLE("material", "ks", material.ks, true, kResult | kTwin),
      FF_DOUBLE("material", "h", material.h, true, kResult | kTwin),
      FF_DOUBLE("material", "t_fluid", material.t_fluid, true, kResult | kTwin),
      FF_DOUBLE("material", "t_init", material.t_init, true, kResult | kTwin),

      FF_DOUBLE("true_flux", "b", true_flux.b, true, kResult | kTwin),
      FF_DOUBLE("true_flux", "c", true_flux.c, true, kResult | kTwin),
      FF_DOUBLE("true_flux", "f_max", true_flux.f_max, true, kResult | kTwin),
      FF_DOUBLE("true_flux", "t_f", true_flux.t_f, true, kResult | kTwin),
      FF_DOUBLE("true_flux", "ks", true_flux.ks, true, kResult | kTwin),

      FF_DOUBLE("schedule", "dt", dt, true, kResult | kTwin),
      FF_DOUBLE("schedule", "obs_span", obs_span, true, kResult | kTwin),
      FF_DOUBLE("schedule", "t_final", t_final, true, kResult | kTwin),

      FF_DOUBLE("sensors", "plane_y", sensors.plane_y, false, kResult | kTwin),
      FF_INT("sensors", "count_x", sensors.count_x, false, kResult | kTwin),
      FF_INT("sensors", "count_z", sensors.count_z, false, kResult | kTwin),
      FF_DOUBLE("sensors", "margin_fraction", sensors.margin_fraction, false, kResult | kTwin),

      Field{"rbf", "kernel", true, kResult,
            [](const RunConfig& c) { return to_string(c.kernel.kind); },
            [](RunConfig& c, const std::string& v) { c.kernel.kind = parse_kernel_kind(v); }},
      FF_DOUBLE("rbf", "eta", kernel.eta, true, kResult),
      Field{"rbf", "centers", false, kResult,
            [](const RunConfig& c) { return from_centers(c.centers); },
            [](RunConfig& c, const std::string& v) { c.centers = to_centers(v); }},

      FF_DOUBLE("prior", "kappa", kappa, true, kResult),
      FF_DOUBLE("prior", "shift", shift, true, kResult),
      FF_DOUBLE("prior", "state_mean", state_mean, true, kResult),
      FF_DOUBLE("prior", "state_var", state_var, true, kResult),

      FF_DOUBLE("noise", "q", q, true, kResult),
      FF_DOUBLE("noise", "r", r, true, kResult | kTwin),

      FF_INT("filter", "ensemble_size", ensemble_size, true, kResult),
      FF_INT("filter", "beta_max", beta_max, true, kResult),
      FF_DOUBLE("filter", "max_condition", max_condition, false, kResult),

      FF_INT("twin", "refine", twin_refine, false, kResult | kTwin),

      Field{"probes", "temperature", false, kResult,
            [](const RunConfig& c) { return from_vec3(c.temperature_probe); },
            [](RunConfig& c, const std::string& v) { c.temperature_probe = to_vec3(v); }},
      Field{"probes", "flux", false, kResult,
            [](const RunConfig& c) { return from_vec3(c.flux_probe); },
            [](RunConfig& c, const std::string& v) { c.flux_probe = to_vec3(v); }},

      Field{"experiments", "error_norm", false, kResult,
            [](const RunConfig& c) { return to_string(c.error_norm); },
            [](RunConfig& c, const std::string& v) { c.error_norm = parse_error_norm(v); }},

      Field{"sweep", "parameter", false, 0,
            [](const RunConfig& c) { return c.sweep_parameter.empty() ? "none" : c.sweep_parameter; },
            [](RunConfig& c, const std::string& v) { c.sweep_parameter = v == "none" ? "" : v; }},
      Field{"sweep", "values", false, 0,
            [](const RunConfig& c) { return from_list(c.sweep_values); },
            [](RunConfig& c, const std::string& v) { c.sweep_values = to_list(v, ','); }},

      Field{"run", "seed", true, kResult | kTwin,
            [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& v) { c.seed = to_integer<std::uint64_t>(v); }},
      FF_INT("run", "workers", workers, false, 0),
      Field{"run", "output", false, 0, [](const RunConfig& c) { return c.output; },
            [](RunConfig& c, const std::string& v) { c.output = v; }},
  };
  return table;
}

#undef FF_DOUBLE
#undef FF_INT

std::string canonical(const RunConfig& config, unsigned scope_mask) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (scope_mask != 0 && (f.scope & scope_mask) == 0) continue;
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

void RunConfig::validate() const {
  const Grid grid = build_grid(extents, resolution);
  material.validate();
  true_flux.validate();
  if (!(kernel.eta > 0.0)) throw ConfigError("rbf.eta must be > 0");
  if (!(kappa >= 0.0)) throw ConfigError("prior.kappa must be >= 0");
  if (!(state_var >= 0.0)) throw ConfigError("prior.state_var must be >= 0");
  if (!std::isfinite(shift) || !std::isfinite(state_mean)) {
    throw ConfigError("prior.shift and prior.state_mean must be finite");
  }
  if (!(q >= 0.0) || !(r >= 0.0)) throw ConfigError("noise.q and noise.r must be >= 0");
  if (ensemble_size < 2) throw ConfigError("filter.ensemble_size must be >= 2");
  if (beta_max < 1) throw ConfigError("filter.beta_max must be >= 1");
  if (!(max_condition > 1.0)) throw ConfigError("filter.max_condition must be > 1");
  const int per_obs = steps_in(obs_span, dt, "schedule.obs_span");
  const int total = steps_in(t_final, dt, "schedule.t_final");
  if (total % per_obs != 0) {
    throw ConfigError("schedule.t_final must be a multiple of schedule.obs_span");
  }
  if (t_final > true_flux.t_f * (1.0 + 1e-12)) {
    throw ConfigError("schedule.t_final exceeds true_flux.t_f");
  }
  if (twin_refine != 1 && twin_refine != 2) throw ConfigError("twin.refine must be 1 or 2");
  const SensorLayout layout = default_layout(grid, sensors);
  if (!grid.contains(temperature_probe)) throw ConfigError("probes.temperature lies outside the domain");
  if (!grid.contains(flux_probe)) throw ConfigError("probes.flux lies outside the domain");
  if (!centers.empty()) {
    build_basis(centers, grid, kernel);
  } else {
    build_basis(default_centers(grid, layout.locations), grid, kernel);
  }
  if (!sweep_parameter.empty()) {
    static const std::set<std::string> known = {"ensemble_size", "eta", "kappa",
                                                "shift",         "dt",  "obs_span"};
    if (!known.contains(sweep_parameter)) {
      throw ConfigError("sweep.parameter '" + sweep_parameter +
                        "' is not one of ensemble_size, eta, kappa, shift, dt, obs_span");
    }
  }
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  std::map<std::pair<std::string, std::string>, const Field*> index;
  for (const auto& f : fields()) index[{f.section, f.key}] = &f;

  RunConfig config = default_config();
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    const auto hash = raw.find('#');
    const std::string line = trim(raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ParseError(source, line_no, "key '" + key + "' outside a section");
    const auto it = index.find({section, key});
    if (it == index.end()) {
      throw ParseError(source, line_no, "unknown key '" + section + "." + key + "'");
    }
    if (!seen.insert({section, key}).second) {
      throw ParseError(source, line_no, "duplicate key '" + section + "." + key + "'");
    }
    try {
      it->second->set(config, value);
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(source, line_no, section + "." + key + ": " + e.what());
    }
  }

  for (const auto& f : fields()) {
    if (f.required && !seen.contains({f.section, f.key})) {
      throw ConfigError(source + ": missing required key '" + f.section + "." + f.key + "'");
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

std::string serialize_config(const RunConfig& config) { return canonical(config, 0); }

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << serialize_config(config);
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  return sha256_hex(canonical(config, kResult)).substr(0, 16);
}

std::string twin_hash(const RunConfig& config) {
  return sha256_hex(canonical(config, kTwin)).substr(0, 16);
}

}  // namespace fluxfilter
