#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlmcdrop/allocation.hpp"
#include "mlmcdrop/analytic.hpp"
#include "mlmcdrop/mlmc.hpp"

namespace mlmcdrop {

/// Config validation failure, tagged with the offending section.key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class AllocationTarget { mean, variance };

struct EvaluatorConfig {
  bool is_mlp = false;
  AnalyticFamily analytic;
  std::string weights_path;
};

struct GridConfig {
  std::size_t points = 101;
  double xmin = 0.0;
  double xmax = 1.0;
};

struct LadderConfig {
  std::vector<std::uint32_t> ts;  // explicit list; empty means geometric
  std::uint32_t t0 = 0;
  double ratio = 0.0;
  std::uint32_t t_max = 0;

  bool is_geometric() const { return ts.empty(); }

  FidelityLadder build() const {
    if (!ts.empty()) {
      FidelityLadder ladder{ts};
      ladder.validate();
      return ladder;
    }
    if (t0 == 0 || !(ratio > 1.0) || t_max == 0)
      throw ConfigError("ladder",
                        "need either ts or all of t0, ratio, t_max");
    return make_geometric_ladder(t0, ratio, t_max);
  }
};

struct AllocationConfig {
  std::vector<std::uint64_t> ms;  // explicit counts; empty means budget-based
  std::optional<double> budget;
  std::optional<AllocationTarget> target;
  CostModelKind cost_model = CostModelKind::coupled;
  std::uint32_t min_m = 2;
  std::optional<double> mu2;
  std::optional<double> mu4;
};

struct RateConfig {
  std::vector<std::uint32_t> t_list;
  std::uint32_t m_outer = 0;
};

struct OutputConfig {
  std::string dir = "out";
  bool timestamp = true;
};

struct RunConfig {
  std::optional<EvaluatorConfig> evaluator;
  GridConfig grid;
  std::optional<LadderConfig> ladder;
  std::optional<AllocationConfig> allocation;
  std::optional<RateConfig> rate;
  std::vector<std::uint64_t> seeds;
  OutputConfig output;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& field, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError(field, "not a number: '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& field,
                                const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("");
    const std::uint64_t u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return u;
  } catch (...) {
    throw ConfigError(field, "not a nonnegative integer: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + v + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& field, const std::string& v,
                          Parse parse) {
  std::vector<T> out;
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) out.push_back(parse(field, tok));
  if (out.empty()) throw ConfigError(field, "empty list");
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  EvaluatorConfig ev;
  bool have_evaluator = false;
  bool have_kind = false;
  LadderConfig ladder;
  bool have_ladder = false;
  AllocationConfig alloc;
  bool have_alloc = false;
  RateConfig rate;
  bool have_rate = false;

  std::istringstream is(text);
  std::string raw;
  std::string section;
  while (std::getline(is, raw)) {
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(line, "malformed section header");
      section = line.substr(1, line.size() - 2);
      if (section != "evaluator" && section != "grid" && section != "ladder" &&
          section != "allocation" && section != "rate" &&
          section != "seeds" && section != "output")
        throw ConfigError(section, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(section.empty() ? line : section,
                        "expected key = value, got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string field = section + "." + key;
    if (section.empty())
      throw ConfigError(key, "key outside any section");
    if (value.empty()) throw ConfigError(field, "empty value");

    if (section == "evaluator") {
      have_evaluator = true;
      if (key == "kind") {
        have_kind = true;
        if (value == "uniform_scaled_sine_u")
          ev.analytic.kind = AnalyticKind::uniform_scaled_sine_u;
        else if (value == "uniform_scaled_sine_f")
          ev.analytic.kind = AnalyticKind::uniform_scaled_sine_f;
        else if (value == "gaussian_location")
          ev.analytic.kind = AnalyticKind::gaussian_location;
        else if (value == "boundary_layer_noisefree")
          ev.analytic.kind = AnalyticKind::boundary_layer_noisefree;
        else if (value == "mlp")
          ev.is_mlp = true;
        else
          throw ConfigError(field, "unknown evaluator kind '" + value + "'");
      } else if (key == "delta")
        ev.analytic.delta = detail::parse_double(field, value);
      else if (key == "mu")
        ev.analytic.mu = detail::parse_double(field, value);
      else if (key == "sigma")
        ev.analytic.sigma = detail::parse_double(field, value);
      else if (key == "epsilon")
        ev.analytic.epsilon = detail::parse_double(field, value);
      else if (key == "weights")
        ev.weights_path = value;
      else
        throw ConfigError(field, "unknown key");
    } else if (section == "grid") {
      if (key == "points")
        cfg.grid.points =
            static_cast<std::size_t>(detail::parse_uint(field, value));
      else if (key == "xmin")
        cfg.grid.xmin = detail::parse_double(field, value);
      else if (key == "xmax")
        cfg.grid.xmax = detail::parse_double(field, value);
      else
        throw ConfigError(field, "unknown key");
    } else if (section == "ladder") {
      have_ladder = true;
      if (key == "ts")
        ladder.ts = detail::parse_list<std::uint32_t>(
            field, value, [](const std::string& f, const std::string& v) {
              return static_cast<std::uint32_t>(detail::parse_uint(f, v));
            });
      else if (key == "t0")
        ladder.t0 = static_cast<std::uint32_t>(detail::parse_uint(field, value));
      else if (key == "ratio")
        ladder.ratio = detail::parse_double(field, value);
      else if (key == "t_max")
        ladder.t_max =
            static_cast<std::uint32_t>(detail::parse_uint(field, value));
      else
        throw ConfigError(field, "unknown key");
    } else if (section == "allocation") {
      have_alloc = true;
      if (key == "ms")
        alloc.ms = detail::parse_list<std::uint64_t>(
            field, value, [](const std::string& f, const std::string& v) {
              return detail::parse_uint(f, v);
            });
      else if (key == "budget")
        alloc.budget = detail::parse_double(field, value);
      else if (key == "target") {
        if (value == "mean")
          alloc.target = AllocationTarget::mean;
        else if (value == "variance")
          alloc.target = AllocationTarget::variance;
        else
          throw ConfigError(field, "target must be mean or variance");
      } else if (key == "cost_model") {
        if (value == "coupled")
          alloc.cost_model = CostModelKind::coupled;
        else if (value == "uncoupled")
          alloc.cost_model = CostModelKind::uncoupled;
        else
          throw ConfigError(field, "cost_model must be coupled or uncoupled");
      } else if (key == "min_m")
        alloc.min_m =
            static_cast<std::uint32_t>(detail::parse_uint(field, value));
      else if (key == "mu2")
        alloc.mu2 = detail::parse_double(field, value);
      else if (key == "mu4")
        alloc.mu4 = detail::parse_double(field, value);
      else
        throw ConfigError(field, "unknown key");
    } else if (section == "rate") {
      have_rate = true;
      if (key == "t_list")
        rate.t_list = detail::parse_list<std::uint32_t>(
            field, value, [](const std::string& f, const std::string& v) {
              return static_cast<std::uint32_t>(detail::parse_uint(f, v));
            });
      else if (key == "m_outer")
        rate.m_outer =
            static_cast<std::uint32_t>(detail::parse_uint(field, value));
      else
        throw ConfigError(field, "unknown key");
    } else if (section == "seeds") {
      if (key == "list")
        cfg.seeds = detail::parse_list<std::uint64_t>(
            field, value, [](const std::string& f, const std::string& v) {
              return detail::parse_uint(f, v);
            });
      else
        throw ConfigError(field, "unknown key");
    } else if (section == "output") {
      if (key == "dir")
        cfg.output.dir = value;
      else if (key == "timestamp")
        cfg.output.timestamp = detail::parse_bool(field, value);
      else
        throw ConfigError(field, "unknown key");
    }
  }

  if (have_evaluator) {
    if (!have_kind) throw ConfigError("evaluator.kind", "missing");
    if (ev.is_mlp && ev.weights_path.empty())
      throw ConfigError("evaluator.weights", "mlp evaluator needs a path");
    if (!ev.is_mlp && !ev.weights_path.empty())
      throw ConfigError("evaluator.weights",
                        "weights only valid for kind = mlp");
    if (!ev.is_mlp) {
      try {
        ev.analytic.validate();
      } catch (const std::exception& e) {
        throw ConfigError("evaluator", e.what());
      }
    }
    cfg.evaluator = ev;
  }
  if (have_ladder) cfg.ladder = ladder;
  if (have_alloc) cfg.allocation = alloc;
  if (have_rate) {
    if (rate.t_list.empty()) throw ConfigError("rate.t_list", "missing");
    if (rate.m_outer < 2)
      throw ConfigError("rate.m_outer", "must be at least 2");
    cfg.rate = rate;
  }
  if (cfg.grid.points == 0)
    throw ConfigError("grid.points", "must be positive");
  if (!(cfg.grid.xmax >= cfg.grid.xmin))
    throw ConfigError("grid.xmax", "must be >= xmin");
  return cfg;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Canonical text form; parse(emit(parse(x))) == parse(x).
inline std::string emit_config(const RunConfig& cfg) {
  std::ostringstream os;
  if (cfg.evaluator) {
    const EvaluatorConfig& ev = *cfg.evaluator;
    os << "[evaluator]\n";
    if (ev.is_mlp) {
      os << "kind = mlp\n";
      os << "weights = " << ev.weights_path << '\n';
    } else {
      switch (ev.analytic.kind) {
        case AnalyticKind::uniform_scaled_sine_u:
          os << "kind = uniform_scaled_sine_u\n";
          os << "delta = " << detail::fmt_double(ev.analytic.delta) << '\n';
          break;
        case AnalyticKind::uniform_scaled_sine_f:
          os << "kind = uniform_scaled_sine_f\n";
          os << "delta = " << detail::fmt_double(ev.analytic.delta) << '\n';
          break;
        case AnalyticKind::gaussian_location:
          os << "kind = gaussian_location\n";
          os << "mu = " << detail::fmt_double(ev.analytic.mu) << '\n';
          os << "sigma = " << detail::fmt_double(ev.analytic.sigma) << '\n';
          break;
        case AnalyticKind::boundary_layer_noisefree:
          os << "kind = boundary_layer_noisefree\n";
          os << "epsilon = " << detail::fmt_double(ev.analytic.epsilon)
             << '\n';
          break;
      }
    }
  }
  os << "[grid]\n";
  os << "points = " << cfg.grid.points << '\n';
  os << "xmin = " << detail::fmt_double(cfg.grid.xmin) << '\n';
  os << "xmax = " << detail::fmt_double(cfg.grid.xmax) << '\n';
  if (cfg.ladder) {
    os << "[ladder]\n";
    if (!cfg.ladder->ts.empty()) {
      os << "ts =";
      for (std::uint32_t t : cfg.ladder->ts) os << ' ' << t;
      os << '\n';
    } else {
      os << "t0 = " << cfg.ladder->t0 << '\n';
      os << "ratio = " << detail::fmt_double(cfg.ladder->ratio) << '\n';
      os << "t_max = " << cfg.ladder->t_max << '\n';
    }
  }
  if (cfg.allocation) {
    const AllocationConfig& a = *cfg.allocation;
    os << "[allocation]\n";
    if (!a.ms.empty()) {
      os << "ms =";
      for (std::uint64_t m : a.ms) os << ' ' << m;
      os << '\n';
    }
    if (a.budget) os << "budget = " << detail::fmt_double(*a.budget) << '\n';
    if (a.target)
      os << "target = "
         << (*a.target == AllocationTarget::mean ? "mean" : "variance")
         << '\n';
    os << "cost_model = "
       << (a.cost_model == CostModelKind::coupled ? "coupled" : "uncoupled")
       << '\n';
    os << "min_m = " << a.min_m << '\n';
    if (a.mu2) os << "mu2 = " << detail::fmt_double(*a.mu2) << '\n';
    if (a.mu4) os << "mu4 = " << detail::fmt_double(*a.mu4) << '\n';
  }
  if (cfg.rate) {
    os << "[rate]\n";
    os << "t_list =";
    for (std::uint32_t t : cfg.rate->t_list) os << ' ' << t;
    os << '\n';
    os << "m_outer = " << cfg.rate->m_outer << '\n';
  }
  if (!cfg.seeds.empty()) {
    os << "[seeds]\n";
    os << "list =";
    for (std::uint64_t s : cfg.seeds) os << ' ' << s;
    os << '\n';
  }
  os << "[output]\n";
  os << "dir = " << cfg.output.dir << '\n';
  os << "timestamp = " << (cfg.output.timestamp ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace mlmcdrop
