#include "flexmarket/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace flexmarket {

using nlohmann::json;

int TimeGrid::steps_per_day() const {
  const int n = static_cast<int>(std::lround(24.0 / dt_hours));
  return std::max(n, 1);
}

namespace {

std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

// Typed access into a JSON object with field-path diagnostics.
class Reader {
 public:
  Reader(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  std::vector<Diagnostic> problems;

  const json* object(const json& parent, const std::string& key, const std::string& path, bool required) {
    if (!parent.contains(key)) {
      if (required) problems.push_back({path, "required section missing"});
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      problems.push_back({path, "expected an object"});
      return nullptr;
    }
    return &v;
  }

  void known_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) problems.push_back({join(path, it.key()), "unknown field"});
  }

  double number(const json& obj, const std::string& key, const std::string& path, double fallback,
                bool required = false) {
    if (!obj.contains(key)) {
      if (required) problems.push_back({join(path, key), "required field missing"});
      return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
      problems.push_back({join(path, key), "expected a number"});
      return fallback;
    }
    return v.get<double>();
  }

  int integer(const json& obj, const std::string& key, const std::string& path, int fallback, bool required = false) {
    if (!obj.contains(key)) {
      if (required) problems.push_back({join(path, key), "required field missing"});
      return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      problems.push_back({join(path, key), "expected an integer"});
      return fallback;
    }
    return v.get<int>();
  }

  bool boolean(const json& obj, const std::string& key, const std::string& path, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) {
      problems.push_back({join(path, key), "expected true or false"});
      return fallback;
    }
    return v.get<bool>();
  }

  std::string string(const json& obj, const std::string& key, const std::string& path, std::string fallback,
                     bool required = false) {
    if (!obj.contains(key)) {
      if (required) problems.push_back({join(path, key), "required field missing"});
      return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_string()) {
      problems.push_back({join(path, key), "expected a string"});
      return fallback;
    }
    return v.get<std::string>();
  }

  /// A number (broadcast to `broadcast` entries), an inline array, or a CSV file name.
  std::vector<double> series(const json& obj, const std::string& key, const std::string& path, int broadcast,
                             bool required) {
    const std::string field = join(path, key);
    if (!obj.contains(key)) {
      if (required) problems.push_back({field, "required series missing"});
      return {};
    }
    const json& v = obj.at(key);
    if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(std::max(broadcast, 0)), v.get<double>());
    if (v.is_string()) {
      try {
        return read_series_csv(base_dir_ / v.get<std::string>());
      } catch (const Error& e) {
        problems.push_back({field, e.what()});
        return {};
      }
    }
    if (v.is_array()) {
      std::vector<double> out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
          problems.push_back({index_path(field, i), "expected a number"});
          return {};
        }
        out.push_back(v[i].get<double>());
      }
      return out;
    }
    problems.push_back({field, "expected a number, an array or a CSV file name"});
    return {};
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::filesystem::path base_dir_;
};

Device parse_device(Reader& r, const json& d, const std::string& path, int total_steps) {
  const std::string type = r.string(d, "type", path, "", true);
  const std::string id = r.string(d, "id", path, "");
  auto battery = [&](std::initializer_list<const char*> extra) {
    std::vector<const char*> keys = {"type",    "id",      "self_discharge", "efficiency", "capacity_kwh",
                                     "p_min",   "p_max",   "soc_min",        "soc_max",    "soc_init"};
    keys.insert(keys.end(), extra.begin(), extra.end());
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = d.begin(); it != d.end(); ++it)
      if (!allowed.count(it.key())) r.problems.push_back({Reader::join(path, it.key()), "unknown field"});
    BatteryParams p;
    p.id = id;
    p.self_discharge = r.number(d, "self_discharge", path, 0.0);
    p.efficiency = r.number(d, "efficiency", path, 1.0);
    p.capacity_kwh = r.number(d, "capacity_kwh", path, 0.0, true);
    p.p_min = r.number(d, "p_min", path, 0.0, true);
    p.p_max = r.number(d, "p_max", path, 0.0, true);
    p.soc_min = r.number(d, "soc_min", path, 0.0);
    p.soc_max = r.number(d, "soc_max", path, 1.0);
    p.soc_init = r.number(d, "soc_init", path, 0.5, true);
    return p;
  };
  if (type == "battery") return battery({});
  if (type == "ev") {
    EvParams p;
    p.battery = battery({"away_window", "soc_target", "target_step"});
    if (d.contains("away_window")) {
      const json& w = d.at("away_window");
      if (w.is_array() && w.size() == 2 && w[0].is_number_integer() && w[1].is_number_integer()) {
        p.away_start = w[0].get<int>();
        p.away_end = w[1].get<int>();
      } else {
        r.problems.push_back({Reader::join(path, "away_window"), "expected [start, end] step indices"});
      }
    }
    p.soc_target = r.number(d, "soc_target", path, p.battery.soc_init);
    p.target_step = r.integer(d, "target_step", path, 0);
    return p;
  }
  if (type == "heat_pump") {
    r.known_keys(d, path, {"type", "id", "r_th", "c_th", "cop", "p_rated", "t_min", "t_max", "t_setpoint", "t_init"});
    HpParams p;
    p.id = id;
    p.r_th = r.number(d, "r_th", path, 0.0, true);
    p.c_th = r.number(d, "c_th", path, 0.0, true);
    p.cop = r.number(d, "cop", path, 0.0, true);
    p.p_rated = r.number(d, "p_rated", path, 0.0, true);
    p.t_min = r.number(d, "t_min", path, 0.0, true);
    p.t_max = r.number(d, "t_max", path, 0.0, true);
    p.t_setpoint = r.number(d, "t_setpoint", path, 0.5 * (p.t_min + p.t_max));
    p.t_init = r.number(d, "t_init", path, p.t_setpoint);
    return p;
  }
  if (type == "pv") {
    r.known_keys(d, path, {"type", "id", "p_rated"});
    PvParams p;
    p.id = id;
    p.p_rated = r.number(d, "p_rated", path, 0.0, true);
    return p;
  }
  if (!type.empty()) r.problems.push_back({Reader::join(path, "type"), "unknown device type '" + type + "'"});
  (void)total_steps;
  return PvParams{id, 0.0};
}

std::vector<double> pad(std::vector<double> v, std::size_t target, int period) {
  if (v.empty() || v.size() >= target) return v;
  const std::size_t day = std::min(v.size(), static_cast<std::size_t>(period));
  const std::size_t start = v.size() - day;
  for (std::size_t i = 0; v.size() < target; ++i) v.push_back(v[start + i % day]);
  return v;
}

void check_length(std::vector<Diagnostic>& out, const std::vector<double>& v, std::size_t need,
                  const std::string& field) {
  if (v.size() < need)
    out.push_back({field, "series length " + std::to_string(v.size()) + " shorter than total_steps + horizon_len = " +
                              std::to_string(need)});
}

}  // namespace

void validate_scenario(const Scenario& s) {
  std::vector<Diagnostic> out;
  const TimeGrid& g = s.time;
  if (!(g.dt_hours > 0.0)) out.push_back({"time.dt_hours", "must be positive"});
  if (g.total_steps < 1) out.push_back({"time.total_steps", "must be at least 1"});
  if (g.horizon_len < 2) out.push_back({"time.horizon_len", "must be at least 2"});
  if (g.horizon_len > g.total_steps) out.push_back({"time.horizon_len", "must not exceed total_steps"});
  if (s.temperature_unit != "F" && s.temperature_unit != "C")
    out.push_back({"units.temperature", "must be \"F\" or \"C\""});

  const ObjectiveWeights& w = s.weights;
  for (auto [name, value] : {std::pair{"alpha_cyc", w.alpha_cyc},
                             {"xi_ev", w.xi_ev},
                             {"xi_ac", w.xi_ac},
                             {"xi_pv", w.xi_pv},
                             {"utilization", w.utilization}})
    if (!(value >= 0.0)) out.push_back({std::string("weights.") + name, "must be nonnegative"});

  if (!(s.solver.tol > 0.0)) out.push_back({"solver.tol", "must be positive"});
  if (s.solver.max_iter < 1) out.push_back({"solver.max_iter", "must be positive"});
  if (s.solver.node_limit < 1) out.push_back({"solver.node_limit", "must be positive"});
  if (s.solver.local_search_passes < 0) out.push_back({"solver.local_search_passes", "must be nonnegative"});
  if (!(s.solver.gap_tol >= 0.0)) out.push_back({"solver.gap_tol", "must be nonnegative"});

  if (static_cast<int>(s.policy.beta.size()) < g.total_steps)
    out.push_back({"policy.beta", "needs one value per clearing step"});
  for (std::size_t i = 0; i < s.policy.beta.size(); ++i)
    if (!(s.policy.beta[i] >= 0.0 && s.policy.beta[i] <= 1.0)) {
      out.push_back({index_path("policy.beta", i), "must lie in [0, 1]"});
      break;
    }

  const std::size_t need = static_cast<std::size_t>(std::max(0, g.total_steps + g.horizon_len));
  check_length(out, s.series.outdoor_temp, need, "series.outdoor_temp");
  check_length(out, s.series.irradiance_frac, need, "series.irradiance_frac");
  check_length(out, s.series.lem_price, need, "series.lem_price");
  for (std::size_t i = 0; i < s.series.irradiance_frac.size(); ++i)
    if (!(s.series.irradiance_frac[i] >= 0.0 && s.series.irradiance_frac[i] <= 1.0)) {
      out.push_back({index_path("series.irradiance_frac", i), "must lie in [0, 1]"});
      break;
    }
  for (std::size_t i = 0; i < s.series.lem_price.size(); ++i)
    if (!(s.series.lem_price[i] > 0.0)) {
      out.push_back({index_path("series.lem_price", i), "must be positive"});
      break;
    }
  for (std::size_t i = 0; i < s.series.outdoor_temp.size(); ++i)
    if (!std::isfinite(s.series.outdoor_temp[i])) {
      out.push_back({index_path("series.outdoor_temp", i), "must be finite"});
      break;
    }

  if (s.agents.empty()) out.push_back({"agents", "at least one agent required"});
  std::set<std::string> ids;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const CmaSpec& a = s.agents[i];
    const std::string p = index_path("agents", i);
    if (a.id.empty()) out.push_back({p + ".id", "must not be empty"});
    else if (!ids.insert(a.id).second) out.push_back({p + ".id", "duplicate agent id '" + a.id + "'"});
    if (!(a.gamma > 0.0)) out.push_back({p + ".gamma", "must be positive"});
    if (!(a.eps_lo >= 0.0)) out.push_back({p + ".eps_lo", "must be nonnegative"});
    if (!(a.eps_lo < a.eps_hi)) out.push_back({p + ".eps_hi", "must exceed eps_lo"});
    check_length(out, a.fixed_load, need, p + ".fixed_load");
    for (std::size_t k = 0; k < a.fixed_load.size(); ++k)
      if (!(a.fixed_load[k] >= 0.0)) {
        out.push_back({index_path(p + ".fixed_load", k), "must be nonnegative"});
        break;
      }
    std::set<std::string> dev_ids;
    for (std::size_t d = 0; d < a.devices.size(); ++d) {
      const std::string dp = index_path(p + ".devices", d) + ".";
      const std::string& id = device_id(a.devices[d]);
      if (id.empty()) out.push_back({dp + "id", "must not be empty"});
      else if (!dev_ids.insert(id).second) out.push_back({dp + "id", "duplicate device id '" + id + "'"});
      for (Diagnostic& diag : validate_device(a.devices[d], dp, g.total_steps)) out.push_back(std::move(diag));
    }
  }
  if (!out.empty()) throw Error(ErrorKind::kValidation, "scenario validation failed", std::move(out));
}

json read_scenario_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kFileMissing, "scenario not found: " + path.string(), {{"scenario", path.string()}});
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, "scenario is not valid JSON", {{path.string(), e.what()}});
  }
}

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  Reader r(base_dir);
  if (!doc.is_object()) throw Error(ErrorKind::kParse, "scenario must be a JSON object");
  r.known_keys(doc, "", {"name", "time", "units", "weights", "policy", "series", "solver", "agents"});
  Scenario s;
  s.name = r.string(doc, "name", "", "");
  if (const json* t = r.object(doc, "time", "time", false)) {
    r.known_keys(*t, "time", {"dt_hours", "total_steps", "horizon_len", "pad_cyclic"});
    s.time.dt_hours = r.number(*t, "dt_hours", "time", s.time.dt_hours);
    s.time.total_steps = r.integer(*t, "total_steps", "time", s.time.total_steps);
    s.time.horizon_len = r.integer(*t, "horizon_len", "time", s.time.horizon_len);
    s.time.pad_cyclic = r.boolean(*t, "pad_cyclic", "time", s.time.pad_cyclic);
  }
  if (const json* u = r.object(doc, "units", "units", false)) {
    r.known_keys(*u, "units", {"temperature"});
    s.temperature_unit = r.string(*u, "temperature", "units", s.temperature_unit);
  }
  if (const json* w = r.object(doc, "weights", "weights", false)) {
    r.known_keys(*w, "weights", {"alpha_cyc", "xi_ev", "xi_ac", "xi_pv", "utilization"});
    s.weights.alpha_cyc = r.number(*w, "alpha_cyc", "weights", s.weights.alpha_cyc);
    s.weights.xi_ev = r.number(*w, "xi_ev", "weights", s.weights.xi_ev);
    s.weights.xi_ac = r.number(*w, "xi_ac", "weights", s.weights.xi_ac);
    s.weights.xi_pv = r.number(*w, "xi_pv", "weights", s.weights.xi_pv);
    s.weights.utilization = r.number(*w, "utilization", "weights", s.weights.utilization);
  }
  if (const json* v = r.object(doc, "solver", "solver", false)) {
    r.known_keys(*v, "solver", {"tol", "max_iter", "node_limit", "local_search_passes", "gap_tol"});
    s.solver.tol = r.number(*v, "tol", "solver", s.solver.tol);
    s.solver.max_iter = r.integer(*v, "max_iter", "solver", s.solver.max_iter);
    s.solver.node_limit = r.integer(*v, "node_limit", "solver", s.solver.node_limit);
    s.solver.local_search_passes = r.integer(*v, "local_search_passes", "solver", s.solver.local_search_passes);
    s.solver.gap_tol = r.number(*v, "gap_tol", "solver", s.solver.gap_tol);
  }
  const int total = s.time.total_steps;
  if (const json* p = r.object(doc, "policy", "policy", false)) {
    r.known_keys(*p, "policy", {"beta", "clip_to_positivity", "clip_to_no_saturation"});
    s.policy.beta = r.series(*p, "beta", "policy", total, false);
    s.policy.clip_to_positivity = r.boolean(*p, "clip_to_positivity", "policy", s.policy.clip_to_positivity);
    s.policy.clip_to_no_saturation = r.boolean(*p, "clip_to_no_saturation", "policy", s.policy.clip_to_no_saturation);
  }
  if (!doc.contains("policy") || !doc.at("policy").contains("beta"))
    s.policy.beta.assign(static_cast<std::size_t>(std::max(total, 0)), 0.0);

  const int need = s.time.total_steps + s.time.horizon_len;
  if (const json* x = r.object(doc, "series", "series", true)) {
    r.known_keys(*x, "series", {"outdoor_temp", "irradiance_frac", "lem_price"});
    s.series.outdoor_temp = r.series(*x, "outdoor_temp", "series", need, true);
    s.series.irradiance_frac = r.series(*x, "irradiance_frac", "series", need, true);
    s.series.lem_price = r.series(*x, "lem_price", "series", need, true);
  }

  if (doc.contains("agents")) {
    const json& agents = doc.at("agents");
    if (!agents.is_array()) {
      r.problems.push_back({"agents", "expected an array"});
    } else {
      for (std::size_t i = 0; i < agents.size(); ++i) {
        const std::string path = index_path("agents", i);
        const json& a = agents[i];
        if (!a.is_object()) {
          r.problems.push_back({path, "expected an object"});
          continue;
        }
        r.known_keys(a, path, {"id", "gamma", "eps_lo", "eps_hi", "fixed_load", "devices"});
        CmaSpec spec;
        spec.id = r.string(a, "id", path, "", true);
        spec.gamma = r.number(a, "gamma", path, 0.0, true);
        spec.eps_lo = r.number(a, "eps_lo", path, spec.eps_lo);
        spec.eps_hi = r.number(a, "eps_hi", path, spec.eps_hi);
        spec.fixed_load = r.series(a, "fixed_load", path, need, false);
        if (!a.contains("fixed_load")) spec.fixed_load.assign(static_cast<std::size_t>(std::max(need, 0)), 0.0);
        if (a.contains("devices")) {
          const json& devs = a.at("devices");
          if (!devs.is_array()) {
            r.problems.push_back({path + ".devices", "expected an array"});
          } else {
            for (std::size_t d = 0; d < devs.size(); ++d) {
              const std::string dp = index_path(path + ".devices", d);
              if (!devs[d].is_object()) {
                r.problems.push_back({dp, "expected an object"});
                continue;
              }
              spec.devices.push_back(parse_device(r, devs[d], dp, total));
            }
          }
        }
        s.agents.push_back(std::move(spec));
      }
    }
  }
  if (!r.problems.empty()) throw Error(ErrorKind::kParse, "scenario could not be read", std::move(r.problems));

  if (s.time.pad_cyclic && need > 0) {
    const int period = s.time.dt_hours > 0.0 ? s.time.steps_per_day() : 1;
    const auto target = static_cast<std::size_t>(need);
    s.series.outdoor_temp = pad(std::move(s.series.outdoor_temp), target, period);
    s.series.irradiance_frac = pad(std::move(s.series.irradiance_frac), target, period);
    s.series.lem_price = pad(std::move(s.series.lem_price), target, period);
    for (CmaSpec& a : s.agents) a.fixed_load = pad(std::move(a.fixed_load), target, period);
  }
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  const json doc = read_scenario_document(path);
  return parse_scenario(doc, path.parent_path());
}

namespace {

json device_to_json(const Device& device) {
  auto battery = [](const BatteryParams& p, const char* type) {
    return json{{"type", type},
                {"id", p.id},
                {"self_discharge", p.self_discharge},
                {"efficiency", p.efficiency},
                {"capacity_kwh", p.capacity_kwh},
                {"p_min", p.p_min},
                {"p_max", p.p_max},
                {"soc_min", p.soc_min},
                {"soc_max", p.soc_max},
                {"soc_init", p.soc_init}};
  };
  switch (device_kind(device)) {
    case DeviceKind::kBattery: return battery(std::get<BatteryParams>(device), "battery");
    case DeviceKind::kEv: {
      const auto& p = std::get<EvParams>(device);
      json j = battery(p.battery, "ev");
      j["away_window"] = {p.away_start, p.away_end};
      j["soc_target"] = p.soc_target;
      j["target_step"] = p.target_step;
      return j;
    }
    case DeviceKind::kHeatPump: {
      const auto& p = std::get<HpParams>(device);
      return json{{"type", "heat_pump"}, {"id", p.id},       {"r_th", p.r_th},   {"c_th", p.c_th},
                  {"cop", p.cop},        {"p_rated", p.p_rated}, {"t_min", p.t_min}, {"t_max", p.t_max},
                  {"t_setpoint", p.t_setpoint}, {"t_init", p.t_init}};
    }
    case DeviceKind::kPv: {
      const auto& p = std::get<PvParams>(device);
      return json{{"type", "pv"}, {"id", p.id}, {"p_rated", p.p_rated}};
    }
  }
  return {};
}

}  // namespace

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["time"] = {{"dt_hours", s.time.dt_hours},
                 {"total_steps", s.time.total_steps},
                 {"horizon_len", s.time.horizon_len},
                 {"pad_cyclic", s.time.pad_cyclic}};
  doc["units"] = {{"temperature", s.temperature_unit}};
  doc["weights"] = {{"alpha_cyc", s.weights.alpha_cyc},
                    {"xi_ev", s.weights.xi_ev},
                    {"xi_ac", s.weights.xi_ac},
                    {"xi_pv", s.weights.xi_pv},
                    {"utilization", s.weights.utilization}};
  doc["policy"] = {{"beta", s.policy.beta},
                   {"clip_to_positivity", s.policy.clip_to_positivity},
                   {"clip_to_no_saturation", s.policy.clip_to_no_saturation}};
  doc["solver"] = {{"tol", s.solver.tol},
                   {"max_iter", s.solver.max_iter},
                   {"node_limit", s.solver.node_limit},
                   {"local_search_passes", s.solver.local_search_passes},
                   {"gap_tol", s.solver.gap_tol}};
  doc["series"] = {{"outdoor_temp", s.series.outdoor_temp},
                   {"irradiance_frac", s.series.irradiance_frac},
                   {"lem_price", s.series.lem_price}};
  json agents = json::array();
  for (const CmaSpec& a : s.agents) {
    json devices = json::array();
    for (const Device& d : a.devices) devices.push_back(device_to_json(d));
    agents.push_back({{"id", a.id},
                      {"gamma", a.gamma},
                      {"eps_lo", a.eps_lo},
                      {"eps_hi", a.eps_hi},
                      {"fixed_load", a.fixed_load},
                      {"devices", devices}});
  }
  doc["agents"] = agents;
  return doc;
}

std::vector<double> read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kFileMissing, "series file not found: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, "series file is empty: " + path.string());
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (comma == std::string::npos) throw Error(ErrorKind::kParse, "expected 'step,value' at " + where);
    try {
      std::size_t used = 0;
      const long step = std::stol(line.substr(0, comma));
      const std::string rest = line.substr(comma + 1);
      const double value = std::stod(rest, &used);
      if (rest.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("trailing text");
      if (step != static_cast<long>(values.size()))
        throw Error(ErrorKind::kParse, "steps must be consecutive from 0 at " + where);
      values.push_back(value);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kParse, "malformed number at " + where);
    }
  }
  return values;
}

void write_series_csv(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kFileMissing, "cannot write " + path.string());
  out.precision(17);
  out << "step,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << i << "," << values[i] << "\n";
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorKind::kValidation, "override must look like key=value", {{"override", assignment}});
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> segments;
  while (std::getline(parts, part, '.')) segments.push_back(part);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const std::string& seg = segments[i];
    const bool last = i + 1 == segments.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(seg);
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::kValidation, "array index expected in override", {{key, seg}});
      }
      if (idx >= node->size()) throw Error(ErrorKind::kValidation, "override index out of range", {{key, seg}});
      node = &(*node)[idx];
    } else if (node->is_object() || node->is_null()) {
      if (!last && !node->contains(seg)) (*node)[seg] = json::object();
      node = &(*node)[seg];
    } else {
      throw Error(ErrorKind::kValidation, "override path descends into a scalar", {{key, seg}});
    }
  }
  *node = value;
}

std::vector<std::vector<DeviceState>> initial_states(const Scenario& s) {
  std::vector<std::vector<DeviceState>> out;
  for (const CmaSpec& a : s.agents) {
    std::vector<DeviceState> states;
    for (const Device& d : a.devices) states.push_back(initial_state(d));
    out.push_back(std::move(states));
  }
  return out;
}

HorizonView slice_horizon(const Scenario& s, int t_start) { return slice_horizon(s, t_start, initial_states(s)); }

HorizonView slice_horizon(const Scenario& s, int t_start, std::vector<std::vector<DeviceState>> states) {
  const int h = s.time.horizon_len;
  std::size_t available = std::min({s.series.outdoor_temp.size(), s.series.irradiance_frac.size(),
                                    s.series.lem_price.size()});
  for (const CmaSpec& a : s.agents) available = std::min(available, a.fixed_load.size());
  if (t_start < 0 || static_cast<std::size_t>(t_start) + static_cast<std::size_t>(h) > available)
    throw Error(ErrorKind::kOutOfRange, "horizon starting at step " + std::to_string(t_start) +
                                            " leaves the series (length " + std::to_string(available) + ")");
  require(states.size() == s.agents.size(), ErrorKind::kDimension, "one state vector per agent required");
  HorizonView v;
  v.t_start = t_start;
  v.length = h;
  v.dt_hours = s.time.dt_hours;
  v.total_steps = s.time.total_steps;
  v.steps_per_day = s.time.steps_per_day();
  auto window = [&](const std::vector<double>& x) {
    return std::vector<double>(x.begin() + t_start, x.begin() + t_start + h);
  };
  v.outdoor_temp = window(s.series.outdoor_temp);
  v.irradiance_frac = window(s.series.irradiance_frac);
  v.lem_price = window(s.series.lem_price);
  for (const CmaSpec& a : s.agents) v.fixed_load.push_back(window(a.fixed_load));
  v.states = std::move(states);
  return v;
}

}  // namespace flexmarket
