#include "klafate/bgsim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "klafate/csv.hpp"

namespace klafate::bgsim {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

void Recipe::validate() const {
  if (label.empty()) throw InvalidParameter("recipe label is empty");
  if (!(nominal_rate > 0.0)) throw InvalidParameter("recipe " + label + ": nominal rate must be positive");
  if (!(suction_time_s > 0.0)) throw InvalidParameter("recipe " + label + ": suction time must be positive");
  if (!(replenish_threshold > 0.0 && replenish_threshold <= 1.0)) {
    throw InvalidParameter("recipe " + label + ": replenish threshold must lie in (0,1]");
  }
  if (!(noise_stddev >= 0.0)) throw InvalidParameter("recipe " + label + ": negative noise");
}

const std::vector<Recipe>& builtin_recipes() {
  static const std::vector<Recipe> recipes = [] {
    Recipe np;
    np.label = "NP";
    np.suction_time_s = 5.0;
    np.nominal_rate = 3.4;
    np.estimated_rate = 3.4;

    Recipe x1 = np;
    x1.label = "X1";
    x1.suction_time_s = 4.0;
    x1.motor_rpm = 1200.0;
    x1.dosing_weight_g = 60.0;
    x1.nominal_rate = 2.9;
    x1.estimated_rate = 4.0;

    Recipe x2 = np;
    x2.label = "X2";
    x2.suction_time_s = 3.0;
    x2.motor_rpm = 1800.0;
    x2.dosing_weight_g = 45.0;
    x2.nominal_rate = 4.6;
    x2.estimated_rate = 4.2;
    return std::vector<Recipe>{np, x1, x2};
  }();
  return recipes;
}

const Recipe& builtin_recipe(std::string_view label) {
  for (const auto& r : builtin_recipes()) {
    if (r.label == label) return r;
  }
  throw NotFound("unknown recipe '" + std::string(label) + "'");
}

std::string_view fault_name(Fault f) {
  switch (f) {
  case Fault::AirValveClosed: return "air_valve_closed";
  case Fault::VacuumPumpOff: return "vacuum_pump_off";
  case Fault::SiloEmpty: return "silo_empty";
  case Fault::WeighingOutOfRange: return "weighing_out_of_range";
  }
  return "";
}

const std::vector<Fault>& all_faults() {
  static const std::vector<Fault> faults{Fault::AirValveClosed, Fault::VacuumPumpOff,
                                         Fault::SiloEmpty, Fault::WeighingOutOfRange};
  return faults;
}

Fault parse_fault(std::string_view name) {
  for (Fault f : all_faults()) {
    if (fault_name(f) == name) return f;
  }
  throw NotFound("unknown fault '" + std::string(name) + "'");
}

double model_rate(const PlantState& state, const Recipe& recipe) {
  if (!state.motor_on || !state.container_available) return 0.0;
  const double level = std::clamp(state.silo_level, 0.0, 1.0);
  if (level >= recipe.replenish_threshold) return recipe.nominal_rate;
  return recipe.nominal_rate * std::sqrt(level / recipe.replenish_threshold);
}

TickResult tick(PlantState& state, const Recipe& recipe, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw InvalidParameter("tick needs dt > 0");
  TickResult out;
  const auto minute = static_cast<std::int64_t>(std::floor(state.clock / 60.0));
  if (minute != state.noise_minute) {
    state.noise = recipe.noise_stddev * rng.normal();
    state.noise_minute = minute;
  }
  const double rate = std::max(0.0, model_rate(state, recipe) + state.noise);
  const double start = state.clock;
  const double level_before = state.silo_level;

  // Completions are stamped at the end of the tick in which they finish.
  state.accumulator += rate * dt / 60.0;
  while (state.accumulator >= 1.0) {
    state.accumulator -= 1.0;
    out.completions.push_back(start + dt);
    ++state.products;
  }

  out.consumed = std::min(level_before,
                          static_cast<double>(out.completions.size()) * recipe.consumption_per_product);
  double supply = 0.0;
  if (state.vacuum_running && !state.faults.contains(Fault::SiloEmpty)) {
    supply = recipe.suction_time_s * recipe.replenish_per_suction_s * dt / 60.0;
  }
  const double after_consumption = level_before - out.consumed;
  out.replenished = std::min(supply, 1.0 - after_consumption);
  state.silo_level = after_consumption + out.replenished;
  state.clock = start + dt;
  return out;
}

void inject_fault(PlantState& state, Fault fault) {
  state.faults.insert(fault);
  switch (fault) {
  case Fault::AirValveClosed: state.pressure = 0.0; break;
  case Fault::VacuumPumpOff: state.vacuum_running = false; break;
  case Fault::SiloEmpty: state.silo_level = 0.0; break;
  case Fault::WeighingOutOfRange: state.out_of_weighing_range = true; break;
  }
}

void clear_fault(PlantState& state, Fault fault) {
  state.faults.erase(fault);
  switch (fault) {
  case Fault::AirValveClosed: state.pressure = kNominalPressure; break;
  case Fault::VacuumPumpOff: state.vacuum_running = true; break;
  case Fault::SiloEmpty: state.silo_level = kInitialSiloLevel; break;
  case Fault::WeighingOutOfRange: state.out_of_weighing_range = false; break;
  }
}

rules::Snapshot snapshot(const PlantState& state, const Recipe& recipe) {
  rules::Snapshot s;
  s.timestamp = state.clock;
  const double suction = state.vacuum_running ? recipe.suction_time_s : 0.0;
  const double vacuum_ms = suction * 1000.0;
  const double level_pct = state.silo_level * 100.0;
  const bool silo_low = state.silo_level < kSiloMinLevel;
  const double belt = state.motor_on ? recipe.motor_rpm : 0.0;

  for (const char* station : {"loading", "storage", "weighing", "filling"}) {
    const std::string p(station);
    s.set(p + ".vacuum_time", vacuum_ms);
    s.set(p + ".discharge_flap_open_time", recipe.discharge_time_ms);
    s.set(p + ".actual_pressure", state.pressure);
  }
  for (const char* station : {"loading", "storage", "weighing"}) {
    const std::string p(station);
    s.set(p + ".filling_height_min_state", silo_low);
    s.set(p + ".filling_height_max_value", std::min(100.0, level_pct + 5.0));
    s.set(p + ".filling_height_min_value", level_pct);
    s.set(p + ".overflow_value", level_pct >= 99.0 ? level_pct - 99.0 : 0.0);
  }
  s.set("loading.motor_on", state.motor_on);
  s.set("loading.belt_conveyor_actual_speed", belt);
  s.set("loading.belt_conveyor_setpoint_speed", recipe.motor_rpm);
  s.set("storage.vibration_conveyor", state.motor_on);
  s.set("weighing.out_of_weighing_range", state.out_of_weighing_range);
  s.set("weighing.dosing_motor_register", recipe.dosing_weight_g);
  s.set("weighing.dosing_motor_actual_speed", belt);
  s.set("weighing.dosing_motor_setpoint_speed", recipe.motor_rpm);
  s.set("weighing.system_mode", 1.0);
  s.set("filling.container_available", state.container_available);
  s.set("system.suction_time", suction);
  s.set("system.production_rate", model_rate(state, recipe));
  s.set("system.silo_level", state.silo_level);
  return s;
}

std::vector<std::string> snapshot_variables() {
  const auto s = snapshot(PlantState{}, builtin_recipe("NP"));
  std::vector<std::string> names;
  for (const auto& [k, v] : s.values) names.push_back(k);
  return names;
}

// --- scenarios ------------------------------------------------------------

ScenarioError::ScenarioError(std::size_t line, const std::string& message)
    : Error("scenario line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

double parse_time(const std::string& text, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v) || v < 0.0) {
    throw ScenarioError(line, "bad time '" + text + "'");
  }
  return v;
}

ScenarioCommand make_command(const std::string& at, const std::string& action,
                             const std::string& arg, std::size_t line) {
  ScenarioCommand c;
  c.at = parse_time(at, line);
  if (action == "inject") {
    c.kind = ScenarioCommand::Kind::Inject;
  } else if (action == "clear") {
    c.kind = ScenarioCommand::Kind::Clear;
  } else if (action == "recipe") {
    c.kind = ScenarioCommand::Kind::Recipe;
  } else {
    throw ScenarioError(line, "unknown action '" + action + "'");
  }
  if (arg.empty()) throw ScenarioError(line, "missing argument");
  try {
    if (c.kind == ScenarioCommand::Kind::Recipe) {
      builtin_recipe(arg);
    } else {
      parse_fault(arg);
    }
  } catch (const NotFound& e) {
    throw ScenarioError(line, e.what());
  }
  c.argument = arg;
  return c;
}

} // namespace

std::vector<ScenarioCommand> parse_scenario(std::string_view text) {
  std::vector<ScenarioCommand> out;
  if (text.substr(0, 18) == "at,action,argument") {
    const auto rows = csv::parse(text);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 3) throw ScenarioError(i + 1, "expected 3 fields");
      out.push_back(make_command(rows[i][0], rows[i][1], rows[i][2], i + 1));
    }
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream words(line);
      std::vector<std::string> w;
      for (std::string t; words >> t;) w.push_back(t);
      if (w.empty()) continue;
      if (w.size() != 4 || w[0] != "at") {
        throw ScenarioError(n, "expected 'at <seconds> <action> <argument>'");
      }
      out.push_back(make_command(w[1], w[2], w[3], n));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScenarioCommand& a, const ScenarioCommand& b) { return a.at < b.at; });
  return out;
}

std::vector<ScenarioCommand> load_scenario(const std::string& path) {
  return parse_scenario(csv::read_file(path));
}

// --- simulator ------------------------------------------------------------

Simulator::Simulator(std::uint64_t seed, const Recipe& recipe) : recipe_(recipe), rng_(seed) {
  recipe_.validate();
  trace_.push_back({0.0, "recipe", recipe_.label});
}

void Simulator::set_recipe(const Recipe& recipe) {
  recipe.validate();
  recipe_ = recipe;
  trace_.push_back({state_.clock, "recipe", recipe_.label});
}

void Simulator::inject(Fault f) {
  inject_fault(state_, f);
  trace_.push_back({state_.clock, "inject", std::string(fault_name(f))});
}

void Simulator::clear(Fault f) {
  clear_fault(state_, f);
  trace_.push_back({state_.clock, "clear", std::string(fault_name(f))});
}

void Simulator::apply(const ScenarioCommand& cmd) {
  switch (cmd.kind) {
  case ScenarioCommand::Kind::Inject: inject(parse_fault(cmd.argument)); break;
  case ScenarioCommand::Kind::Clear: clear(parse_fault(cmd.argument)); break;
  case ScenarioCommand::Kind::Recipe: set_recipe(builtin_recipe(cmd.argument)); break;
  }
}

void Simulator::schedule(std::vector<ScenarioCommand> commands) {
  std::vector<ScenarioCommand> rest(pending_.begin() + static_cast<std::ptrdiff_t>(next_pending_),
                                    pending_.end());
  rest.insert(rest.end(), commands.begin(), commands.end());
  std::stable_sort(rest.begin(), rest.end(),
                   [](const ScenarioCommand& a, const ScenarioCommand& b) { return a.at < b.at; });
  pending_ = std::move(rest);
  next_pending_ = 0;
}

void Simulator::apply_due() {
  while (next_pending_ < pending_.size() && pending_[next_pending_].at <= state_.clock + 1e-9) {
    apply(pending_[next_pending_]);
    ++next_pending_;
  }
}

TickResult Simulator::step(double dt) {
  apply_due();
  auto r = tick(state_, recipe_, dt, rng_);
  for (double t : r.completions) trace_.push_back({t, "product", "1"});
  return r;
}

void Simulator::run_until(double t, double dt) {
  while (state_.clock + 1e-9 < t) step(dt);
  apply_due();
}

std::vector<double> Simulator::completions() const { return trace_completions(trace_); }

std::string trace_to_csv(const std::vector<TraceEvent>& trace) {
  std::vector<csv::Row> rows{{"time", "event", "value"}};
  rows.reserve(trace.size() + 1);
  for (const auto& e : trace) rows.push_back({rules::format_number(e.time), e.event, e.value});
  return csv::format(rows);
}

std::vector<TraceEvent> trace_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != csv::Row{"time", "event", "value"}) {
    throw InvalidParameter("trace CSV must start with header time,event,value");
  }
  std::vector<TraceEvent> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) {
      throw InvalidParameter("trace row " + std::to_string(i + 1) + ": expected 3 fields");
    }
    double t = 0.0;
    const auto& f = rows[i][0];
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), t);
    if (ec != std::errc() || ptr != f.data() + f.size()) {
      throw InvalidParameter("trace row " + std::to_string(i + 1) + ": bad time '" + f + "'");
    }
    out.push_back({t, rows[i][1], rows[i][2]});
  }
  return out;
}

std::vector<double> trace_completions(const std::vector<TraceEvent>& trace) {
  std::vector<double> out;
  for (const auto& e : trace) {
    if (e.event == "product") out.push_back(e.time);
  }
  return out;
}

std::optional<std::string> trace_recipe(const std::vector<TraceEvent>& trace) {
  std::optional<std::string> label;
  for (const auto& e : trace) {
    if (e.event == "recipe") label = e.value;
  }
  return label;
}

} // namespace klafate::bgsim
