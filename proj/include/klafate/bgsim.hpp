#pragma once

// Seeded simulator of the four-station bulk good system. Produces variable
// snapshots with the names declared in the workbook and product-completion
// events, with recipe-dependent silo dynamics and fault injection.
//
// Dynamic parameters are reconstructions tuned to the reported window means,
// not measured plant data.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "klafate/error.hpp"
#include "klafate/ruledsl.hpp"

namespace klafate::bgsim {

// mt19937_64 output is fixed by the standard; the distributions are not, so
// uniform and normal draws are done here to keep traces identical across
// standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(); // [0, 1)
  double normal();  // standard normal, Box-Muller

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct Recipe {
  std::string label;
  double suction_time_s = 5.0;
  double discharge_time_ms = 2000.0;
  double motor_rpm = 1500.0;
  double dosing_weight_g = 50.0;
  double nominal_rate = 3.4;   // prod/min with a full silo
  double estimated_rate = 3.4; // target the recipe was proposed with
  double replenish_threshold = 0.8;
  double replenish_per_suction_s = 0.007; // silo fraction per minute per second of suction
  double consumption_per_product = 0.01;   // silo fraction
  double noise_stddev = 0.15;              // prod/min

  void validate() const;
};

const std::vector<Recipe>& builtin_recipes();
const Recipe& builtin_recipe(std::string_view label);

enum class Fault { AirValveClosed, VacuumPumpOff, SiloEmpty, WeighingOutOfRange };

std::string_view fault_name(Fault f);
Fault parse_fault(std::string_view name); // throws NotFound
const std::vector<Fault>& all_faults();

inline constexpr double kNominalPressure = 6.0; // bar
inline constexpr double kInitialSiloLevel = 0.9;
inline constexpr double kSiloMinLevel = 0.05;

struct PlantState {
  double clock = 0.0; // s
  double silo_level = kInitialSiloLevel;
  double pressure = kNominalPressure;
  bool motor_on = true;
  bool vacuum_running = true;
  bool container_available = true;
  bool out_of_weighing_range = false;
  std::uint64_t products = 0;
  double accumulator = 0.0;    // fractional product
  double noise = 0.0;          // current per-minute noise draw
  std::int64_t noise_minute = -1;
  std::set<Fault> faults;

  bool operator==(const PlantState&) const = default;
};

struct TickResult {
  std::vector<double> completions; // product timestamps inside the tick
  double replenished = 0.0;
  double consumed = 0.0;
};

// Rate the recipe yields at the current silo level, before noise.
double model_rate(const PlantState& state, const Recipe& recipe);

TickResult tick(PlantState& state, const Recipe& recipe, double dt, Rng& rng);

void inject_fault(PlantState& state, Fault fault);
void clear_fault(PlantState& state, Fault fault);

rules::Snapshot snapshot(const PlantState& state, const Recipe& recipe);

// Names snapshot() always provides.
std::vector<std::string> snapshot_variables();

// --- scenarios ------------------------------------------------------------

struct ScenarioCommand {
  enum class Kind { Inject, Clear, Recipe };
  double at = 0.0;
  Kind kind = Kind::Inject;
  std::string argument;
  bool operator==(const ScenarioCommand&) const = default;
};

class ScenarioError : public Error {
public:
  ScenarioError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Line form (`at <s> inject|clear <fault>`, `at <s> recipe <label>`, `#`
// comments) or CSV with header `at,action,argument`. Commands are returned
// sorted by time, stable for equal times.
std::vector<ScenarioCommand> parse_scenario(std::string_view text);
std::vector<ScenarioCommand> load_scenario(const std::string& path);

struct TraceEvent {
  double time = 0.0;
  std::string event; // product | recipe | inject | clear
  std::string value;
  bool operator==(const TraceEvent&) const = default;
};

class Simulator {
public:
  Simulator(std::uint64_t seed, const Recipe& recipe = builtin_recipe("NP"));

  void apply(const ScenarioCommand& cmd);
  void set_recipe(const Recipe& recipe);
  void inject(Fault f);
  void clear(Fault f);

  TickResult step(double dt = 1.0);
  // Steps with dt until the clock reaches `t`, applying scheduled commands
  // at tick boundaries.
  void run_until(double t, double dt = 1.0);
  void schedule(std::vector<ScenarioCommand> commands);

  const PlantState& state() const noexcept { return state_; }
  const Recipe& recipe() const noexcept { return recipe_; }
  rules::Snapshot snapshot() const { return bgsim::snapshot(state_, recipe_); }
  const std::vector<TraceEvent>& trace() const noexcept { return trace_; }
  std::vector<double> completions() const;

private:
  void apply_due();

  PlantState state_;
  Recipe recipe_;
  Rng rng_;
  std::vector<ScenarioCommand> pending_;
  std::size_t next_pending_ = 0;
  std::vector<TraceEvent> trace_;
};

// CSV with header `time,event,value`.
std::string trace_to_csv(const std::vector<TraceEvent>& trace);
std::vector<TraceEvent> trace_from_csv(std::string_view text);

// Completion timestamps and the last recipe label found in a trace.
std::vector<double> trace_completions(const std::vector<TraceEvent>& trace);
std::optional<std::string> trace_recipe(const std::vector<TraceEvent>& trace);

} // namespace klafate::bgsim
