#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <thread>

#include "CLI11.hpp"
#include "klafate/backend/engine.hpp"
#include "klafate/backend/http.hpp"
#include "klafate/csv.hpp"
#include "klafate/experiment.hpp"
#include "klafate/snapshot_csv.hpp"

namespace fs = std::filesystem;
using namespace klafate;
using backend::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

enum class Format { Text, Csv, Json };

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void emit(const Json& j) { std::cout << backend::dump(j) << '\n'; }

std::vector<bgsim::TraceEvent> load_trace(const std::string& path) {
  return bgsim::trace_from_csv(csv::read_file(path));
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw InvalidParameter("bad " + what + " '" + text + "'");
  return v;
}

// "X1=4.0,X2=4.2"
std::map<std::string, double> parse_targets(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InvalidParameter("target '" + item + "' must look like RECIPE=RATE");
    }
    out[item.substr(0, eq)] = parse_number(item.substr(eq + 1), "target rate");
  }
  return out;
}

weights::WeightBook weights_for(const fmea::Workbook& wb, const knowledge::KnowledgeModel& model,
                                const std::optional<std::string>& log_dir) {
  const double panel = weights::assess_panel(wb).panel;
  weights::WeightBook book(model.frame().labels(), panel);
  if (!log_dir) return book;
  backend::EventStore store(*log_dir);
  auto replayed = backend::replay_weights(store.records(), store.load_snapshot());
  for (const auto& [id, w] : replayed.all()) {
    if (book.contains(id)) book.set(w);
  }
  return book;
}

// --- subcommands ------------------------------------------------------------

int cmd_validate(const std::string& dir, Format fmt) {
  try {
    const auto wb = fmea::load_workbook(dir);
    const auto n = wb.system_fms.size();
    if (fmt == Format::Json) {
      emit(Json{{"ok", true}, {"system_fms", n}, {"exclusive", true}});
    } else if (fmt == Format::Csv) {
      std::cout << csv::format({{"ok", "system_fms", "exclusive"},
                                {"true", std::to_string(n), "true"}});
    } else {
      std::cout << "OK: " << n << " system FMs, mutual exclusivity verified\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    if (fmt == Format::Json) {
      emit(Json{{"ok", false}, {"error", e.what()}});
    } else if (fmt == Format::Csv) {
      std::cout << csv::format({{"ok", "error"}, {"false", e.what()}});
    } else {
      std::cerr << "INVALID: " << e.what() << '\n';
    }
    return kExitFailure;
  }
}

int cmd_simulate(const std::optional<std::string>& scenario, std::uint64_t seed, double minutes,
                 const std::string& recipe, const std::optional<std::string>& out,
                 const std::optional<std::string>& snapshot_out, Format fmt) {
  bgsim::Simulator sim(seed, bgsim::builtin_recipe(recipe));
  if (scenario) sim.schedule(bgsim::load_scenario(*scenario));
  sim.run_until(minutes * 60.0);
  if (snapshot_out) csv::write_file(*snapshot_out, rules::snapshot_to_csv(sim.snapshot()));
  auto trace = sim.trace();
  trace.push_back({sim.state().clock, "end", ""});

  std::string body;
  if (fmt == Format::Json) {
    Json events = Json::array();
    for (const auto& e : trace) {
      events.push_back({{"time", e.time}, {"event", e.event}, {"value", e.value}});
    }
    body = backend::dump(Json{{"seed", seed}, {"minutes", minutes}, {"trace", events}}) + "\n";
  } else {
    body = bgsim::trace_to_csv(trace);
  }
  if (out) {
    csv::write_file(*out, body);
  } else {
    std::cout << body;
  }
  return kExitOk;
}

int cmd_assess(const std::string& workbook, const std::string& snapshot_file,
               const std::optional<std::string>& log_dir, Format fmt) {
  const auto wb = fmea::load_workbook(workbook);
  const auto model = knowledge::KnowledgeModel::from_workbook(wb);
  const auto book = weights_for(wb, model, log_dir);
  const auto snap = rules::snapshot_from_csv(csv::read_file(snapshot_file));
  const auto a = knowledge::assess(model, wb, book, snap);
  backend::AssessmentMessage msg{0, a, model.frame().labels(), 0, snap.timestamp};

  if (fmt == Format::Json) {
    emit(backend::to_json(msg));
    return kExitOk;
  }
  if (fmt == Format::Csv) {
    csv::Row head{"fm_id", "label", "effect", "w_r", "uncertainty"};
    csv::Row row{a.fm_id, a.label, a.effect, a.is_fault() ? rules::format_number(a.w_r) : "",
                 rules::format_number(a.uncertainty)};
    for (std::size_t i = 0; i < model.frame().size(); ++i) {
      head.push_back("m_" + model.frame()[i]);
      row.push_back(a.is_fault() ? rules::format_number(a.evidence->masses[i]) : "");
    }
    std::cout << csv::format({head, row});
    return kExitOk;
  }
  if (!a.is_fault()) {
    std::cout << "no fault\n";
    return kExitOk;
  }
  std::printf("%s (%s): %s\n", a.fm_id.c_str(), a.label.c_str(), a.effect.c_str());
  std::printf("  w_R %.4f  U %.4f\n", a.w_r, a.uncertainty);
  for (std::size_t i = 0; i < model.frame().size(); ++i) {
    std::printf("  m(%s) = %.5f\n", model.frame()[i].c_str(), a.evidence->masses[i]);
  }
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    std::printf("  %zu. %s -> %s\n", i + 1, a.pairs[i].cause.c_str(),
                a.pairs[i].recommendation.c_str());
  }
  return kExitOk;
}

int cmd_recipe_validate(const std::vector<std::string>& traces, double window,
                        const std::vector<std::string>& target_items, double threshold,
                        const std::string& incumbent, Format fmt) {
  const auto targets = parse_targets(target_items);
  std::vector<experiment::RecipeVerdict> verdicts;
  for (const auto& path : traces) {
    const auto slot = experiment::recipe_slot(load_trace(path), window);
    auto it = targets.find(slot.recipe);
    const double target =
        it != targets.end() ? it->second : bgsim::builtin_recipe(slot.recipe).estimated_rate;
    verdicts.push_back(experiment::validate_recipe(slot, target, threshold));
  }
  std::optional<double> base;
  for (const auto& v : verdicts) {
    if (v.recipe == incumbent) base = v.rate;
  }
  auto vs = [&](const experiment::RecipeVerdict& v) -> std::optional<double> {
    if (!base || v.recipe == incumbent) return std::nullopt;
    return kpi::improvement_ratio(v.rate, *base);
  };

  if (fmt == Format::Json) {
    Json rows = Json::array();
    for (const auto& v : verdicts) {
      const auto r = vs(v);
      rows.push_back({{"recipe", v.recipe},
                      {"window_min", v.minutes},
                      {"rate", v.rate},
                      {"ma5_end", v.smoothed_end},
                      {"target", v.target},
                      {"k_v", v.verdict.k_v},
                      {"threshold", v.verdict.threshold},
                      {"horizon", kpi::horizon_name(v.verdict.horizon)},
                      {"accepted", v.verdict.accepted},
                      {"vs_incumbent", r ? Json(*r) : Json(nullptr)}});
    }
    emit(rows);
    return kExitOk;
  }
  if (fmt == Format::Csv) {
    std::vector<csv::Row> rows{{"recipe", "window_min", "rate", "ma5_end", "target", "k_v",
                                "horizon", "accepted", "vs_incumbent"}};
    for (const auto& v : verdicts) {
      const auto r = vs(v);
      rows.push_back({v.recipe, rules::format_number(v.minutes), rules::format_number(v.rate),
                      rules::format_number(v.smoothed_end), rules::format_number(v.target),
                      rules::format_number(v.verdict.k_v),
                      std::string(kpi::horizon_name(v.verdict.horizon)),
                      v.verdict.accepted ? "true" : "false", r ? rules::format_number(*r) : ""});
    }
    std::cout << csv::format(rows);
    return kExitOk;
  }
  std::printf("%-8s %6s %8s %8s %8s %7s  %-10s %s\n", "recipe", "slot", "rate", "ma5", "target",
              "K_V", "horizon", "verdict");
  for (const auto& v : verdicts) {
    const auto r = vs(v);
    std::printf("%-8s %4.0fmin %8.3f %8.3f %8.3f %7.3f  %-10s %s", v.recipe.c_str(), v.minutes,
                v.rate, v.smoothed_end, v.target, v.verdict.k_v,
                std::string(kpi::horizon_name(v.verdict.horizon)).c_str(),
                v.verdict.accepted ? "accepted" : "rejected");
    if (r) std::printf("  (x%.3f vs %s)", *r, incumbent.c_str());
    std::printf("\n");
  }
  return kExitOk;
}

int cmd_anova(const std::vector<std::string>& traces, double window, double alpha, Format fmt) {
  std::vector<experiment::TimeSlot> slots;
  for (const auto& path : traces) slots.push_back(experiment::recipe_slot(load_trace(path), window));
  const auto r = experiment::compare_slots(slots);
  const bool reject = r.p_value < alpha;
  if (fmt == Format::Json) {
    Json groups = Json::array();
    for (const auto& s : slots) groups.push_back({{"recipe", s.recipe}, {"mean", kpi::mean(s.rate)}});
    emit({{"f_statistic", r.f_statistic},
          {"p_value", r.p_value},
          {"df_between", r.df_between},
          {"df_within", r.df_within},
          {"alpha", alpha},
          {"reject_null", reject},
          {"groups", groups}});
  } else if (fmt == Format::Csv) {
    std::cout << csv::format({{"f_statistic", "p_value", "df_between", "df_within", "reject_null"},
                              {rules::format_number(r.f_statistic), rules::format_number(r.p_value),
                               rules::format_number(r.df_between), rules::format_number(r.df_within),
                               reject ? "true" : "false"}});
  } else {
    for (const auto& s : slots) {
      std::printf("%-8s n=%zu mean=%.3f\n", s.recipe.c_str(), s.rate.samples.size(),
                  kpi::mean(s.rate));
    }
    std::printf("F(%g, %g) = %.4f, p = %.4g: %s at alpha %g\n", r.df_between, r.df_within,
                r.f_statistic, r.p_value, reject ? "null rejected" : "null retained", alpha);
  }
  return kExitOk;
}

int cmd_replay(const std::string& path, std::optional<std::size_t> window, Format fmt) {
  const fs::path p(path);
  const bool is_dir = fs::is_directory(p);
  const auto log = is_dir ? p / backend::kLogFileName : p;
  const auto records = backend::read_log(log);
  auto book = backend::replay_weights(records, std::nullopt, window);

  bool snapshot_checked = false;
  if (is_dir && !window && fs::exists(p / backend::kSnapshotFileName)) {
    backend::EventStore store(p);
    if (auto snap = store.load_snapshot()) {
      if (backend::replay_weights(records, snap) != book) {
        throw backend::ReplayError("replay from snapshot differs from full replay");
      }
      snapshot_checked = true;
    }
  }

  std::size_t updates = 0;
  for (const auto& r : records) updates += r.kind == "weight_update" ? 1 : 0;

  if (fmt == Format::Json) {
    emit({{"records", records.size()},
          {"weight_updates", updates},
          {"snapshot_consistent", snapshot_checked ? Json(true) : Json(nullptr)},
          {"weights", backend::to_json(book)}});
    return kExitOk;
  }
  if (fmt == Format::Csv) {
    std::vector<csv::Row> rows{{"fm_id", "w_r", "w_ra", "samples"}};
    for (const auto& [id, w] : book.all()) {
      rows.push_back({id, rules::format_number(w.current), rules::format_number(w.accumulated),
                      std::to_string(w.history.size())});
    }
    std::cout << csv::format(rows);
    return kExitOk;
  }
  std::printf("OK: %zu records, %zu weight updates%s\n", records.size(), updates,
              snapshot_checked ? ", snapshot consistent" : "");
  for (const auto& [id, w] : book.all()) {
    std::printf("  %-6s w_R %.6f  w_Ra %.6f  (%zu samples)\n", id.c_str(), w.current,
                w.accumulated, w.history.size());
  }
  return kExitOk;
}

struct ServeArgs {
  std::string workbook;
  std::optional<std::string> scenario;
  std::uint64_t seed = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
  double acceleration = 60.0;
  std::string recipe = "NP";
  std::optional<std::string> log_dir;
  std::optional<double> minutes;
};

int cmd_serve(const ServeArgs& a) {
  const auto wb = fmea::load_workbook(a.workbook);
  const fs::path dir = a.log_dir ? fs::path(*a.log_dir) : backend::default_log_dir();
  backend::EventStore store(dir);
  backend::Bus bus;
  backend::Engine engine(wb, store, bus);

  bgsim::Simulator sim(a.seed, bgsim::builtin_recipe(a.recipe));
  if (a.scenario) sim.schedule(bgsim::load_scenario(*a.scenario));
  backend::SimulatorSource source(std::move(sim));

  backend::RunnerOptions ro;
  ro.poll_period = std::chrono::milliseconds(
      std::max<long long>(1, static_cast<long long>(1000.0 / a.acceleration)));
  backend::ServiceRunner runner(engine, source, bus, ro);
  backend::HttpGateway gateway(runner, bus);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  runner.start();
  const int port = gateway.start(a.host, a.port);
  std::printf("klafate serving on http://%s:%d (log %s)\n", a.host.c_str(), port,
              dir.string().c_str());
  std::fflush(stdout);

  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (a.minutes) {
      const auto m = runner.query([](const backend::Engine& e) { return e.metrics_json(); }).get();
      if (m["kpi"].contains("sim_time") && m["kpi"]["sim_time"].get<double>() >= *a.minutes * 60) {
        break;
      }
    }
  }
  gateway.stop();
  runner.stop();
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"klafate: evidential production assessment"};
  app.require_subcommand(1);
  std::string format_name = "text";
  app.add_option("--format", format_name, "Output format")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  std::string workbook;
  auto* validate = app.add_subcommand("validate", "Load and check a workbook");
  validate->add_option("workbook", workbook, "Workbook directory")->required();

  std::optional<std::string> scenario;
  std::uint64_t seed = 0;
  double minutes = 30.0;
  std::string recipe = "NP";
  std::optional<std::string> out;
  auto* simulate = app.add_subcommand("simulate", "Run the plant simulator and write a trace");
  simulate->add_option("scenario", scenario, "Scenario file");
  simulate->add_option("--seed", seed, "RNG seed")->required();
  simulate->add_option("--minutes", minutes, "Plant minutes to simulate")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--recipe", recipe, "Initial recipe");
  simulate->add_option("--out", out, "Trace file (default stdout)");
  std::optional<std::string> snapshot_out;
  simulate->add_option("--snapshot-out", snapshot_out, "Write the final snapshot as CSV");

  std::string snapshot_file;
  std::optional<std::string> log_dir;
  auto* assess = app.add_subcommand("assess", "Assess one snapshot");
  assess->add_option("--workbook", workbook, "Workbook directory")->required();
  assess->add_option("--snapshot", snapshot_file, "Snapshot CSV (variable,value)")->required();
  assess->add_option("--log-dir", log_dir, "Event log to take weights from");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the backend against the simulator");
  serve->add_option("--workbook", serve_args.workbook, "Workbook directory")->required();
  serve->add_option("--scenario", serve_args.scenario, "Scenario file");
  serve->add_option("--seed", serve_args.seed, "Simulator seed")->required();
  serve->add_option("--host", serve_args.host, "Bind address");
  serve->add_option("--port", serve_args.port, "HTTP port, 0 for any")->check(CLI::Range(0, 65535));
  serve->add_option("--acceleration", serve_args.acceleration, "Plant seconds per wall second")
      ->check(CLI::PositiveNumber);
  serve->add_option("--recipe", serve_args.recipe, "Initial recipe");
  serve->add_option("--log-dir", serve_args.log_dir, "Event log directory");
  serve->add_option("--minutes", serve_args.minutes, "Stop after this many plant minutes");

  std::vector<std::string> traces;
  double window = 30.0;
  std::vector<std::string> target_items;
  double threshold = kpi::kDefaultAcceptance;
  std::string incumbent = "NP";
  auto* rv = app.add_subcommand("recipe-validate", "K_V verdict per recipe trace");
  rv->add_option("--traces", traces, "Trace CSV files")->required()->delimiter(',');
  rv->add_option("--window", window, "Time slot in minutes")->check(CLI::PositiveNumber);
  rv->add_option("--targets", target_items, "RECIPE=RATE overrides")->delimiter(',');
  rv->add_option("--threshold", threshold, "Acceptance threshold");
  rv->add_option("--incumbent", incumbent, "Recipe the others are compared with");

  double alpha = 0.05;
  auto* anova = app.add_subcommand("anova", "One-way ANOVA over recipe traces");
  anova->add_option("traces", traces, "Trace CSV files")->required()->expected(2, -1);
  anova->add_option("--window", window, "Time slot in minutes")->check(CLI::PositiveNumber);
  anova->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));

  std::string log_path;
  std::optional<std::size_t> replay_window;
  auto* replay = app.add_subcommand("replay", "Rebuild weights from an event log");
  replay->add_option("log", log_path, "Log file or log directory")->required();
  replay->add_option("--window", replay_window, "History window for w_Ra");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const Format fmt = format_name == "json"  ? Format::Json
                     : format_name == "csv" ? Format::Csv
                                            : Format::Text;
  try {
    if (*validate) return cmd_validate(workbook, fmt);
    if (*simulate) return cmd_simulate(scenario, seed, minutes, recipe, out, snapshot_out, fmt);
    if (*assess) return cmd_assess(workbook, snapshot_file, log_dir, fmt);
    if (*serve) return cmd_serve(serve_args);
    if (*rv) return cmd_recipe_validate(traces, window, target_items, threshold, incumbent, fmt);
    if (*anova) return cmd_anova(traces, window, alpha, fmt);
    if (*replay) return cmd_replay(log_path, replay_window, fmt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
