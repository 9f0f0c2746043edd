#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "klafate/backend/event_store.hpp"
#include "support.hpp"

using namespace klafate;
using namespace klafate::backend;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(KLAFATE_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fx(const std::string& name) { return testsupport::fixture(name).string(); }

// Output must survive parse and re-serialization unchanged.
Json round_trip(const std::string& text) {
  auto line = text;
  if (!line.empty() && line.back() == '\n') line.pop_back();
  const auto j = Json::parse(line);
  CHECK(dump(j) == line);
  return j;
}

} // namespace

TEST_CASE("exit codes") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("simulate --minutes 1").code == 2); // seed is mandatory
  CHECK(run("--format xml validate " + fx("bgs.fmea")).code == 2);
  CHECK(run("validate " + fx("bgs.fmea")).code == 0);
  CHECK(run("validate " + fx("broken.fmea")).code == 1);
  CHECK(run("assess --workbook " + fx("bgs.fmea") + " --snapshot /nonexistent.csv").code == 1);
}

TEST_CASE("validate messages") {
  CHECK(run("validate " + fx("bgs.fmea")).out ==
        "OK: 3 system FMs, mutual exclusivity verified\n");
  const auto j = round_trip(run("--format json validate " + fx("broken.fmea")).out);
  CHECK(j["ok"] == false);
  CHECK(j["error"].get<std::string>().find("row 8") != std::string::npos);
}

TEST_CASE("assess json matches the protocol serializer") {
  const auto r = run("--format json assess --workbook " + fx("bgs.fmea") + " --snapshot " +
                     fx("snapshots/air_valve_closed.csv"));
  REQUIRE(r.code == 0);
  const auto j = round_trip(r.out);
  CHECK(j["fm_id"] == "LQ");
  CHECK(j["pairs"].size() == 2);
  CHECK(j["evidence"].size() == 4);

  const auto quiet = round_trip(run("--format json assess --workbook " + fx("bgs.fmea") +
                                    " --snapshot " + fx("snapshots/normal.csv"))
                                    .out);
  CHECK(quiet["fm_id"] == "no_fault");
}

TEST_CASE("simulate, recipe-validate and anova") {
  const auto dir = testsupport::scratch_dir("cli");
  for (const char* r : {"NP", "X1", "X2"}) {
    const auto path = (dir / (std::string(r) + ".csv")).string();
    REQUIRE(run("simulate --seed 7 --minutes 30 --recipe " + std::string(r) + " --out " + path)
                .code == 0);
  }
  const auto traces = (dir / "NP.csv").string() + "," + (dir / "X1.csv").string() + "," +
                      (dir / "X2.csv").string();
  const auto v = run("--format json recipe-validate --window 10 --traces " + traces);
  REQUIRE(v.code == 0);
  const auto rows = round_trip(v.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1]["recipe"] == "X1");
  CHECK(rows[1]["k_v"].get<double>() == doctest::Approx(0.725).epsilon(0.03 / 0.725));
  CHECK(rows[1]["accepted"] == false);
  CHECK(rows[2]["accepted"] == true);

  const auto overridden =
      round_trip(run("--format json recipe-validate --window 10 --targets X1=2.9 --traces " +
                     (dir / "X1.csv").string())
                     .out);
  CHECK(overridden[0]["target"] == 2.9);
  CHECK(run("recipe-validate --window 60 --traces " + traces).code == 1);

  const auto a = round_trip(run("--format json anova " + (dir / "NP.csv").string() + " " +
                                (dir / "X1.csv").string() + " " + (dir / "X2.csv").string())
                                .out);
  CHECK(a["reject_null"] == true);
  CHECK(a["p_value"].get<double>() < 0.05);
  fs::remove_all(dir);
}

TEST_CASE("replay") {
  const auto dir = testsupport::scratch_dir("cli-replay");
  {
    EventStore store(dir);
    auto w = weights::prior_weight("LQ", 0.71, 1.0);
    store.append("weight_update", weight_update_payload(w, "prior"), 1.0);
    weights::Criteria c{0.71, 1.0, 0.8};
    w = weights::accumulate(w, weights::rule_weight(c), c, 2.0);
    store.append("weight_update", weight_update_payload(w, "solved"), 2.0);
    store.write_snapshot([&] {
      weights::WeightBook b;
      b.set(w);
      return b;
    }());
  }
  const auto r = run("--format json replay " + dir.string());
  REQUIRE(r.code == 0);
  const auto j = round_trip(r.out);
  CHECK(j["records"] == 2);
  CHECK(j["snapshot_consistent"] == true);
  CHECK(j["weights"]["LQ"]["w_r"].get<double>() == doctest::Approx(0.8366666666666667));

  std::ofstream(dir / kLogFileName, std::ios::app) << "{\"seq\":9,\"ts\":0,\"kind\":\"ack\",\"payload\":{}}\n";
  CHECK(run("replay " + dir.string()).code == 1);
  fs::remove_all(dir);
}
