#include <gtest/gtest.h>
#include <unistd.h>

#include <fstream>
#include <set>

#include "dylab/runner.hpp"

using namespace dylab;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dylab-test-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::string golden_translation = "translation:0.6180339887498949";

ValidationError validation_of(const json& raw) {
  try {
    validate_config(raw);
  } catch (const ValidationError& e) {
    return e;
  }
  ADD_FAILURE() << "no validation error for " << raw.dump();
  return ValidationError("", "");
}

}  // namespace

TEST(Config, DefaultsAndCanonicalForm) {
  const auto c = validate_config({{"kind", "holonomy"}});
  EXPECT_EQ(c.params["tol"], "1e-12");
  EXPECT_EQ(c.params["fit_degree"], 4);
  EXPECT_EQ(c.params["perturb"], json::array());
  // Number and string spellings of the same value canonicalize alike.
  const auto a = validate_config({{"kind", "holonomy"}, {"params", {{"x0", 0.1}}}});
  const auto b = validate_config({{"kind", "holonomy"}, {"params", {{"x0", " 0.1"}}}});
  EXPECT_EQ(a.params["x0"], "0.1");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 64u);
  EXPECT_EQ(validate_config({{"kind", "probe"}, {"params", {{"N", "1e6"}}}}).params["N"], 1000000);
  EXPECT_EQ(validate_config(a.canonical()).canonical_text(), a.canonical_text());
  EXPECT_EQ(a.run_name().rfind("holonomy-", 0), 0u);
}

TEST(Config, ValidationReportsFieldPath) {
  EXPECT_EQ(validation_of({{"kind", "bogus"}}).field(), "kind");
  EXPECT_EQ(validation_of(json::object()).field(), "kind");
  EXPECT_EQ(validation_of({{"kind", "cf"}, {"params", {{"colour", 1}}}}).field(), "params.colour");
  EXPECT_EQ(validation_of({{"kind", "holonomy"}, {"params", {{"tol", "fast"}}}}).field(), "params.tol");
  EXPECT_EQ(validation_of({{"kind", "cf"}, {"params", {{"count", -3}}}}).field(), "params.count");
  EXPECT_EQ(validation_of({{"kind", "hedgehog"}, {"params", {{"coeffs", json::array({1, true})}}}}).field(),
            "params.coeffs[1]");
  EXPECT_EQ(validation_of({{"kind", "cf"}, {"precision", {{"digits", 40}}}}).field(), "precision.digits");
  EXPECT_EQ(validation_of({{"kind", "cf"}, {"extra", 1}}).field(), "extra");
}

TEST(Csv, QuotesAndLineEndings) {
  Csv c({"a", "b"});
  c.row({"1,5", "say \"hi\""});
  EXPECT_EQ(c.str(), "a,b\r\n\"1,5\",\"say \"\"hi\"\"\"\r\n");
  EXPECT_THROW(c.row({"1"}), DomainError);
  EXPECT_EQ(csv_real(0.1), "0.10000000000000001");
  EXPECT_EQ(format_real(0.1), "0.1");
}

TEST(Run, CfManifestListsEveryFile) {
  const auto root = scratch("cf");
  const auto o = run(validate_config({{"kind", "cf"}}), root);
  EXPECT_EQ(o.status, Status::pass);
  const json m = json::parse(slurp(o.dir / "manifest.json"));
  std::set<std::string> listed(m["artifacts"].begin(), m["artifacts"].end()), present;
  for (const auto& e : fs::directory_iterator(o.dir)) present.insert(e.path().filename().string());
  EXPECT_EQ(listed, present);
  EXPECT_TRUE(listed.count("cf.csv"));
  static const std::set<std::string> allowed = {"pass", "warn", "fail", "skipped(gate)"};
  for (const auto& c : m["checks"]) EXPECT_TRUE(allowed.count(c["status"]));
  // Header plus 20 rows; the first data row is (0, 0, 0, 1).
  const std::string csv = slurp(o.dir / "cf.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  EXPECT_NE(csv.find("\r\n0,0,0,1,"), std::string::npos);
  // Nothing but the run directory is left behind.
  EXPECT_EQ(std::distance(fs::directory_iterator(root), fs::directory_iterator()), 1);
  fs::remove_all(root);
}

TEST(Run, GateUnmetIsSkippedNotFail) {
  const auto root = scratch("gate");
  const auto cfg = validate_config(
      {{"kind", "dy-verify"}, {"params", {{"map", golden_translation}, {"tune", false}, {"level", 2}}}});
  const auto o = run(cfg, root);
  ASSERT_EQ(o.checks.size(), 2u);
  for (const auto& c : o.checks) EXPECT_EQ(c.status, Status::skipped_gate);
  EXPECT_EQ(o.status, Status::skipped_gate);
  EXPECT_EQ(exit_code(o.status), 0);
  const json r = json::parse(slurp(o.dir / "dy.json"));
  EXPECT_FALSE(r["gate_ok"].get<bool>());
  fs::remove_all(root);
}

TEST(Run, ReplayIsBitwiseIdentical) {
  const auto r1 = scratch("replay1"), r2 = scratch("replay2");
  const std::vector<json> configs = {
      {{"kind", "qicurve"}, {"params", {{"map", golden_translation}, {"tune", false}, {"level", 4}}}},
      {{"kind", "dy-verify"},
       {"seed", 7},
       {"params", {{"map", golden_translation}, {"tune", false}, {"level", 5}, {"samples", 5}}}},
      {{"kind", "holonomy"}, {"params", {{"perturb", "P:1:1:0.1"}}}},
      {{"kind", "probe"}, {"params", {{"seeds", 10}, {"N", 2000}}}}};
  for (const auto& raw : configs) {
    const auto a = run(validate_config(raw), r1);
    // Replay from the stored config.
    const auto b = run(validate_config(json::parse(slurp(a.dir / "config.json"))), r2);
    ASSERT_EQ(a.name, b.name);
    ASSERT_EQ(a.artifacts, b.artifacts);
    for (const auto& f : a.artifacts) {
      if (f == "manifest.json") continue;
      EXPECT_EQ(slurp(a.dir / f), slurp(b.dir / f)) << a.name << "/" << f;
    }
  }
  // A different seed renames the run.
  json raw = configs[1];
  raw["seed"] = 8;
  EXPECT_NE(validate_config(raw).run_name(), validate_config(configs[1]).run_name());
  fs::remove_all(r1);
  fs::remove_all(r2);
}

TEST(Run, FailedRunKeepsPartialArtifacts) {
  const auto root = scratch("partial");
  // Rotation number 0.61 is not golden: the level-7 renormalization changes sign.
  const auto cfg = validate_config(
      {{"kind", "circle"}, {"params", {{"map", "translation:0.61"}, {"tune", false}, {"level", 7}}}});
  try {
    run(cfg, root);
    FAIL() << "expected a failed run";
  } catch (const PartialRunError& e) {
    EXPECT_TRUE(fs::exists(e.preserved() / "config.json"));
    EXPECT_FALSE(fs::exists(root / cfg.run_name()));
  }
  fs::remove_all(root);
}

TEST(Run, BadInputsAreValidationErrors) {
  const auto root = scratch("invalid");
  EXPECT_THROW(run(validate_config({{"kind", "cf"}, {"params", {{"alpha", "0.5"}}}}), root), ValidationError);
  EXPECT_THROW(run(validate_config({{"kind", "circle"}, {"params", {{"map", "spiral:1"}}}}), root), ValidationError);
  EXPECT_THROW(run(validate_config({{"kind", "holonomy"}, {"params", {{"perturb", "R:1:1:0.1"}}}}), root),
               ValidationError);
  EXPECT_THROW(run(validate_config({{"kind", "hedgehog"}, {"params", {{"coeffs", "50"}}}}), root),
               ValidationError);
  EXPECT_EQ(std::distance(fs::directory_iterator(root), fs::directory_iterator()), 0);
  fs::remove_all(root);
}

TEST(Run, HolonomyUnderfitFails) {
  const auto root = scratch("underfit");
  const auto o = run(validate_config({{"kind", "holonomy"}, {"params", {{"perturb", "P:1:1:0.1"}, {"fit_degree", 1}}}}),
                     root);
  EXPECT_EQ(o.status, Status::fail);
  EXPECT_EQ(exit_code(o.status), 1);
  fs::remove_all(root);
}

TEST(Suite, EmptyMissingAndFailing) {
  const auto root = scratch("suite");
  const auto empty = run(validate_config({{"kind", "suite"}}), root);
  EXPECT_EQ(empty.status, Status::pass);
  EXPECT_EQ(json::parse(slurp(empty.dir / "aggregate.json"))["runs"], json::array());

  const fs::path good = root / "good.json", bad = root / "bad.json";
  std::ofstream(good) << json{{"kind", "cf"}, {"params", {{"count", 5}}}}.dump();
  std::ofstream(bad) << json{{"kind", "holonomy"}, {"params", {{"perturb", "P:1:1:0.1"}, {"fit_degree", 1}}}}.dump();
  const auto ok = run(validate_config({{"kind", "suite"}, {"params", {{"configs", {good.string()}}}}}), root);
  EXPECT_EQ(ok.status, Status::pass);
  const auto mixed = run(validate_config({{"kind", "suite"},
                                          {"params", {{"configs", {good.string(), (root / "nope.json").string()}}}}}),
                         root);
  EXPECT_EQ(mixed.status, Status::fail);
  const json agg = json::parse(slurp(mixed.dir / "aggregate.json"));
  EXPECT_EQ(agg["runs"][1]["status"], "fail");
  EXPECT_TRUE(agg["runs"][1].contains("reason"));
  const auto failing = run(validate_config({{"kind", "suite"}, {"params", {{"configs", {bad.string()}}}}}), root);
  EXPECT_EQ(exit_code(failing.status), 1);
  fs::remove_all(root);
}
