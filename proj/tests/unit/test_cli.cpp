#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "fluxfilter/config.hpp"
#include "fluxfilter/io.hpp"
#include "support.hpp"

using namespace fluxfilter;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  fluxfilter::testing::TempDir dir{"cli"};
  std::string config = (dir / "small.ini").string();

  void SetUp() override { save_config(fluxfilter::testing::small_config(), config); }

  std::string sub(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_F(Cli, TwinAssimilateReport) {
  ASSERT_EQ(run({"--config", config, "--out", sub("twin"), "twin"}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "twin" / "measurements.csv"));
  const Outcome a = run({"--config", config, "--out", sub("run"), "assimilate", "--twin", sub("twin")});
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string h = config_hash(fluxfilter::testing::small_config());
  for (const char* stem : {"posterior_flux_", "posterior_weights_", "posterior_temperature_", "probes_",
                           "truth_probes_", "errors_"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / (stem + h + ".csv"))) << stem;
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / ("error_report_" + h + ".json")));
  const Manifest m = read_manifest(dir / "run" / "manifest.json");
  EXPECT_EQ(m.command, "assimilate");
  EXPECT_EQ(m.config_hash, h);

  ASSERT_EQ(run({"report", "--run", sub("run")}).code, 0);
  const std::string first = read_text(dir / "run" / "summary.md");
  const std::string fig = read_text(dir / "run" / ("fig_probe_temperature_" + h + ".csv"));
  ASSERT_EQ(run({"report", "--run", sub("run")}).code, 0);
  EXPECT_EQ(read_text(dir / "run" / "summary.md"), first);
  EXPECT_EQ(read_text(dir / "run" / ("fig_probe_temperature_" + h + ".csv")), fig);
  EXPECT_NE(first.find("multiquadric"), std::string::npos);
}

TEST_F(Cli, TwinRerunIsByteIdentical) {
  ASSERT_EQ(run({"--config", config, "--out", sub("a"), "twin"}).code, 0);
  ASSERT_EQ(run({"--config", config, "--out", sub("b"), "--workers", "3", "twin"}).code, 0);
  for (const char* f : {"measurements.csv", "truth_flux.csv", "truth_sensors.csv"}) {
    EXPECT_EQ(read_text(dir / "a" / f), read_text(dir / "b" / f)) << f;
  }
  // The config echo differs only in the run section (workers, output).
  EXPECT_EQ(config_hash(load_config(dir / "a" / "config.ini")), config_hash(load_config(dir / "b" / "config.ini")));
  ASSERT_EQ(run({"--config", config, "--out", sub("c"), "--seed", "99", "twin"}).code, 0);
  EXPECT_NE(read_text(dir / "a" / "measurements.csv"), read_text(dir / "c" / "measurements.csv"));
}

TEST_F(Cli, MissingKeyExitsWithCode2) {
  std::string text = read_text(config);
  const std::size_t at = text.find("eta =");
  text.erase(at, text.find('\n', at) - at + 1);
  write_text(config, text);
  const Outcome o = run({"--config", config, "--out", sub("x"), "twin"});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("rbf.eta"), std::string::npos) << o.err;
}

TEST_F(Cli, TwinHashMismatchExitsWithCode2) {
  ASSERT_EQ(run({"--config", config, "--out", sub("twin"), "twin"}).code, 0);
  const Outcome o =
      run({"--config", config, "--seed", "5", "--out", sub("run"), "assimilate", "--twin", sub("twin")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("twin hash mismatch"), std::string::npos) << o.err;
}

TEST_F(Cli, CorruptedTwinCsvExitsWithCode2) {
  ASSERT_EQ(run({"--config", config, "--out", sub("twin"), "twin"}).code, 0);
  const auto path = dir / "twin" / "measurements.csv";
  std::string text = read_text(path);
  std::size_t pos = 0;
  for (int n = 1; n < 7; ++n) pos = text.find('\n', pos) + 1;
  text.replace(pos, text.find('\n', pos) - pos, "0.4,4,garbage");
  write_text(path, text);
  const Outcome o = run({"--config", config, "--out", sub("run"), "assimilate", "--twin", sub("twin")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("measurements.csv:7"), std::string::npos) << o.err;
}

TEST_F(Cli, BadArgumentsExitWithCode2) {
  EXPECT_EQ(run({"--config", sub("nope.ini"), "twin"}).code, 2);
  EXPECT_EQ(run({"--kernel", "cubic", "twin"}).code, 2);
  EXPECT_EQ(run({"assimilate"}).code, 2);
  EXPECT_EQ(run({"report", "--run", sub("empty")}).code, 2);
  std::filesystem::create_directories(dir / "empty");
  EXPECT_EQ(run({"report", "--run", sub("empty")}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, SweepWritesOneRowPerValue) {
  const Outcome o = run({"--config", config, "--out", sub("sweep"), "sweep", "--param", "kappa", "--values",
                         "0.1,0.3"});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string h = config_hash(fluxfilter::testing::small_config());
  const CsvTable t = read_csv_table(dir / "sweep" / ("sweep_kappa_" + h + ".csv"));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.number(0, "value"), 0.1);
  EXPECT_EQ(t.number(1, "value"), 0.3);
  EXPECT_EQ(t.rows[0][t.column("status")], "ok");
  ASSERT_EQ(run({"report", "--run", sub("sweep")}).code, 0);
}
