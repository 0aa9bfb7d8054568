#include <gtest/gtest.h>

#include <cstdlib>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

using namespace taskcomm;
using namespace taskcomm::cli;

namespace {

struct Parsed {
  ParseResult result;
  std::string out;
  std::string err;
};

Parsed parse(std::vector<std::string> args) {
  args.insert(args.begin(), "taskcomm-run");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Parsed p{parse_args(static_cast<int>(argv.size()), argv.data(), out, err), {}, {}};
  p.out = out.str();
  p.err = err.str();
  return p;
}

class EnvGuard {
 public:
  explicit EnvGuard(const char* value) { ::setenv(kPollingEnv, value, 1); }
  ~EnvGuard() { ::unsetenv(kPollingEnv); }
};

}  // namespace

TEST(Cli, HelpExitsZeroWithoutConfig) {
  const auto p = parse({"--help"});
  EXPECT_FALSE(p.result.config.has_value());
  EXPECT_EQ(p.result.exit_code, kOk);
  EXPECT_NE(p.out.find("--variant"), std::string::npos);
}

TEST(Cli, ParsesAFullRun) {
  const auto p = parse({"--variant", "interop-nonblk", "--rows", "1024", "--cols", "512", "--bs",
                        "128", "--ranks", "4", "--workers", "8", "--iters", "20", "--seed", "9"});
  ASSERT_TRUE(p.result.config.has_value()) << p.err;
  const auto& r = p.result.config->run;
  EXPECT_EQ(r.variant, gs::Variant::InteropNonBlk);
  EXPECT_EQ(r.rows, 1024);
  EXPECT_EQ(r.cols, 512);
  EXPECT_EQ(r.block_rows, 128);
  EXPECT_EQ(r.block_cols, 128);
  EXPECT_EQ(r.ranks, 4);
  EXPECT_EQ(r.workers, 8);
  EXPECT_EQ(r.iterations, 20);
  EXPECT_EQ(r.seed, 9u);
  EXPECT_EQ(r.backend, gs::Backend::InProc);
}

TEST(Cli, BlockDimensionsOverrideBs) {
  const auto p = parse({"--variant", "fork-join", "--bs", "32", "--block-cols", "64"});
  ASSERT_TRUE(p.result.config.has_value()) << p.err;
  EXPECT_EQ(p.result.config->run.block_rows, 32);
  EXPECT_EQ(p.result.config->run.block_cols, 64);
}

TEST(Cli, InvalidInputIsExitCodeTwo) {
  const std::vector<std::vector<std::string>> cases = {
      {},
      {"--variant", "bogus"},
      {"--variant", "sentinel", "--bs", "100"},
      {"--variant", "sentinel", "--transport", "tcp"},
      {"--variant", "sentinel", "--transport", "carrier-pigeon"},
      {"--variant", "sentinel", "--frobnicate"},
      {"--variant", "pure-mpi", "--workers", "4"},
      {"--variant", "sentinel", "--polling-period-us", "-5"},
      {"--demo", "livelock"},
      {"--demo", "deadlock", "--interop", "maybe"},
      {"--demo", "deadlock", "--variant", "sentinel"},
  };
  for (const auto& c : cases) {
    const auto p = parse(c);
    EXPECT_FALSE(p.result.config.has_value());
    EXPECT_EQ(p.result.exit_code, kBadArguments);
    EXPECT_FALSE(p.err.empty());
  }
}

TEST(Cli, PollingPeriodFlagBeatsEnvironment) {
  EnvGuard env("250");
  auto p = parse({"--variant", "sentinel"});
  ASSERT_TRUE(p.result.config.has_value());
  EXPECT_EQ(p.result.config->run.polling_period, std::chrono::microseconds(250));
  p = parse({"--variant", "sentinel", "--polling-period-us", "40"});
  ASSERT_TRUE(p.result.config.has_value());
  EXPECT_EQ(p.result.config->run.polling_period, std::chrono::microseconds(40));
}

TEST(Cli, DefaultPollingPeriodIsOneMillisecond) {
  ::unsetenv(kPollingEnv);
  const auto p = parse({"--variant", "sentinel"});
  ASSERT_TRUE(p.result.config.has_value());
  EXPECT_EQ(p.result.config->run.polling_period, std::chrono::microseconds(1000));
}

TEST(Cli, MetricsJsonHasTheDocumentedKeys) {
  const auto p = parse({"--variant", "interop-blk", "--rows", "64", "--cols", "64", "--bs", "16",
                        "--ranks", "2", "--workers", "2", "--iters", "3"});
  ASSERT_TRUE(p.result.config.has_value());
  const auto result = gs::run_variant(p.result.config->run);
  const auto j = nlohmann::json::parse(metrics_json(*p.result.config, result));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::vector<std::string> expected = {
      "bs",          "checksum_hex",   "cols",           "events_bound",     "events_fulfilled",
      "fast_path_hits", "iterations", "iterations_per_s", "ranks",          "rows",
      "schema",      "tasks_paused",   "tickets_created", "total_time_s",    "variant",
      "workers"};
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(keys, expected);
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["variant"], "interop-blk");
  EXPECT_EQ(j["bs"], 16);
  EXPECT_EQ(j["checksum_hex"], gs::sequential_oracle(64, 64, 1, 3).hex());
}

TEST(Cli, NonSquareBlocksAreReportedAsAPair) {
  const auto p = parse({"--variant", "fork-join", "--rows", "64", "--cols", "64",
                        "--block-rows", "16", "--block-cols", "32", "--iters", "1"});
  ASSERT_TRUE(p.result.config.has_value());
  const auto j = nlohmann::json::parse(
      metrics_json(*p.result.config, gs::run_variant(p.result.config->run)));
  EXPECT_EQ(j["bs"], nlohmann::json::array({16, 32}));
}

TEST(Cli, VerifiedRunExitsZero) {
  const auto p = parse({"--variant", "sentinel", "--rows", "64", "--cols", "64", "--bs", "16",
                        "--ranks", "2", "--workers", "2", "--iters", "4", "--verify"});
  ASSERT_TRUE(p.result.config.has_value());
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(run_main(*p.result.config, out, err), kOk) << err.str();
  EXPECT_NE(out.str().find("\"checksum_hex\""), std::string::npos);
}

TEST(Cli, DeadlockDemoExitCodes) {
  auto p = parse({"--demo", "deadlock", "--interop", "on"});
  ASSERT_TRUE(p.result.config.has_value());
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(run_main(*p.result.config, out, err), kOk);
  const auto on = nlohmann::json::parse(out.str());
  EXPECT_EQ(on["completed"], true);
  EXPECT_GE(on["tasks_paused"].get<int>(), 1);

  p = parse({"--demo", "deadlock", "--interop", "off", "--watchdog-ms", "300"});
  ASSERT_TRUE(p.result.config.has_value());
  std::ostringstream out2;
  EXPECT_EQ(run_main(*p.result.config, out2, err), kWatchdog);
  EXPECT_EQ(nlohmann::json::parse(out2.str())["watchdog_fired"], true);
}
