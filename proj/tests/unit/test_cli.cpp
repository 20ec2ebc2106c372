#if defined(COGLOAD_HAVE_CLI)

#include "cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "cogload");
  std::ostringstream out, err;
  CliResult r;
  r.code = cogload::cli::dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Sessions only, no model training: eight lines per participant.
const std::vector<std::string> kCheapSim{"simulate", "--condition", "self/single", "--seed", "3"};

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& more) {
  base.insert(base.end(), more.begin(), more.end());
  return base;
}

class ScopedEnv {
public:
  ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
  ~ScopedEnv() { ::unsetenv(name_); }

private:
  const char* name_;
};

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / (name + "_" + std::to_string(::getpid()));
  std::ofstream(path) << content;
  return path.string();
}

}  // namespace

TEST(Cli, HelpAndUsageExitCodes) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"simulate", "--help"}).code, 0);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"simulate", "--participants", "many"}).code, 2);
  EXPECT_EQ(run({"simulate", "--bogus-flag"}).code, 2);
  const CliResult missing = run({"evaluate", "--model", "/nonexistent/model.bin", "--features", "/nonexistent/data.jsonl"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("IoFailure"), std::string::npos) << missing.err;
}

TEST(Cli, EnvironmentName) {
  EXPECT_EQ(cogload::cli::env_name("horizon"), "COGLOAD_HORIZON");
  EXPECT_EQ(cogload::cli::env_name("ratings-out"), "COGLOAD_RATINGS_OUT");
}

TEST(Cli, OptionLayering) {
  const std::string cfg = temp_file("cogload_cfg.json", R"({"participants": 4, "simulate": {"participants": 3}})");
  const std::string top = temp_file("cogload_top.json", R"({"participants": 4})");
  EXPECT_EQ(lines(run(with(kCheapSim, {"--config", top})).out), 4u * 8u);
  EXPECT_EQ(lines(run(with(kCheapSim, {"--config", cfg})).out), 3u * 8u);  // subcommand section beats top level
  {
    ScopedEnv env("COGLOAD_PARTICIPANTS", "2");
    EXPECT_EQ(lines(run(with(kCheapSim, {"--config", cfg})).out), 2u * 8u);  // environment beats config
    EXPECT_EQ(lines(run(with(kCheapSim, {"--config", cfg, "--participants", "1"})).out), 8u);  // flag beats all
  }
  {
    ScopedEnv env("COGLOAD_CONFIG", cfg.c_str());
    EXPECT_EQ(lines(run(kCheapSim).out), 3u * 8u);
  }
  const std::string broken = temp_file("cogload_bad.json", "{not json");
  EXPECT_EQ(run(with(kCheapSim, {"--config", broken})).code, 2);
  std::filesystem::remove(cfg);
  std::filesystem::remove(top);
  std::filesystem::remove(broken);
}

TEST(Cli, SimulateIsDeterministic) {
  const std::vector<std::string> args{"simulate", "--participants", "2", "--condition", "model/dual",
                                      "--seed", "7", "--train-participants", "4", "--epochs", "2", "--hidden", "8"};
  const CliResult a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(lines(a.out), 16u);
  EXPECT_NE(run(with(kCheapSim, {"--participants", "1"})).out, run({"simulate", "--condition", "self/single",
                                                                     "--seed", "4", "--participants", "1"}).out);
}

#endif
