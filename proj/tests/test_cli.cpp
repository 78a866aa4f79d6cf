#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "tcdesc/data.hpp"
#include "tcdesc/net.hpp"

namespace tcdesc {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("tcdesc_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small dataset and quick training flags shared by several tests.
  std::string small_dataset(const std::string& name = "d.tcpd", double noise = 0.05,
                            double distortion = 0.3) {
    const auto r = run({"generate", "--seed", "3", "--scenes", "80", "--dim", "8",
                        "--noise", std::to_string(noise), "--distortion",
                        std::to_string(distortion), "--out", path(name)});
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name);
  }
  std::vector<std::string> quick_train(const std::string& data, const std::string& out) {
    return {"train",        "--data",     data,    "--out",         out,
            "--iterations", "30",         "--batch-size", "16",     "--k",
            "4",            "--hidden",   "16",    "--output-dim",  "8",
            "--seed",       "5"};
  }

  fs::path dir_;
};

TEST_F(CliTest, GenerateIsDeterministic) {
  for (const char* name : {"a.tcpd", "b.tcpd"}) {
    const auto r = run({"generate", "--seed", "7", "--scenes", "256", "--dim", "16",
                        "--out", path(name)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(path("a.tcpd")), slurp(path("b.tcpd")));
  EXPECT_EQ(read_dataset(path("a.tcpd")).header.scene_count, 256u);
}

TEST_F(CliTest, GenerateUsageErrors) {
  EXPECT_EQ(run({"generate", "--seed", "1"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"generate", "--scenes", "1", "--out", path("x.tcpd")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"generate", "--out", path("missing/dir/x.tcpd")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"nonsense"}).code, cli::kExitUsage);
}

TEST_F(CliTest, GenerateSeedFromEnvironment) {
  ::setenv("TCDESC_SEED", "7", 1);
  ASSERT_EQ(run({"generate", "--scenes", "10", "--out", path("env.tcpd")}).code, 0);
  ::unsetenv("TCDESC_SEED");
  ASSERT_EQ(run({"generate", "--seed", "7", "--scenes", "10", "--out", path("flag.tcpd")}).code, 0);
  EXPECT_EQ(slurp(path("env.tcpd")), slurp(path("flag.tcpd")));
}

std::vector<std::string> loss_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    for (int c = 0; c < 3; ++c) std::getline(row, cell, ',');
    out.push_back(cell);
  }
  return out;
}

TEST_F(CliTest, TrainTopologyOffMatchesFixedLambdaOne) {
  const auto data = small_dataset();
  auto off = quick_train(data, path("off"));
  off.insert(off.end(), {"--topology", "off"});
  auto fixed = quick_train(data, path("fixed"));
  fixed.insert(fixed.end(), {"--lambda-mode", "fixed:1.0"});
  ASSERT_EQ(run(off).code, 0);
  ASSERT_EQ(run(fixed).code, 0);
  const auto a = loss_column(slurp(path("off/train_log.csv")));
  const auto b = loss_column(slurp(path("fixed/train_log.csv")));
  ASSERT_EQ(a.size(), 30u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(slurp(path("off/model.tcd")), slurp(path("fixed/model.tcd")));
}

TEST_F(CliTest, TrainIsBitReproducible) {
  const auto data = small_dataset();
  ASSERT_EQ(run(quick_train(data, path("r1"))).code, 0);
  ASSERT_EQ(run(quick_train(data, path("r2"))).code, 0);
  EXPECT_EQ(slurp(path("r1/model.tcd")), slurp(path("r2/model.tcd")));
  EXPECT_EQ(slurp(path("r1/train_log.csv")), slurp(path("r2/train_log.csv")));
  const auto cfg = slurp(path("r1/effective_config.txt"));
  EXPECT_NE(cfg.find("iterations = 30"), std::string::npos);
  EXPECT_NE(cfg.find("batch_size = 16"), std::string::npos);
}

TEST_F(CliTest, DeskPresetReducesLoss) {
  const auto data = path("desk.tcpd");
  ASSERT_EQ(run({"generate", "--seed", "2", "--out", data}).code, 0);
  const auto r = run({"train", "--data", data, "--out", path("desk"), "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto losses = loss_column(slurp(path("desk/train_log.csv")));
  ASSERT_EQ(losses.size(), 2000u);
  EXPECT_LT(std::stod(losses.back()), std::stod(losses.front()));
}

TEST_F(CliTest, TrainConfigPrecedence) {
  const auto data = small_dataset();
  std::ofstream(path("cfg.txt")) << "iterations = 7\nbatch_size = 12\nk = 3\n";
  auto args = quick_train(data, path("p"));
  args.insert(args.end(), {"--config", path("cfg.txt")});
  // quick_train already sets --iterations 30 and --batch-size 16 on the command line.
  ASSERT_EQ(run(args).code, 0);
  const auto cfg = slurp(path("p/effective_config.txt"));
  EXPECT_NE(cfg.find("iterations = 30"), std::string::npos);
  EXPECT_NE(cfg.find("batch_size = 16"), std::string::npos);
  EXPECT_NE(cfg.find("k = 4"), std::string::npos);

  ASSERT_EQ(run({"train", "--config", path("cfg.txt"), "--data", data, "--out", path("q"),
                 "--hidden", "8", "--output-dim", "4"})
                .code,
            0);
  const auto cfg2 = slurp(path("q/effective_config.txt"));
  EXPECT_NE(cfg2.find("iterations = 7"), std::string::npos);
  EXPECT_NE(cfg2.find("k = 3"), std::string::npos);
}

TEST_F(CliTest, TrainErrors) {
  EXPECT_EQ(run({"train", "--data", path("none.tcpd"), "--out", path("o")}).code, cli::kExitIo);
  std::ofstream(path("junk.tcpd")) << "not a dataset";
  EXPECT_EQ(run({"train", "--data", path("junk.tcpd"), "--out", path("o")}).code, cli::kExitIo);
  const auto data = small_dataset();
  EXPECT_EQ(run({"train", "--data", data, "--out", path("o"), "--k", "500"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run({"train", "--data", data, "--out", path("o"), "--preset", "nope"}).code,
            cli::kExitUsage);
  auto diverge = quick_train(data, path("div"));
  diverge.insert(diverge.end(), {"--lr-start", "1e300", "--momentum", "0"});
  const auto r = run(diverge);
  EXPECT_EQ(r.code, cli::kExitDivergence);
  EXPECT_NE(r.err.find("last good iteration"), std::string::npos);
}

TEST_F(CliTest, EvalReportsAndFailsCleanly) {
  const auto data = small_dataset();
  ASSERT_EQ(run(quick_train(data, path("m"))).code, 0);
  const auto model = path("m/model.tcd");
  const auto r1 = run({"eval", "--model", model, "--data", data, "--seed", "2", "--out",
                       path("m1.csv")});
  const auto r2 = run({"eval", "--model", model, "--data", data, "--seed", "2", "--out",
                       path("m2.csv")});
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_EQ(slurp(path("m1.csv")), slurp(path("m2.csv")));
  EXPECT_EQ(slurp(path("m1.csv")).rfind("fpr95,mAP,n_pos,n_neg\n", 0), 0u);

  EXPECT_EQ(run({"eval", "--model", path("absent.tcd"), "--data", data}).code, cli::kExitIo);
  ASSERT_EQ(run({"generate", "--seed", "1", "--scenes", "20", "--dim", "5", "--out",
                 path("other.tcpd")})
                .code,
            0);
  EXPECT_EQ(run({"eval", "--model", model, "--data", path("other.tcpd")}).code, cli::kExitIo);
}

TEST_F(CliTest, EvalOnSeparableDataIsPerfect) {
  const auto data = small_dataset("clean.tcpd", 0.0, 0.0);
  ASSERT_EQ(run(quick_train(data, path("m"))).code, 0);
  const auto r = run({"eval", "--model", path("m/model.tcd"), "--data", data, "--all",
                      "--out", path("m.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(path("m.csv"));
  const auto row = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(row.substr(0, row.find(',')), "0");
}

struct InspectDump {
  std::map<std::string, std::vector<std::string>> sections;
};

InspectDump parse_inspect(const std::string& text) {
  InspectDump d;
  std::istringstream in(text);
  std::string line, current;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '[') {
      current = line;
    } else if (!line.empty() && line[0] != '#' && !current.empty()) {
      d.sections[current].push_back(line);
    }
  }
  return d;
}

TEST_F(CliTest, InspectIdenticalViewsHaveZeroTopologyDistance) {
  const auto data = small_dataset("same.tcpd", 0.0, 0.0);
  ASSERT_EQ(run(quick_train(data, path("m"))).code, 0);
  const auto r = run({"inspect", "--model", path("m/model.tcd"), "--data", data, "--seed", "4",
                      "--batch-size", "12", "--k", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto dump = parse_inspect(r.out);
  ASSERT_EQ(dump.sections.at("[distances]").size(), 12u);
  for (const auto& line : dump.sections.at("[distances]")) {
    EXPECT_NE(line.find(" d_T=0"), std::string::npos) << line;
    EXPECT_EQ(line.find("FLAG"), std::string::npos);
  }
  EXPECT_NE(r.out.find("# pairs with d_T > 1: 0"), std::string::npos);
}

TEST_F(CliTest, InspectMatchesIndependentNeighborsAndWeights) {
  const auto data = small_dataset();
  ASSERT_EQ(run(quick_train(data, path("m"))).code, 0);
  const auto r = run({"inspect", "--model", path("m/model.tcd"), "--data", data, "--seed", "9",
                      "--batch-size", "16", "--k", "4", "--csv", path("dump.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("dump.csv")));

  // Rebuild the same batch and embeddings outside the tool.
  const auto ds = read_dataset(data);
  std::mt19937_64 rng(9);
  const auto batch = sample_batch(ds, 16, rng);
  const auto net = read_checkpoint(path("m/model.tcd"));
  const auto anchors = embed(net, batch.anchors);
  const auto positives = embed(net, batch.positives);

  const auto dump = parse_inspect(r.out);
  for (const auto& [section, x] : {std::pair{std::string("[A neighbors]"), anchors},
                                   std::pair{std::string("[P neighbors]"), positives}}) {
    const auto& lines = dump.sections.at(section);
    ASSERT_EQ(lines.size(), 16u);
    for (std::size_t i = 0; i < 16; ++i) {
      std::string expected = std::to_string(i) + ":";
      for (const auto j : oracle::brute_force_knn(x, i, 4)) expected += " " + std::to_string(j);
      EXPECT_EQ(lines[i], expected);
    }
  }
  const std::regex entry(R"(\((\d+):([^)]+)\))");
  for (const char* section : {"[A topology]", "[P topology]"}) {
    for (const auto& line : dump.sections.at(section)) {
      double total = 0.0;
      int count = 0;
      for (auto it = std::sregex_iterator(line.begin(), line.end(), entry);
           it != std::sregex_iterator(); ++it) {
        total += std::stod((*it)[2]);
        ++count;
      }
      EXPECT_EQ(count, 4) << line;
      EXPECT_NEAR(total, 1.0, 1e-9) << line;
    }
  }
}

TEST_F(CliTest, GradcheckExitCodes) {
  const auto def = run({"gradcheck"});
  EXPECT_EQ(def.code, 0) << def.out << def.err;
  EXPECT_EQ(run({"gradcheck", "--mode", "detached", "--tol", "1e-5"}).code, 0);
  EXPECT_EQ(run({"gradcheck", "--mode", "off", "--tol", "1e-5"}).code, 0);
  const auto bad = run({"gradcheck", "--inject-fault"});
  EXPECT_EQ(bad.code, cli::kExitCheckFailed);
  EXPECT_NE((bad.out + bad.err).find("layer"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--mode", "sideways"}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace tcdesc
