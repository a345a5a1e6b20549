#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kra/cli.hpp"
#include "kra/config.hpp"
#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/matx_io.hpp"
#include "kra/targets.hpp"

using namespace kra;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "kra");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "kra_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Cli, UsageErrors) {
  auto r = run({"bench", "--size", "1024by768"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--size"), std::string::npos) << r.err;

  r = run({"bench", "--adapters", "kradapter,dora"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("dora"), std::string::npos) << r.err;

  r = run({"verify", "--check", "full-rank", "--din", "2000", "--k", "32"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("1024"), std::string::npos) << r.err;

  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"approx"}).code, kExitUsage);
  EXPECT_EQ(run({"approx", "--adapter", "lora", "--lr", "fast"}).code, kExitUsage);
  EXPECT_EQ(run({"bench", "--help"}).code, kExitOk);
}

TEST(Cli, SpectrumOfIdentity) {
  const auto dir = fresh_dir("spectrum");
  const auto path = (dir / "eye.matx").string();
  save_matrix(path, DenseMatrix::identity(4));
  auto r = run({"spectrum", path});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("effective_rank 4\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("values 1 1 1 1\n"), std::string::npos) << r.out;

  r = run({"spectrum", path, "--json", "--out", (dir / "s.matx").string()});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(r.out)["effective_rank"].get<double>(), 4.0);
  EXPECT_EQ(load_matrix((dir / "s.matx").string()), DenseMatrix(1, 4, 1.0));

  EXPECT_EQ(run({"spectrum", (dir / "missing.matx").string()}).code, kExitFailure);
  EXPECT_EQ(run({"spectrum", path, "--crop", "0,0,8,8"}).code, kExitUsage);
}

TEST(Cli, ConfigFileWithOverride) {
  const auto dir = fresh_dir("config");
  const auto cfg = dir / "bench.cfg";
  {
    std::ofstream f(cfg);
    f << "# tiny grid\nsize = 12x8\nadapters = kradapter,lora\ntargets = normal,lowrank\n"
      << "seeds = 0..1\nhyper.iterations = 50\nparallelism = 1\nrelative = true\n";
  }
  const auto out = dir / "results";
  auto r = run({"bench", "--config", cfg.string(), "--iters", "3", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* name : {"results.csv", "results.json", "traces.csv", "manifest.txt"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  std::ifstream csv(out / "results.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1u + 2 * 2 * 2);
  const auto manifest = read_config_file((out / "manifest.txt").string());
  bool saw_iters = false;
  for (const auto& [k, v] : manifest)
    if (k == "hyper.iterations") {
      EXPECT_EQ(v, "3");
      saw_iters = true;
    }
  EXPECT_TRUE(saw_iters);

  // The manifest reloads as a config and reproduces the table.
  const auto again = dir / "again";
  r = run({"bench", "--config", (out / "manifest.txt").string(), "--out", again.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream a(out / "results.csv"), b(again / "results.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());

  {
    std::ofstream f(cfg);
    f << "sizes = 12x8\n";
  }
  r = run({"bench", "--config", cfg.string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("sizes"), std::string::npos);
}

TEST(Cli, ApproxReportsParameterCount) {
  const auto dir = fresh_dir("approx");
  auto r = run({"approx", "--adapter", "lora", "--rank", "28", "--size", "1024x768", "--iters", "1", "--out",
                dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["params"].get<std::size_t>(), 50176u);
  EXPECT_TRUE(fs::exists(dir / "solution.matx"));
  EXPECT_TRUE(fs::exists(dir / "report.json"));
}

TEST(Cli, ApproxOnCroppedFileTarget) {
  const auto dir = fresh_dir("file_target");
  const auto path = (dir / "w.matx").string();
  save_matrix(path, gen_normal(200, 150, 9));
  auto r = run({"approx", "--adapter", "kradapter", "--target", "file:" + path, "--crop", "0,0,128,128", "--iters",
                "2", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_matrix((dir / "out" / "solution.matx").string()).rows(), 128u);
  r = run({"approx", "--adapter", "kradapter", "--target", "file:" + path, "--crop", "100,0,128,128", "--out",
           (dir / "out").string()});
  EXPECT_EQ(r.code, kExitUsage);
}

TEST(Cli, VerifySubsetPasses) {
  auto r = run({"verify", "--check", "param-min", "--dout", "768", "--din", "1024"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("PASS", 0), 0u) << r.out;
  r = run({"verify", "--check", "gradcheck", "--json"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(r.out).is_array());
}

TEST(ConfigParsers, Values) {
  EXPECT_EQ(parse_size("1024x768", "s"), std::make_pair(std::size_t{1024}, std::size_t{768}));
  EXPECT_THROW(parse_size("1024", "s"), Error);
  EXPECT_THROW(parse_size("0x3", "s"), Error);
  EXPECT_EQ(parse_seeds("0..2,7", "s"), (std::vector<std::uint64_t>{0, 1, 2, 7}));
  EXPECT_THROW(parse_seeds("3..1", "s"), Error);
  EXPECT_EQ(parse_adapter_list("lora, krona", "a"),
            (std::vector<AdapterKind>{AdapterKind::kLoRA, AdapterKind::kKronA}));
  EXPECT_EQ(parse_crop("1,2,3,4", "c"), (Crop{1, 2, 3, 4}));
  EXPECT_THROW(parse_crop("1,2,3", "c"), Error);
  std::istringstream in("a = 1\n# c\n\nb.c=x y\n");
  EXPECT_EQ(parse_key_values(in), (KeyValues{{"a", "1"}, {"b.c", "x y"}}));
  std::istringstream bad("a = 1\nnovalue\n");
  try {
    parse_key_values(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormatError);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}
