#include <fdvn/cli.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fdvn::cli {
namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "fdvn");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  std::string write(const std::string& name, const std::string& text) {
    std::filesystem::path p = std::filesystem::temp_directory_path() /
                              ("fdvn_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                               ::testing::UnitTest::GetInstance()->current_test_info()->name() + "_" + name);
    std::ofstream(p) << text;
    files_.push_back(p);
    return p.string();
  }
  void TearDown() override {
    for (const auto& p : files_) std::filesystem::remove(p);
  }
  std::vector<std::filesystem::path> files_;
};

const char* kCInM2 = R"({"dims_small": [1], "adjacency": [[2]], "trace": [0.5]})";

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST_F(CliTest, IndexCsvLayout) {
  Result r = invoke({"index", "--config", write("c.json", kCInM2)});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::vector<std::string> ls = lines(r.out);
  ASSERT_GE(ls.size(), 3u);
  EXPECT_EQ(ls[0].rfind("# {", 0), 0u);
  EXPECT_EQ(ls[1], "schema_version,command,instance_digest,quantity,method,p,value,margin,seed");
  EXPECT_NE(r.out.find("delta_squared"), std::string::npos);
  EXPECT_NE(r.out.find("k=0;l=0"), std::string::npos);
}

TEST_F(CliTest, EntropiesAndDeterminism) {
  std::string cfg = write("c.json", kCInM2);
  Result a = invoke({"entropies", "--config", cfg, "--budget", "50"});
  Result b = invoke({"entropies", "--config", cfg, "--budget", "50"});
  ASSERT_EQ(a.code, kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("S_tau"), std::string::npos);
}

TEST_F(CliTest, JsonFormatParses) {
  Result r = invoke({"renyi-curve", "--config", write("c.json", kCInM2), "--format", "json", "--pgrid", "0.5,1,inf"});
  ASSERT_EQ(r.code, kOk) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["command"], "renyi-curve");
  EXPECT_FALSE(j["rows"].empty());
}

TEST_F(CliTest, OutFileMatchesStdout) {
  std::string cfg = write("c.json", kCInM2);
  std::string outp = write("out.csv", "");
  Result a = invoke({"index", "--config", cfg});
  Result b = invoke({"index", "--config", cfg, "--out", outp});
  ASSERT_EQ(b.code, kOk);
  std::stringstream ss;
  ss << std::ifstream(outp).rdbuf();
  EXPECT_EQ(ss.str(), a.out);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  Result unknown = invoke({"index", "--config", write("u.json", R"({"dims_small": [1], "adjacency": [[2]],
    "trace": [0.5], "colour": 1})")});
  EXPECT_EQ(unknown.code, kConfigError);
  EXPECT_NE(unknown.err.find("colour"), std::string::npos);

  Result adj = invoke({"index", "--config", write("a.json", R"({"dims_small": [1, 1], "adjacency": [[2]],
    "trace": [0.5]})")});
  EXPECT_EQ(adj.code, kConfigError);
  EXPECT_NE(adj.err.find("adjacency"), std::string::npos);

  Result syntax = invoke({"index", "--config", write("s.json", "{\"dims_small\": [1,\n")});
  EXPECT_EQ(syntax.code, kConfigError);

  EXPECT_EQ(invoke({"index", "--config", write("p.json", kCInM2), "--pgrid", "0.2"}).code, kConfigError);
  EXPECT_EQ(invoke({"nonsense"}).code, kConfigError);
  EXPECT_EQ(invoke({"check", "--trials", "0"}).code, kConfigError);
  EXPECT_EQ(invoke({"index", "--format", "xml"}).code, kConfigError);
}

TEST_F(CliTest, ChannelExpressions) {
  std::string cfg = write("c.json", R"j({"dims_small": [1], "adjacency": [[1, 1]], "trace": "markov",
    "phi": {"convex": ["identity", {"from_multiplier_random": 3}], "weights": [0.5, 0.5]},
    "psi": {"compose": ["cond_exp", "from_multiplier_random(4)"]}})j");
  Result r = invoke({"entropies", "--config", cfg, "--budget", "30"});
  EXPECT_EQ(r.code, kOk) << r.err;
  Result bad = invoke({"entropies", "--config", write("b.json", R"({"dims_small": [1], "adjacency": [[2]],
    "trace": [0.5], "phi": {"convex": ["identity", "cond_exp"], "weights": [0.5, 0.4]}})")});
  EXPECT_EQ(bad.code, kConfigError);
  EXPECT_NE(bad.err.find("phi"), std::string::npos);
}

TEST_F(CliTest, CheckCleanAndFaultInjected) {
  Result ok = invoke({"check", "--trials", "5"});
  EXPECT_EQ(ok.code, kOk) << ok.err;
  Result fault = invoke({"check", "--trials", "5", "--inject-fault", "umegaki-sign"});
  EXPECT_EQ(fault.code, kViolation);
  EXPECT_FALSE(umegaki_sign_fault());
}

TEST(Parsing, Numbers) {
  EXPECT_EQ(parse_decimal("1/3"), 1.0 / 3);
  EXPECT_TRUE(std::isinf(*parse_decimal("inf")));
  EXPECT_EQ(parse_decimal("2.5"), 2.5);
  EXPECT_FALSE(parse_decimal("abc"));
  EXPECT_EQ(format_number(kInf), "inf");
  EXPECT_EQ(parse_decimal(format_number(0.1)), 0.1);
  std::vector<double> g = parse_pgrid("0.5, 2,inf");
  ASSERT_EQ(g.size(), 3u);
  EXPECT_TRUE(std::isinf(g[2]));
}

}  // namespace
}  // namespace fdvn::cli
