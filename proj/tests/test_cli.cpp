#include <gtest/gtest.h>
#include <sys/wait.h>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = CASPAR_CLI_PATH;
const fs::path tmp = CASPAR_TEST_TMP;

struct Result
{
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Result run(const std::string& args)
{
    fs::create_directories(tmp);
    const auto out = tmp / "stdout.txt", err = tmp / "stderr.txt";
    const std::string cmd = "'" + cli + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string path(const std::string& name) { return (tmp / name).string(); }

/// Simulated design shared by several tests.
std::string simulated(const std::string& dir)
{
    if (!fs::exists(path(dir) + "/design.csv")) {
        const auto r = run("simulate --n 60 --p 40 --groups 3 --group-size 4 --seed 9 --out-dir " + path(dir));
        EXPECT_EQ(r.code, 0) << r.err;
    }
    return path(dir);
}

} // namespace

TEST(Cli, SimulateWritesArtifacts)
{
    const auto dir = simulated("sim");
    for (auto f : {"design.csv", "design.json", "truth.csv", "config.json"}) EXPECT_TRUE(fs::exists(dir + "/" + f)) << f;
    const auto cfg = json::parse(slurp(dir + "/config.json"));
    EXPECT_EQ(cfg["seed"], 9);
    EXPECT_EQ(cfg["group_starts"].size(), 3u);
}

TEST(Cli, AlphaOneMatchesStepwise)
{
    const auto dir = simulated("sim");
    auto a = run("fit --design " + dir + "/design.csv --method caspar --alpha 1 --bandwidth 3 --epsilon 5 --out " + path("c.json"));
    auto b = run("fit --design " + dir + "/design.csv --method stepwise --epsilon 5 --out " + path("s.json"));
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    const auto ca = json::parse(slurp(path("c.json"))), sb = json::parse(slurp(path("s.json")));
    EXPECT_EQ(ca["selected"], sb["selected"]);
    EXPECT_FALSE(ca["selected"].empty());
    EXPECT_TRUE(fs::exists(path("c.config.json")));
}

TEST(Cli, SimulateFitPipelineIsByteIdentical)
{
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
        const auto dir = path("pipe");
        ASSERT_EQ(run("simulate --n 50 --p 30 --groups 2 --group-size 3 --seed 4 --out-dir " + dir).code, 0);
        const auto r = run("fit --design " + dir + "/design.csv --method caspar --structure " + dir
                           + "/design.json --epsilon 2 --out " + dir + "/fit.json");
        ASSERT_EQ(r.code, 0) << r.err;
        const auto text = slurp(dir + "/design.csv") + slurp(dir + "/fit.json");
        if (rep == 0) first = text;
        else EXPECT_EQ(text, first);
    }
}

TEST(Cli, FitOutputDocument)
{
    const auto dir = simulated("sim");
    const auto r = run("fit --design " + dir + "/design.csv --method caspar --kernel gaussian --epsilon 3 --out "
                       + path("g.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = json::parse(slurp(path("g.json")));
    for (auto key : {"selected", "coefficients", "steps", "stop_reason", "params"}) EXPECT_TRUE(doc.contains(key)) << key;
    const auto l = run("fit --design " + dir + "/design.csv --method lasso --lambda 20 --out " + path("l.json"));
    ASSERT_EQ(l.code, 0) << l.err;
    EXPECT_TRUE(json::parse(slurp(path("l.json"))).contains("coefficients"));
}

TEST(Cli, MissingInputNamesThePath)
{
    const auto missing = path("no_such_design.csv");
    const auto r = run("fit --design " + missing + " --out " + path("x.json"));
    EXPECT_EQ(r.code, 2);
    const auto err = json::parse(r.err);
    EXPECT_EQ(err["kind"], "data");
    EXPECT_NE(err["message"].get<std::string>().find(missing), std::string::npos);
}

TEST(Cli, ExitCodes)
{
    const auto dir = simulated("sim");
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("fit --bogus").code, 1);
    const auto bad_method = run("fit --design " + dir + "/design.csv --method ridge --out " + path("x.json"));
    EXPECT_EQ(bad_method.code, 1);
    EXPECT_EQ(json::parse(bad_method.err)["kind"], "usage");
    EXPECT_EQ(run("cv --design " + dir + "/design.csv --folds 1 --out " + path("x.csv")).code, 1);
    const auto nc = run("fit --design " + dir + "/design.csv --method lasso --lambda 0.01 --lasso-max-iters 1 --lasso-tol 1e-15 --out "
                        + path("x.json"));
    EXPECT_EQ(nc.code, 3);
    EXPECT_EQ(json::parse(nc.err)["error"], "NoConvergence");
    EXPECT_EQ(run("simulate --p 10 --groups 3 --group-size 4 --out-dir " + path("infeasible")).code, 2);
}

TEST(Cli, CvWritesGridAndFoldPlan)
{
    const auto dir = simulated("sim");
    const auto before = slurp(dir + "/design.csv");
    const std::string base = "cv --design " + dir + "/design.csv --method caspar --hs 1,2 --alphas 0.5,1 --eps-count 5 --folds 5 --seed 3 ";
    const auto a = run(base + "--threads 1 --out " + path("cv1.csv"));
    const auto b = run(base + "--threads 3 --out " + path("cv3.csv"));
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(slurp(path("cv1.csv")), slurp(path("cv3.csv")));
    const auto chosen = json::parse(a.out);
    EXPECT_TRUE(chosen["chosen"].contains("epsilon"));
    const auto cfg = json::parse(slurp(path("cv1.config.json")));
    EXPECT_EQ(cfg["fold_assignment"].size(), 60u);
    // Header plus 2 x 2 x 5 grid rows.
    const auto table = slurp(path("cv1.csv"));
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 21);
    EXPECT_EQ(slurp(dir + "/design.csv"), before);
}

TEST(Cli, Diagnose)
{
    const auto dir = simulated("sim");
    const auto r = run("diagnose --design " + dir + "/design.csv --truth " + dir + "/truth.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = json::parse(r.out);
    EXPECT_EQ(doc["support"].size(), 12u);
    EXPECT_GT(doc["rho"].get<double>(), 0.0);
    EXPECT_GT(doc["mu"].get<double>(), 0.0);
    EXPECT_EQ(run("diagnose --design " + dir + "/design.csv --support 0,1 --truth " + dir + "/truth.csv").code, 1);
}

TEST(Cli, EncodeThenFit)
{
    fs::create_directories(tmp);
    std::ofstream(path("seqs.csv")) << "id,sequence\na,PQITL\nb,PQVTL\nc,PKITL\nd,PQITM\ne,PKVTL\nf,PQITL\n";
    std::ofstream(path("pheno.csv")) << "id,drug,value\na,NFV,1\nb,NFV,10\nc,NFV,3\nd,NFV,NA\ne,NFV,30\nf,NFV,2\n";
    const auto r = run("encode --sequences " + path("seqs.csv") + " --phenotypes " + path("pheno.csv")
                       + " --drug NFV --out-dir " + path("enc"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto sidecar = json::parse(slurp(path("enc") + "/design.json"));
    EXPECT_EQ(sidecar["dropped_rows"], 1);
    // Row d is dropped, leaving positions 2 and 3 variable.
    EXPECT_EQ(sidecar["columns"].size(), 2u);
    EXPECT_EQ(sidecar["columns"][0]["name"], "2K");
    const auto f = run("fit --design " + path("enc") + "/design.csv --structure " + path("enc")
                       + "/design.json --method caspar --max-steps 2 --out " + path("enc_fit.json"));
    EXPECT_EQ(f.code, 0) << f.err;
}

TEST(Cli, ExperimentTable)
{
    const std::string args = "experiment --ns 50,150 --replicates 2 --p 40 --groups 2 --group-size 3 --folds 3 "
                             "--hs 1,2 --alphas 0.5,1 --eps-count 4 --lambda-count 6 --seed 5 ";
    const auto a = run(args + "--threads 1 --out " + path("exp_a.csv"));
    const auto b = run(args + "--threads 2 --out " + path("exp_b.csv"));
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    const auto table = slurp(path("exp_a.csv"));
    EXPECT_EQ(table, slurp(path("exp_b.csv")));
    EXPECT_EQ(table.substr(0, table.find('\n')), "n,replicate,method,recovery_error,tpr,fpr,n_selected,eps,h,alpha,seed");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 13);
    EXPECT_TRUE(fs::exists(path("exp_a.config.json")));
}
