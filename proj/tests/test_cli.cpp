// Drives the built elmm executable end to end through the shell.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <elmm/elmm.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kAlbedo = ELMM_SOURCE_DIR "/experiments/data/synthetic_albedo.csv";

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() /
               ("elmm_cli_" + std::to_string(::getpid()) + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Exit status of `elmm <args>`; stdout and stderr go to files in the temp dir.
    int run(const std::string& args) const
    {
        const std::string cmd = std::string("\"") + ELMM_CLI_PATH + "\" " + args + " >\"" +
                                (dir_ / "stdout.txt").string() + "\" 2>\"" + (dir_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    std::string write(const std::string& name, const std::string& text) const
    {
        std::ofstream(dir_ / name) << text;
        return (dir_ / name).string();
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

const char* kLinearScene = R"({"P": 3, "N": 400, "seed": 11, "model": "linear",
  "geometry": {"kind": "uniform", "theta0": [0, 60], "theta": [0, 60], "phi": [0, 180]},
  "reference_geometry": {"theta0": 45, "theta": 45, "phi": 0}})";

} // namespace

TEST_F(Cli, ForwardRelativeAtGrazingReturnsAlbedo)
{
    ASSERT_EQ(run("forward --albedo " + kAlbedo + " --model relative --theta0 90 --theta 90 --out " +
                  path("f.csv").string()),
              0);
    const auto in = elmm::io::read_spectra_csv(kAlbedo);
    const auto out = elmm::io::read_spectra_csv(path("f.csv").string());
    ASSERT_EQ(out.values.rows(), in.values.rows());
    EXPECT_EQ(out.values, in.values);
    EXPECT_TRUE(fs::exists(path("f.csv.manifest.json")));
}

TEST_F(Cli, ForwardLinearAtNadirIsNinth)
{
    ASSERT_EQ(run("forward --albedo " + kAlbedo + " --model linear --theta0 0 --theta 0 --out " +
                  path("f.csv").string()),
              0);
    const auto in = elmm::io::read_spectra_csv(kAlbedo);
    const auto out = elmm::io::read_spectra_csv(path("f.csv").string());
    EXPECT_LE((out.values - in.values / 9.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(Cli, ForwardFullAtDoubleGrazingIsDomainError)
{
    EXPECT_EQ(run("forward --albedo " + kAlbedo + " --model full --theta0 90 --theta 90 --out " +
                  path("f.csv").string()),
              2);
    EXPECT_NE(slurp(path("stderr.txt")).find("model-domain error"), std::string::npos);
}

TEST_F(Cli, ForwardRejectsBadModel)
{
    EXPECT_EQ(run("forward --albedo " + kAlbedo + " --model hapke --out " + path("f.csv").string()), 1);
    EXPECT_EQ(run("forward --albedo " + path("missing.csv").string() + " --out " + path("f.csv").string()), 1);
}

TEST_F(Cli, SimulateRejectsEmptyScene)
{
    const auto cfg = write("scene.json", R"({"P": 3, "N": 0})");
    EXPECT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --out " + path("cube").string()), 1);
}

TEST_F(Cli, SimulateLinearThenVerify)
{
    const auto cfg = write("scene.json", kLinearScene);
    ASSERT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --out " + path("cube").string()), 0);
    EXPECT_EQ(run("verify --cube " + path("cube/cube.json").string()), 0);
    const auto file = elmm::io::read_cube(path("cube/cube.json").string());
    EXPECT_EQ(file.cube.X.rows(), 50);
    EXPECT_EQ(file.cube.X.cols(), 400);
}

TEST_F(Cli, VerifyCatchesCorruption)
{
    const auto cfg = write("scene.json", kLinearScene);
    ASSERT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --out " + path("cube").string()), 0);
    auto file = elmm::io::read_cube(path("cube/cube.json").string());
    file.cube.X(3, 7) += 1e-3; // breaks conservation only
    elmm::io::write_cube(path("bad/cube.json").string(), file.cube, file.metadata);
    fs::copy_file(path("cube/endmembers.csv"), path("bad/endmembers.csv"));
    EXPECT_EQ(run("verify --cube " + path("bad/cube.json").string()), 1);

    file.cube.X(0, 0) = -1.0;
    elmm::io::write_cube(path("neg/cube.json").string(), file.cube, file.metadata);
    EXPECT_EQ(run("verify --cube " + path("neg/cube.json").string()), 1);
    EXPECT_NE(slurp(path("stderr.txt")).find("negative"), std::string::npos);
}

TEST_F(Cli, SimulateIsDeterministic)
{
    const auto cfg = write("scene.json", R"({"P": 3, "N": 300, "seed": 5, "model": "full", "snr_db": 40,
      "geometry": {"kind": "uniform", "theta0": [0, 80], "theta": [0, 80], "phi": [0, 180]}})");
    ASSERT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --out " + path("a").string()), 0);
    ASSERT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --threads 3 --out " + path("b").string()),
              0);
    for (const char* f : {"cube.json", "cube.bin", "cube_abundances.bin", "endmembers.csv"})
        EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;
    const auto file = elmm::io::read_cube(path("a/cube.json").string());
    EXPECT_EQ(file.cube.X.rows(), 50);
    EXPECT_EQ(file.cube.X.cols(), 300);
    EXPECT_FALSE(file.cube.ground_truth->scaling.has_value());
}

TEST_F(Cli, UnmixElmmBeatsLmmAndRecoversTruth)
{
    const auto cfg = write("scene.json", kLinearScene);
    ASSERT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --out " + path("cube").string()), 0);
    const auto cube = path("cube/cube.json").string();
    ASSERT_EQ(run("unmix --cube " + cube + " --model lmm --out " + path("lmm").string()), 0);
    ASSERT_EQ(run("unmix --cube " + cube + " --model elmm-full --out " + path("full").string()), 0);
    const auto lmm = json::parse(slurp(path("lmm/summary.json")));
    const auto full = json::parse(slurp(path("full/summary.json")));
    EXPECT_LE(full["residual_rmse"]["mean"].get<double>(), lmm["residual_rmse"]["mean"].get<double>());
    EXPECT_LT(full["abundance_rmse"].get<double>(), 1e-6);
    EXPECT_TRUE(full["objective_monotone"].get<bool>());
    EXPECT_TRUE(fs::exists(path("full/manifest.json")));
}

TEST_F(Cli, UnitScalingBoundsMatchLmm)
{
    const auto cfg = write("scene.json", kLinearScene);
    ASSERT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --out " + path("cube").string()), 0);
    const auto cube = path("cube/cube.json").string();
    ASSERT_EQ(run("unmix --cube " + cube + " --model lmm --out " + path("lmm").string()), 0);
    ASSERT_EQ(run("unmix --cube " + cube + " --model elmm-full --psi-min 1 --psi-max 1 --out " + path("one").string()),
              0);
    const auto a = elmm::io::read_matrix(path("lmm/abundances.bin"), 3, 400);
    const auto b = elmm::io::read_matrix(path("one/abundances.bin"), 3, 400);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST_F(Cli, UnmixRejectsBadBounds)
{
    const auto cfg = write("scene.json", kLinearScene);
    ASSERT_EQ(run("simulate --config " + cfg + " --albedo " + kAlbedo + " --out " + path("cube").string()), 0);
    EXPECT_EQ(run("unmix --cube " + path("cube/cube.json").string() + " --psi-min 2 --psi-max 1 --out " +
                  path("u").string()),
              1);
}

TEST_F(Cli, SweepGrazingCellIsExact)
{
    const auto cfg = write("sweep.json", R"({"theta0": [90], "theta": [90]})");
    ASSERT_EQ(run("sweep --albedo " + kAlbedo + " --config " + cfg + " --out " + path("s").string()), 0);
    std::ifstream in(path("s/sweep_basalt.csv"));
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, "theta0,theta,sam_rad,rmse");
    EXPECT_EQ(row, "90,90,0,0");
    EXPECT_FALSE(std::getline(in, extra) && !extra.empty());
}

TEST_F(Cli, SweepRowsFollowGridOrder)
{
    const auto cfg = write("sweep.json", R"({"theta0": [10, 20], "theta": [30, 40]})");
    ASSERT_EQ(run("sweep --albedo " + kAlbedo + " --config " + cfg + " --out " + path("s").string()), 0);
    std::ifstream in(path("s/sweep_tephra.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> keys;
    while (std::getline(in, line))
        if (!line.empty()) keys.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
    EXPECT_EQ(keys, (std::vector<std::string>{"10,30", "10,40", "20,30", "20,40"}));
}

TEST_F(Cli, FullSweepRanksMaterialsByAlbedo)
{
    ASSERT_EQ(run("sweep --albedo " + kAlbedo + " --out " + path("s").string()), 0);
    const auto manifest = json::parse(slurp(path("s/manifest.json")));
    const auto& mats = manifest["config"]["materials"];
    ASSERT_EQ(mats.size(), 3u);
    for (std::size_t i = 1; i < mats.size(); ++i) {
        EXPECT_GT(mats[i]["mean_albedo"].get<double>(), mats[i - 1]["mean_albedo"].get<double>());
        EXPECT_GT(mats[i]["mean_rmse"].get<double>(), mats[i - 1]["mean_rmse"].get<double>());
    }
    for (const char* m : {"basalt", "palagonite", "tephra"})
        EXPECT_TRUE(fs::exists(path("s") / (std::string("sweep_") + m + ".csv")));
}

TEST_F(Cli, CurveWritesOmegaGrid)
{
    ASSERT_EQ(run("curve --model linear --theta0 0 --theta 0 --step 0.25 --out " + path("c.csv").string()), 0);
    std::ifstream in(path("c.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "omega,reflectance");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 5);
}
