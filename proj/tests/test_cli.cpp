#include "gwlab/config.hpp"
#include "gwlab/io.hpp"
#include "gwlab/verify.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

using namespace gwlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("gwlab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args)
{
    std::string cmd = std::string(GWLAB_EXE) + " " + args + " > /dev/null 2>&1";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

} // namespace

TEST(Config, ParsesSectionsCommentsAndLists)
{
    RunConfig c;
    std::istringstream in("# sweep\n"
                          "delta = -0.05, -0.01   # two values\n"
                          "grid_n = 256\n"
                          "[evolve]\n"
                          "ds = 0.004\n"
                          "projection = false\n"
                          "regime = linear\n"
                          "[output]\n"
                          "formats = json\n"
                          "tolerances.tol_eig = 1e-6\n");
    config::parse(c, in);
    ASSERT_EQ(c.delta.size(), 2u);
    EXPECT_EQ(c.delta[0], -0.05);
    EXPECT_EQ(c.delta[1], -0.01);
    EXPECT_EQ(c.grid_n, 256);
    EXPECT_EQ(c.evolve.ds, 0.004);
    EXPECT_FALSE(c.evolve.projection);
    EXPECT_EQ(c.evolve.regime, "linear");
    EXPECT_EQ(c.output.formats, std::vector<std::string>{"json"});
    EXPECT_EQ(c.tol.tol_eig, 1e-6);
    EXPECT_NO_THROW(config::validate(c));
}

TEST(Config, RejectsBadInput)
{
    RunConfig c;
    EXPECT_THROW(config::set(c, "grid_n", "12.5"), Error);
    EXPECT_THROW(config::set(c, "R", "abc"), Error);
    EXPECT_THROW(config::set(c, "evolve.projection", "maybe"), Error);
    EXPECT_THROW(config::set(c, "nonsense", "1"), Error);
    std::istringstream bad("delta -0.02\n");
    EXPECT_THROW(config::parse(c, bad), Error);

    RunConfig coarse;
    coarse.grid_n = 32;
    EXPECT_THROW(config::validate(coarse), Error);
    coarse.force = true;
    EXPECT_NO_THROW(config::validate(coarse));
    RunConfig reg;
    reg.evolve.regime = "sideways";
    EXPECT_THROW(config::validate(reg), Error);
}

TEST(Io, ProfileJsonRoundTrip)
{
    auto p = solve_profile(-0.02, 1.0, 128);
    auto q = io::profile_from_json(json::parse(io::profile_to_json(p, 0.2).dump()));
    EXPECT_EQ(q.w, p.w);
    EXPECT_EQ(q.wprime, p.wprime);
    EXPECT_EQ(q.w0, p.w0);
    EXPECT_EQ(q.grid.n, p.grid.n);
    for (int i = 1; i <= p.grid.n; ++i)
        EXPECT_NEAR(q.enclosed[i], p.enclosed[i], 1e-12);
    auto j = io::profile_to_json(p, 0.2);
    j["w"].erase(0);
    EXPECT_THROW(io::profile_from_json(j), Error);
}

TEST(Io, ModeJsonRoundTrip)
{
    RadialGrid g(1.0, 64);
    auto m = sample_mode(1, g, [](double r) { return r * (1.0 - r); }, ModeKind::Potential);
    auto back = io::mode_from_json(json::parse(io::mode_to_json(m).dump()));
    EXPECT_EQ(back.l, 1);
    EXPECT_EQ(back.kind, ModeKind::Potential);
    EXPECT_EQ(back.values, m.values);
    auto j = io::mode_to_json(m);
    j["kind"] = "vorticity";
    EXPECT_THROW(io::mode_from_json(j), Error);
}

TEST(Io, ProfileCacheHit)
{
    auto dir = scratch("cache");
    setenv("GWLAB_CACHE", dir.c_str(), 1);
    auto a = io::cached_profile(-0.01, 0.1414, 1.0, 128);
    EXPECT_FALSE(a.hit);
    EXPECT_TRUE(fs::exists(a.path));
    auto b = io::cached_profile(-0.01, 0.1414, 1.0, 128);
    EXPECT_TRUE(b.hit);
    EXPECT_EQ(a.profile.w0, b.profile.w0);
    EXPECT_EQ(a.profile.w, b.profile.w);
    auto c = io::cached_profile(-0.01, 0.1414, 1.0, 128, true);
    EXPECT_FALSE(c.hit);
    fs::remove_all(dir);
}

TEST(Verification, MatrixShapeAndDeterminism)
{
    RunConfig c;
    c.grid_n = 128;
    c.delta = {-0.02, 0.0};
    c.only = {"mu1", "radial_operator", "poisson"};
    auto a = run_verification(c, 1, false);
    ASSERT_EQ(a.rows.size(), 6u);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].delta, c.delta[k / 3]);
        EXPECT_EQ(a.rows[k].id, (std::vector<std::string>{"poisson", "mu1", "radial_operator"})[k % 3]);
    }
    auto b = run_verification(c, 2, false);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    EXPECT_TRUE(a.all_pass()) << a.table();

    c.only = {"mu1", "bogus"};
    EXPECT_THROW(run_verification(c, 1, false), Error);
}

TEST(Verification, EveryCheckOncePerDelta)
{
    RunConfig c;
    c.grid_n = 64;
    c.delta = {-0.02};
    c.only = {"profile", "expansion", "poisson", "eigenvectors", "mu1", "radial_operator"};
    auto vm = run_verification(c, 1, false);
    EXPECT_EQ(vm.rows.size(), c.only.size());
    EXPECT_EQ(check_ids().size(), 12u);
    for (const auto& id : check_ids())
        EXPECT_EQ(verify::registry().count(id), 1u) << id;
}

TEST(Verification, CoarseGridFailsTheProfileCheck)
{
    RunConfig c;
    c.grid_n = 16;
    c.force = true;
    c.delta = {-0.02};
    c.only = {"profile"};
    auto vm = run_verification(c, 1, false);
    ASSERT_EQ(vm.rows.size(), 1u);
    EXPECT_FALSE(vm.all_pass());
    EXPECT_EQ(vm.to_json()["rows"][0]["status"], "fail");
}

TEST(Cli, ExitCodes)
{
    auto dir = scratch("cli_codes");
    std::string out = " --out " + dir.string();
    EXPECT_EQ(run_cli("profile --delta -5" + out), 2);
    EXPECT_EQ(run_cli("profile --grid_n 12" + out), 2);
    EXPECT_EQ(run_cli("--bogus-flag profile"), 2);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("profile --delta -0.02 --grid_n 128" + out), 0);
    EXPECT_TRUE(fs::exists(dir / "profile_d-0.02.csv"));
    fs::remove_all(dir);
}

TEST(Cli, EvolveWritesSeriesAndManifest)
{
    auto dir = scratch("cli_evolve");
    EXPECT_EQ(run_cli("evolve --delta -0.02 --grid_n 64 --l 2 --steps 400 --evolve.ds 0.01 --svg --out " + dir.string()),
              0);
    auto base = dir / "evolve_self_similar_d-0.02_l2";
    ASSERT_TRUE(fs::exists(base.string() + ".csv"));
    ASSERT_TRUE(fs::exists(base.string() + ".json"));
    EXPECT_TRUE(fs::exists(base.string() + ".svg"));
    auto m = io::read_json(base.string() + ".json");
    EXPECT_EQ(m["l"], 2);
    EXPECT_EQ(m["n_steps"], 400);
    EXPECT_EQ(m["regime"], "self_similar");
    EXPECT_LE(m["max_energy_ratio"].get<double>(), 1.0 + 1e-9);
    fs::remove_all(dir);
}
