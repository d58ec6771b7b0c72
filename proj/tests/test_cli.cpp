#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "cli_runs.hpp"

using namespace fga;
using namespace fga::testing;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fga_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_in_process(std::vector<const char*> args) {
    args.insert(args.begin(), "fga");
    return cli::run(static_cast<int>(args.size()), args.data());
}

}  // namespace

TEST(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run_in_process({}), cli::kExitUsage);
    EXPECT_EQ(run_in_process({"no-such-command"}), cli::kExitUsage);
    EXPECT_EQ(run_in_process({"gen-gt", "--out", "x.fgad"}), cli::kExitUsage);
    EXPECT_EQ(run_in_process({"probe", "--size", "eight"}), cli::kExitUsage);
    EXPECT_EQ(run_in_process({"gen-gt", "--ann", "a.csv", "--out", "b", "--format", "xml"}), cli::kExitUsage);
}

TEST(Cli, ValidationFailuresExitWithOne) {
    const fs::path dir = scratch("validation");
    write_file(dir / "bad.json", R"({"image_w": 10, "image_h": 10, "points": [[12, 3]]})");
    EXPECT_EQ(run_fga(dir, "gen-gt --ann bad.json --out o.fgad"), cli::kExitFailure);
    EXPECT_NE(slurp(dir / "stdout.txt").find("index 0"), std::string::npos);
    write_file(dir / "heads.csv", "x,y\n1,1\n");
    EXPECT_EQ(run_fga(dir, "gen-gt --ann heads.csv --out o.fgad"), cli::kExitFailure);  // no --w/--h
    EXPECT_EQ(run_fga(dir, "train --epochs 1 --train-scenes 2 --test-scenes 1 --size 8 --width 4 --lr -1"),
              cli::kExitFailure);
    EXPECT_EQ(run_fga(dir, "probe --size 8 --row 8"), cli::kExitFailure);
    fs::remove_all(dir);
}

TEST(Cli, PrintsResolvedConfigFirst) {
    const fs::path dir = scratch("config");
    ASSERT_EQ(run_fga(dir, "probe --seed 1 --size 8"), cli::kExitOk);
    const std::string out = slurp(dir / "stdout.txt");
    EXPECT_EQ(out.rfind("config: command=probe seed=1 size=8", 0), 0u) << out;
    fs::remove_all(dir);
}

TEST(Cli, SeedFallsBackToEnvironment) {
    const fs::path dir = scratch("env_seed");
    ASSERT_EQ(run_fga(dir, "probe --seed 9 --size 8 --out-prefix a --csv a.csv"), cli::kExitOk);
    ASSERT_EQ(run_fga(dir, "probe --size 8 --out-prefix b --csv b.csv"), cli::kExitOk);
    const std::string cmd = "cd '" + dir.string() + "' && FGA_SEED=9 '" FGA_CLI_PATH
                            "' probe --size 8 --out-prefix c --csv c.csv > /dev/null";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
    EXPECT_EQ(slurp(dir / "a_spectral.pgm"), slurp(dir / "c_spectral.pgm"));
    EXPECT_NE(slurp(dir / "a_conv.pgm"), slurp(dir / "b_conv.pgm"));
    fs::remove_all(dir);
}

TEST(Cli, GenGtWritesDensityWithUnitMassPerHead) {
    const fs::path dir = scratch("gen_gt");
    prepare_inputs(dir);
    ASSERT_EQ(run_fga(dir, "gen-gt --ann heads.csv --w 24 --h 16 --out gt.fgad"), cli::kExitOk);
    const DensityMap map = read_density((dir / "gt.fgad").string());
    EXPECT_EQ(map.width(), 24u);
    EXPECT_EQ(map.height(), 16u);
    EXPECT_NEAR(map.count(), 4.0, 1e-9);
    fs::remove_all(dir);
}

TEST(Cli, TrainedCheckpointReloads) {
    const fs::path dir = scratch("train");
    ASSERT_EQ(run_fga(dir, "train --seed 1 --epochs 1 --train-scenes 4 --test-scenes 2 --size 8 --width 4 "
                           "--n-fga 1 --checkpoint net.fgac --log log.csv"),
              cli::kExitOk);
    const Network net = load_network((dir / "net.fgac").string());
    EXPECT_EQ(net.config().width, 4u);
    EXPECT_EQ(net.config().n_fga, 1u);
    std::istringstream log(slurp(dir / "log.csv"));
    std::string header, line;
    std::getline(log, header);
    EXPECT_EQ(header, "epoch,loss,mae,rmse");
    std::size_t rows = 0;
    while (std::getline(log, line)) ++rows;
    EXPECT_EQ(rows, 2u);
    fs::remove_all(dir);
}

TEST(Cli, FftSelftestAndGradCheckPass) {
    const fs::path dir = scratch("selftests");
    EXPECT_EQ(run_fga(dir, "fft-selftest"), cli::kExitOk);
    EXPECT_EQ(run_fga(dir, "grad-check --seed 5"), cli::kExitOk);
    fs::remove_all(dir);
}

TEST(Cli, EveryCommandIsByteDeterministic) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    prepare_inputs(a);
    prepare_inputs(b);
    for (const auto& s : determinism_scenarios()) {
        ASSERT_EQ(run_fga(a, s.args), 0) << s.name << ": " << slurp(a / "stdout.txt");
        ASSERT_EQ(run_fga(b, s.args), 0) << s.name;
        std::string mismatch;
        EXPECT_TRUE(same_files(a, b, s.outputs, &mismatch)) << s.name << " differs in " << mismatch;
    }
    fs::remove_all(a);
    fs::remove_all(b);
}
