#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "vtf/io.hpp"
#include "vtf/solver.hpp"

namespace fs = std::filesystem;
using namespace vtf;

namespace {

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / ("vtf_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(VTF_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Cli, DenoiseMatchesLibrary) {
    Tensor y({32});
    for (std::size_t i = 0; i < 32; ++i) y[i] = (i >= 16 ? 1.0 : 0.0) + 0.05 * std::sin(3.0 * i);
    const fs::path in = scratch() / "step.vtf", out = scratch() / "den.vtf", js = scratch() / "den.json";
    write_vtf_file(in.string(), y);
    ASSERT_EQ(run("denoise --k 1 --lambda 0.2 --summary " + js.string() + " " + in.string() + " " + out.string()), 0);
    const Tensor got = read_vtf_file(out.string());

    FitConfig fc;
    fc.lambda = 0.2;
    FitResult r = fit_margin(y, 1, fc);
    const Tensor want = y - project_nullspace_complement(y, 1) + r.fitted;
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < 32; ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
    // the mean is untouched
    double mean_in = 0, mean_out = 0;
    for (std::size_t i = 0; i < 32; ++i) mean_in += y[i], mean_out += got[i];
    EXPECT_NEAR(mean_in, mean_out, 1e-9);
    EXPECT_NE(slurp(js).find("\"kkt_residual\""), std::string::npos);
}

TEST(Cli, CertifySmallPasses) {
    const fs::path csv = scratch() / "cert.csv";
    ASSERT_EQ(run("certify --k 2 --d 2 --n 24 --out " + csv.string()), 0);
    const std::string text = slurp(csv);
    EXPECT_EQ(text.rfind("check_name,params,lhs,rhs,pass", 0), 0u);
    EXPECT_EQ(text.find(",false"), std::string::npos);
}

TEST(Cli, RatesWritesCsvAndSvg) {
    const fs::path cfg = scratch() / "rates.cfg", csv = scratch() / "rates.csv", svg = scratch() / "rates.svg";
    std::ofstream(cfg) << "n = 32, 64\nsigma = 0.5\nreplicates = 2\nsignal = steps 2\n";
    ASSERT_EQ(run("rates --config " + cfg.string() + " --out " + csv.string() + " --svg " + svg.string()), 0);
    const std::string text = slurp(csv);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
    EXPECT_NE(slurp(svg).find("</svg>"), std::string::npos);
}

TEST(Cli, AnovaAndGrids) {
    Tensor y({6, 5});
    for (std::size_t p = 0; p < y.size(); ++p) y[p] = static_cast<double>((p * 7) % 5);
    const fs::path in = scratch() / "a.vtf", csv = scratch() / "anova.csv", grid = scratch() / "mesh.txt";
    write_vtf_file(in.string(), y);
    ASSERT_EQ(run("anova --k 1 --out " + csv.string() + " " + in.string()), 0);
    const std::string text = slurp(csv);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);  // header plus four margins in d=2
    ASSERT_EQ(run("grids --kind mesh --shape 32,32 --k 1 --delta 2 --out " + grid.string()), 0);
    const std::string g = slurp(grid);
    EXPECT_FALSE(g.empty());
}

TEST(Cli, ValidationErrorsExitOne) {
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("certify --k zero"), 1);
    EXPECT_EQ(run("denoise --k 1 --lambda 1 /nonexistent/in.vtf /tmp/out.vtf"), 1);
    const fs::path bad = scratch() / "bad.vtf";
    std::ofstream(bad) << "not a tensor\n";
    EXPECT_EQ(run("denoise --k 1 --lambda 1 " + bad.string() + " " + (scratch() / "o.vtf").string()), 1);
    const fs::path cfg = scratch() / "bad.cfg";
    std::ofstream(cfg) << "n = 16\nunknown_key = 3\n";
    EXPECT_EQ(run("rates --config " + cfg.string()), 1);
    EXPECT_EQ(run("grids --kind hex --shape 8"), 1);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, CertificationFailureExitsTwo) {
    // the printed k = 4 pieces do not join continuously
    const fs::path csv = scratch() / "cert4.csv";
    EXPECT_EQ(run("certify --k 4 --d 1 --n 24 --printed --no-oracle --out " + csv.string()), 2);
    EXPECT_NE(slurp(csv).find("omega_continuity"), std::string::npos);
}
