#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = STQ_CLI_PATH;
const fs::path kTmp = STQ_TEST_TMPDIR;

int run_cli(const std::string& args) {
    std::string cmd = kCli + " " + args + " >" + (kTmp / "stdout.txt").string() + " 2>" +
                      (kTmp / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& content) {
    fs::create_directories(kTmp);
    fs::path p = kTmp / name;
    std::ofstream f(p);
    f << content;
    return p;
}

} // namespace

TEST_CASE("run: enumerate mode writes branch records summing to one") {
    fs::path cfg = write_config("run1.cfg", "protocol = p1_single\n"
                                            "theta = 1.5707963267948966\n"
                                            "mu_delta = 1.0e8 rad_per_s\n"
                                            "branches = enumerate\n");
    fs::path out = kTmp / "out_run1";
    fs::remove_all(out);
    int rc = run_cli("run --config " + cfg.string() + " --out " + out.string());
    CHECK(rc == 0);
    std::string result = slurp(out / "result.json");
    size_t pos = result.find("\"probability_sum\":");
    REQUIRE(pos != std::string::npos);
    double psum = std::stod(result.substr(pos + 19));
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.find("\"branches\"") != std::string::npos);
    CHECK(fs::exists(out / "schedule.json"));
    CHECK(fs::exists(out / "summary.txt"));
}

TEST_CASE("run: a missing unit tag names the field and exits 3") {
    fs::path cfg = write_config("run2.cfg", "protocol = p1_single\n"
                                            "mu_delta = 1.0e8\n");
    int rc = run_cli("run --config " + cfg.string() + " --out " + (kTmp / "o2").string());
    CHECK(rc == 3);
    std::string err = slurp(kTmp / "stderr.txt");
    CHECK(err.find("mu_delta") != std::string::npos);
    CHECK(err.find("unit") != std::string::npos);
}

TEST_CASE("run: unknown keys are rejected") {
    fs::path cfg = write_config("run3.cfg", "protocol = p1_single\n"
                                            "mu_delt = 1.0e8 rad_per_s\n");
    int rc = run_cli("run --config " + cfg.string() + " --out " + (kTmp / "o3").string());
    CHECK(rc == 3);
    CHECK(slurp(kTmp / "stderr.txt").find("mu_delt") != std::string::npos);
}

TEST_CASE("run: identical config and seed give byte-identical results") {
    fs::path cfg = write_config("run4.cfg", "protocol = p1_prepare\n"
                                            "theta = 2.2\n"
                                            "branches = sample\n"
                                            "seed = 99\n"
                                            "mu_delta = 5.0e7 rad_per_s\n");
    fs::path o1 = kTmp / "o4a", o2 = kTmp / "o4b";
    fs::remove_all(o1);
    fs::remove_all(o2);
    CHECK(run_cli("run --config " + cfg.string() + " --out " + o1.string()) == 0);
    CHECK(run_cli("run --config " + cfg.string() + " --out " + o2.string()) == 0);
    CHECK(slurp(o1 / "result.json") == slurp(o2 / "result.json"));
    CHECK(slurp(o1 / "summary.txt") == slurp(o2 / "summary.txt"));
}

TEST_CASE("run: an impossible forced branch exits 2") {
    fs::path cfg = write_config("run5.cfg", "protocol = p2_bus\n"
                                            "j = 1.0e9 rad_per_s\n"
                                            "branches = forced=2,2\n");
    // outcome 2 then 2: after an aligned-sector entangling outcome the
    // readout cannot land in the aligned sector again on this input
    int rc = run_cli("run --config " + cfg.string() + " --out " + (kTmp / "o5").string());
    CHECK(rc == 2);
}

TEST_CASE("verify: teleport and square-gate targets pass") {
    fs::path cfg = write_config("v1.cfg", "protocol = p1_single\n"
                                          "theta = 0.9\n"
                                          "mu_delta = 1.0e8 rad_per_s\n");
    fs::path out = kTmp / "ov1";
    CHECK(run_cli("verify --config " + cfg.string() + " --out " + out.string()) == 0);
    std::string rep = slurp(out / "equivalence.json");
    CHECK(rep.find("\"pass\": true") != std::string::npos);

    fs::path cfg2 = write_config("v2.cfg", "protocol = p1_two\n"
                                           "mu_delta = 1.0e8 rad_per_s\n");
    CHECK(run_cli("verify --config " + cfg2.string() + " --out " + (kTmp / "ov2").string()) == 0);
}

TEST_CASE("verify: p2 sequences pass with their recorded corrections") {
    fs::path cfg = write_config("v3.cfg", "protocol = p2_single\n"
                                          "j = 1.0e9 rad_per_s\n");
    CHECK(run_cli("verify --config " + cfg.string() + " --out " + (kTmp / "ov3").string()) == 0);
}

TEST_CASE("verify: a corrupted schedule replay fails with the branch named") {
    fs::path cfg = write_config("v4.cfg", "protocol = p1_single\n"
                                          "theta = 0.9\n"
                                          "mu_delta = 1.0e8 rad_per_s\n");
    fs::path out = kTmp / "ov4";
    fs::remove_all(out);
    // produce a schedule, corrupt the window duration, replay
    CHECK(run_cli("run --config " + cfg.string() + " --out " + out.string()) == 0);
    std::string sched = slurp(out / "schedule.json");
    size_t pos = sched.find("\"duration_s\":");
    REQUIRE(pos != std::string::npos);
    size_t end = sched.find_first_of(",}", pos + 13);
    sched = sched.substr(0, pos + 13) + " 1.9e-8" + sched.substr(end);
    fs::path corrupted = kTmp / "corrupted_schedule.json";
    {
        std::ofstream f(corrupted);
        f << sched;
    }
    int rc = run_cli("verify --config " + cfg.string() + " --out " + out.string() +
                     " --schedule " + corrupted.string());
    CHECK(rc == 4);
    CHECK(slurp(kTmp / "stderr.txt").find("branch") != std::string::npos);
}

TEST_CASE("scan-leakage emits the documented CSV with slope near 2") {
    fs::path out = kTmp / "oscan";
    CHECK(run_cli("scan-leakage --out " + out.string()) == 0);
    std::string csv = slurp(out / "leakage.csv");
    CHECK(csv.rfind("ratio,max_leakage,fit_slope\n", 0) == 0);
}

TEST_CASE("syndromes writes twelve detectable rows") {
    fs::path out = kTmp / "osyn";
    CHECK(run_cli("syndromes --out " + out.string()) == 0);
    std::string csv = slurp(out / "syndromes.csv");
    CHECK(csv.rfind("error,qubit,s1,s2,s3\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
    CHECK(csv.find("-1") != std::string::npos);
}

TEST_CASE("resources asserts the reference integers") {
    fs::path out = kTmp / "ores";
    CHECK(run_cli("resources --out " + out.string()) == 0);
    std::string j = slurp(out / "resources.json");
    CHECK(j.find("p1_single") != std::string::npos);
    CHECK(j.find("p2_two") != std::string::npos);
}

TEST_CASE("timing reports all schedules under 150 ns for both unit readings") {
    for (const char* unit : {"hz", "rad_per_s"}) {
        fs::path cfg = write_config(std::string("t_") + unit + ".cfg",
                                    std::string("protocol = p2_single\n") + "j = 160e6 " + unit +
                                        "\n");
        fs::path out = kTmp / (std::string("otim_") + unit);
        CHECK(run_cli("timing --config " + cfg.string() + " --out " + out.string()) == 0);
        std::string summary = slurp(out / "timing_summary.txt");
        CHECK(summary.find("p1_single") != std::string::npos);
        CHECK(summary.find("p2_two") != std::string::npos);
    }
}

TEST_CASE("run at the full spin level reports per-qubit leakage") {
    fs::path cfg = write_config("full.cfg", "protocol = p1_single\n"
                                            "theta = 6.283185307179586\n"
                                            "mu_delta = 1.0e8 rad_per_s\n"
                                            "branches = enumerate\n");
    fs::path out = kTmp / "ofull";
    int rc = run_cli("run --config " + cfg.string() + " --out " + out.string() +
                     " --level full");
    CHECK(rc == 0);
    std::string result = slurp(out / "result.json");
    CHECK(result.find("output_leakage") != std::string::npos);
}

TEST_CASE("p2 protocols reject the effective level") {
    fs::path cfg = write_config("lvl.cfg", "protocol = p2_bus\n"
                                           "j = 1.0e9 rad_per_s\n"
                                           "level = effective\n");
    CHECK(run_cli("run --config " + cfg.string() + " --out " + (kTmp / "olvl").string()) == 3);
}
