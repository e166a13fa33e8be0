#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "excouple/experiments.hpp"

using namespace excouple;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / "excouple_test_experiments" / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream in(slurp(p));
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

ExperimentConfig bernoulli(const std::string& dir) {
    ExperimentConfig c;
    c.group = "Z";
    c.measure = "0:1/2; 1:1/2";
    c.x = "1";
    c.runs = 4000;
    c.horizon = 200;
    c.seed = 7;
    c.tail_rows = 50;
    c.out = scratch(dir).string();
    c.timestamp = false;
    return c;
}

} // namespace

TEST_CASE("couple writes plan, runs, tail and summary") {
    auto cfg = bernoulli("couple");
    auto res = run_command(cmd_couple, cfg);
    REQUIRE(res.exit_code == 0);
    const fs::path out = cfg.out;
    for (const char* f : {"plan.json", "runs.jsonl", "tail.csv", "summary.json"}) CHECK(fs::exists(out / f));

    auto plan = read_json(out / "plan.json");
    CHECK(plan["n0"] == 1);
    CHECK(plan["nu_mass"] == 0.5);
    CHECK(plan["laziness"] == 0.0);
    CHECK(plan["order_of_x"] == "infinite");

    auto runs = lines(out / "runs.jsonl");
    REQUIRE(runs.size() == 4000);
    auto first = json::parse(runs.front());
    for (const char* k : {"x", "n0", "nu_mass", "T_or_censored", "blocks_executed", "seed"}) CHECK(first.contains(k));

    auto tail = lines(out / "tail.csv");
    REQUIRE(tail.size() == 52);
    CHECK(tail[0] == "n,empirical_tail,ci_low,ci_high");
    CHECK(tail[1].rfind("0,1,", 0) == 0);
    double p1 = std::stod(tail[2].substr(2));
    CHECK(std::abs(p1 - 0.5) < 4 * std::sqrt(0.25 / 4000));

    auto summary = read_json(out / "summary.json");
    CHECK(summary["runs"] == 4000);
    CHECK(summary["seed"] == 7);
    CHECK(summary["hitting_time_sup_distance"].get<double>() < 0.05);
    CHECK(summary["censored_fraction"].get<double>() > 0);
}

TEST_CASE("couple special cases and exit codes") {
    auto cfg = bernoulli("couple_identity");
    cfg.x = "0";
    auto res = run_command(cmd_couple, cfg);
    REQUIRE(res.exit_code == 0);
    auto s = read_json(fs::path(cfg.out) / "summary.json");
    CHECK(s["T"] == 0);
    CHECK_FALSE(fs::exists(fs::path(cfg.out) / "runs.jsonl"));

    auto bad = bernoulli("couple_nooverlap");
    bad.measure = "0:1/2; 2:1/2";
    auto r2 = run_command(cmd_couple, bad);
    CHECK(r2.exit_code == 2);
    CHECK(r2.message.find("NoOverlap") != std::string::npos);

    auto noseed = bernoulli("couple_noseed");
    noseed.seed.reset();
    CHECK(run_command(cmd_couple, noseed).exit_code == 1);

    auto badmu = bernoulli("couple_badmu");
    badmu.measure = "0:1/2; 1:1/3";
    CHECK(run_command(cmd_couple, badmu).exit_code == 1);

    auto guard = bernoulli("tv_guard");
    guard.group = "F2";
    guard.measure = "a;A;b;B";
    guard.x = "ab";
    guard.n_max = 12;
    guard.limits.max_atoms = 200;
    CHECK(run_command(cmd_tv, guard).exit_code == 3);

    ExperimentConfig dummy;
    auto inv = run_command([](const ExperimentConfig&) -> CommandResult { throw InvariantViolation("x"); }, dummy);
    CHECK(inv.exit_code == 4);
}

TEST_CASE("tv emits the curve, the bound and a fit") {
    auto cfg = bernoulli("tv_bernoulli");
    cfg.n_max = 256;
    auto res = run_command(cmd_tv, cfg);
    REQUIRE(res.exit_code == 0);
    auto tv = lines(fs::path(cfg.out) / "tv.csv");
    REQUIRE(tv.size() == 257);
    CHECK(tv[0] == "n,tv,bound_2PTgtn");
    CHECK(tv[1] == "1,1,1");
    CHECK(tv[4] == "4,0.75,0.75");
    auto fit = read_json(fs::path(cfg.out) / "fit.json");
    CHECK(fit["fit"]["model"] == "PowerLaw");
    CHECK(fit["fit"]["exponent"].get<double>() > -0.55);
    CHECK(fit["fit"]["exponent"].get<double>() < -0.45);
    CHECK(fit["coupling_inequality"]["holds"] == true);

    auto c3 = bernoulli("tv_c3");
    c3.group = "C3";
    c3.n_max = 60;
    c3.fit_lo = 8;
    REQUIRE(run_command(cmd_tv, c3).exit_code == 0);
    auto f3 = read_json(fs::path(c3.out) / "fit.json");
    CHECK(f3["fit"]["model"] == "Geometric");
    CHECK(f3["fit"]["rho"].get<double>() < 1);
    CHECK(f3["fit"]["residual"].get<double>() < 0.05);

    auto f2 = bernoulli("tv_f2");
    f2.group = "F2";
    f2.measure = "a;A;b;B";
    f2.x = "ab";
    f2.n_max = 8;
    REQUIRE(run_command(cmd_tv, f2).exit_code == 0);
    auto ff = read_json(fs::path(f2.out) / "fit.json");
    CHECK(ff["fit"].is_null());
    CHECK(ff.contains("fit_refused"));
    CHECK(ff["min_tv"].get<double>() >= 0.3);
    CHECK(ff["in_Gs"] == "Unknown");

    // Finite group whose curve reaches 0: no fit, convergence index reported.
    auto c2 = bernoulli("tv_c2");
    c2.group = "C2";
    c2.measure = "0;1";
    c2.n_max = 10;
    c2.fit_lo = 1;
    REQUIRE(run_command(cmd_tv, c2).exit_code == 0);
    auto fc = read_json(fs::path(c2.out) / "fit.json");
    CHECK(fc["fit"].is_null());
    CHECK(fc["converged_at"] == 1);
}

TEST_CASE("solve emits verdicts and closures") {
    auto cfg = bernoulli("solve_yes");
    cfg.measure = "0:1/2; 2:1/2";
    cfg.x = "4";
    cfg.n_max = 20;
    cfg.closure_radius = 5;
    REQUIRE(run_command(cmd_solve, cfg).exit_code == 0);
    auto v = read_json(fs::path(cfg.out) / "verdict.json");
    CHECK(v["in_Gp"] == "Yes");
    CHECK(v["in_Gs"] == "Yes");
    CHECK(v["n0"] == 2);
    CHECK(v["closure"]["contains_x"] == true);
    auto cl = lines(fs::path(cfg.out) / "closure.txt");
    CHECK(cl.size() == 11);
    CHECK(cl.front() == "-10");

    cfg.x = "3";
    cfg.out = scratch("solve_no").string();
    REQUIRE(run_command(cmd_solve, cfg).exit_code == 0);
    auto n = read_json(fs::path(cfg.out) / "verdict.json");
    CHECK(n["in_Gs"] == "NoUpTo");
    CHECK(n["n0"].is_null());

    auto f = bernoulli("solve_f2");
    f.group = "F2";
    f.measure = "a;A;b;B";
    f.x = "ab";
    f.n_max = 5;
    REQUIRE(run_command(cmd_solve, f).exit_code == 0);
    auto fv = read_json(fs::path(f.out) / "verdict.json");
    CHECK(fv["in_Gp"] == "Yes");
    CHECK(fv["n0"] == 1);
    CHECK(fv["in_Gs"] == "Unknown");
}

TEST_CASE("demo-freegroup") {
    auto cfg = bernoulli("demo");
    cfg.runs = 2000;
    cfg.n_max = 8;
    REQUIRE(run_command(cmd_demo_freegroup, cfg).exit_code == 0);
    auto s = read_json(fs::path(cfg.out) / "separation.json");
    CHECK(s["in_Gp"] == "Yes");
    CHECK(s["n0"] == 1);
    CHECK(s["in_Gs"] == "Unknown");
    CHECK(s["min_tv"].get<double>() >= 0.3);
    CHECK(s["target_Sab"].get<double>() == Catch::Approx(1.0 / 36));
    CHECK_FALSE(s.contains("warning"));
    CHECK(lines(fs::path(cfg.out) / "tv.csv").size() == 9);
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
    auto compare = [](auto cmd, ExperimentConfig cfg, const std::string& name) {
        std::vector<std::vector<std::string>> contents;
        for (unsigned threads : {1U, 8U, 1U}) {
            cfg.threads = threads;
            cfg.out = scratch(name + std::to_string(contents.size())).string();
            auto res = run_command(cmd, cfg);
            REQUIRE(res.exit_code == 0);
            std::vector<std::string> files;
            for (const auto& f : res.files) files.push_back(f.filename().string() + "\n" + slurp(f));
            contents.push_back(files);
        }
        CHECK(contents[0] == contents[1]);
        CHECK(contents[0] == contents[2]);
    };
    auto couple = bernoulli("det_couple");
    couple.runs = 3000;
    compare(cmd_couple, couple, "det_couple");

    auto tv = bernoulli("det_tv");
    tv.group = "C3";
    tv.n_max = 40;
    tv.fit_lo = 8;
    compare(cmd_tv, tv, "det_tv");

    auto demo = bernoulli("det_demo");
    demo.runs = 1000;
    demo.n_max = 6;
    compare(cmd_demo_freegroup, demo, "det_demo");

    auto solve = bernoulli("det_solve");
    solve.closure_radius = 4;
    compare(cmd_solve, solve, "det_solve");
}

TEST_CASE("timestamp header") {
    auto cfg = bernoulli("stamp");
    cfg.timestamp = true;
    cfg.n_max = 5;
    REQUIRE(run_command(cmd_tv, cfg).exit_code == 0);
    auto tv = lines(fs::path(cfg.out) / "tv.csv");
    CHECK(tv[0].rfind("# generated ", 0) == 0);
    CHECK(tv[1] == "n,tv,bound_2PTgtn");
}
