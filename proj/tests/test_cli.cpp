// Integration tests for the command-line front end: spawn the built binary
// and check exit codes and artifacts. The binary path and preset directory
// come from compile definitions.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "hits_cli_out.txt";
    const std::string cmd = std::string(HITS_CLI_BINARY) + " " + args + " >" + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(out);
    std::ostringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

std::string write_tiny_config(const std::string& name, int max_epochs = 80) {
    const fs::path path = fs::temp_directory_path() / (name + ".json");
    std::ofstream os(path);
    os << R"({
  "name": ")" << name
       << R"(",
  "system": "harmonic",
  "dts": [0.08, 0.32],
  "horizon": 0.96,
  "arch": [2, 8, 2],
  "train": {"max_epochs": )"
       << max_epochs << R"(, "p_steps": 5},
  "samples": {"train": 8, "validate": 4, "test": 4},
  "seed": 5,
  "schemes": ["single-scale", "multiscale"],
  "out_dir": ")" << (fs::temp_directory_path() / (name + "-out")).string()
       << R"("
})";
    return path.string();
}

}  // namespace

TEST_CASE("simulate writes a near-periodic harmonic trajectory") {
    const fs::path csv = fs::temp_directory_path() / "hits_cli_sim.csv";
    auto r = run_cli("simulate --system harmonic --x0 1,0 --dt 0.01 --steps 628 --out " +
                     csv.string());
    REQUIRE(r.exit_code == 0);
    std::ifstream is(csv);
    std::string line, last;
    std::getline(is, line);
    CHECK(line == "time,x0,x1");
    while (std::getline(is, line)) {
        if (!line.empty()) last = line;
    }
    std::stringstream ss(last);
    std::string t, x, y;
    std::getline(ss, t, ',');
    std::getline(ss, x, ',');
    std::getline(ss, y, ',');
    CHECK(std::abs(std::stod(x) - 1.0) < 0.01);
    CHECK(std::abs(std::stod(y)) < 0.01);
    fs::remove(csv);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("no-such-command").exit_code == 2);
    CHECK(run_cli("simulate --system harmonic").exit_code == 2);        // missing required flags
    CHECK(run_cli("simulate --bogus-flag 1").exit_code == 2);           // unknown flag
    CHECK(run_cli("bench").exit_code == 2);                             // no config/preset
    CHECK(run_cli("bench --preset does-not-exist").exit_code == 2);
    CHECK(run_cli("simulate --system nosuch --x0 1,0 --dt 0.1 --steps 2").exit_code == 2);
}

TEST_CASE("train rejects p_steps = 0 as a usage error") {
    const fs::path path = fs::temp_directory_path() / "hits_cli_badcfg.json";
    {
        std::ofstream os(path);
        os << R"({"system":"harmonic","dts":[0.1],"horizon":1.0,"arch":[2,8,2],
                  "train":{"p_steps":0},"samples":{"train":4,"validate":2,"test":2},
                  "out_dir":"unused"})";
    }
    auto r = run_cli("train --config " + path.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("p_steps") != std::string::npos);
    fs::remove(path);
}

TEST_CASE("bench runs a tiny config end to end and is repeatable") {
    const std::string cfg = write_tiny_config("clitiny");
    const fs::path out_a = fs::temp_directory_path() / "clitiny-a";
    const fs::path out_b = fs::temp_directory_path() / "clitiny-b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);

    auto ra = run_cli("bench --config " + cfg + " --seed 7 --out " + out_a.string());
    REQUIRE(ra.exit_code == 0);
    CHECK(ra.output.find("manifest.json") != std::string::npos);
    auto rb = run_cli("bench --config " + cfg + " --seed 7 --out " + out_b.string());
    REQUIRE(rb.exit_code == 0);

    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    CHECK(slurp(out_a / "noise-0/errors_multiscale.csv") ==
          slurp(out_b / "noise-0/errors_multiscale.csv"));
    CHECK(slurp(out_a / "noise-0/models/model_dt0.08.txt") ==
          slurp(out_b / "noise-0/models/model_dt0.08.txt"));

    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("gen-data, train, select and rollout chain together") {
    const std::string cfg = write_tiny_config("clichain", 60);
    const fs::path base = fs::temp_directory_path() / "clichain-out";
    fs::remove_all(base);

    REQUIRE(run_cli("gen-data --config " + cfg).exit_code == 0);
    CHECK(fs::exists(base / "data/train.ds"));
    CHECK(fs::exists(base / "data/validate.ds"));
    CHECK(fs::exists(base / "data/test.ds"));

    REQUIRE(run_cli("train --config " + cfg).exit_code == 0);
    const std::string m1 = (base / "models/model_dt0.08.txt").string();
    const std::string m2 = (base / "models/model_dt0.32.txt").string();
    CHECK(fs::exists(m1));
    CHECK(fs::exists(m2));

    auto sel = run_cli("select --config " + cfg + " --models " + m1 + "," + m2);
    CHECK(sel.exit_code == 0);
    CHECK(sel.output.find("lower") != std::string::npos);

    const fs::path roll_csv = fs::temp_directory_path() / "clichain_roll.csv";
    auto roll = run_cli("rollout --models " + m1 + "," + m2 + " --x0 0.5,0.5 --T 0.96 --out " +
                        roll_csv.string());
    CHECK(roll.exit_code == 0);
    std::ifstream is(roll_csv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "time,level,x0,x1");

    auto hyb = run_cli("rollout --models " + m2 + " --x0 0.5,0.5 --T 0.96 --rk-h 0.08 --out " +
                       roll_csv.string());
    CHECK(hyb.exit_code == 0);
    std::ifstream is2(roll_csv);
    std::getline(is2, header);
    std::string body((std::istreambuf_iterator<char>(is2)), std::istreambuf_iterator<char>());
    CHECK(body.find("rk") != std::string::npos);

    fs::remove(roll_csv);
    fs::remove_all(base);
}

TEST_CASE("increments subcommand writes one csv per step") {
    const fs::path cfg = fs::temp_directory_path() / "hits_cli_inc.json";
    {
        std::ofstream os(cfg);
        os << R"({"system":"harmonic","region":[[-1,1],[-1,1]],"dt":0.16,"j_max":3,
                  "grid_per_axis":4,"out_dir":")"
           << (fs::temp_directory_path() / "hits_cli_inc_out").string() << R"("})";
    }
    auto r = run_cli("increments --config " + cfg.string());
    REQUIRE(r.exit_code == 0);
    const fs::path out = fs::temp_directory_path() / "hits_cli_inc_out";
    CHECK(fs::exists(out / "increments_j001.csv"));
    CHECK(fs::exists(out / "increments_j003.csv"));
    fs::remove(cfg);
    fs::remove_all(out);
}
