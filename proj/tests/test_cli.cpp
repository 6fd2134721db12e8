#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koop/cli/config.hpp"
#include "koop/errors.hpp"
#include "koop/io/format.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("koop_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(KOOP_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string l; std::getline(ss, l);) out.push_back(l);
    return out;
}

json small_config(const std::string& kind) {
    json c = {{"schema_version", 1},
              {"system", {{"name", "duffing"}}},
              {"seed", 7},
              {"data", {{"n_traj", 12}, {"traj_len", 8}}},
              {"model", {{"kind", kind}, {"edmd_degree", 2}}},
              {"training", {{"epochs_stage1", 5}, {"epochs_stage2", 5}}},
              {"tasks", {{"predict", {{"x0", {0.4, 0.0}}, {"horizon", 15}}}}}};
    if (kind != "edmd") {
        c["model"]["features"] = {{"outputs", 2}, {"hidden", {4}}};
        c["model"]["tests"] = {{"outputs", 3}, {"hidden", {4}}};
    }
    return c;
}

fs::path write_config(const fs::path& dir, const json& c) {
    auto p = dir / "config.json";
    std::ofstream(p) << c.dump(2);
    return p;
}

std::string pipeline(const fs::path& cfg, const fs::path& out) {
    const auto log = out.parent_path() / (out.filename().string() + ".log");
    const std::string common = " --config " + cfg.string() + " --out " + out.string();
    for (const char* step : {"gen-data", "train", "eval predict", "control lqr"}) {
        const int rc = run(std::string(step) + common, log);
        if (rc != 0) return std::string(step) + " exited " + std::to_string(rc) + ": " + slurp(log);
    }
    return "";
}

} // namespace

TEST(Config, UnknownKeyIsUsageErrorWithPath) {
    json c = small_config("edmd");
    c["training"]["epochs_stage3"] = 4;
    try {
        koop::cli::parse_config(c);
        FAIL() << "accepted an unknown key";
    } catch (const koop::UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("training.epochs_stage3"), std::string::npos) << e.what();
    }
}

TEST(Config, SchemaVersionRequired) {
    json c = small_config("edmd");
    c["schema_version"] = 2;
    EXPECT_THROW(koop::cli::parse_config(c), koop::UsageError);
    c.erase("schema_version");
    EXPECT_THROW(koop::cli::parse_config(c), koop::UsageError);
}

TEST(Config, WrongShapesRejected) {
    json c = small_config("edmd");
    c["tasks"]["predict"]["x0"] = {1.0, 2.0, 3.0};
    EXPECT_THROW(koop::cli::parse_config(c), koop::UsageError);
    c = small_config("edmd");
    c["model"]["kind"] = "dmd";
    EXPECT_THROW(koop::cli::parse_config(c), koop::UsageError);
    c = small_config("edmd");
    c["system"]["name"] = "lorenz";
    EXPECT_THROW(koop::cli::parse_config(c), koop::UsageError);
}

TEST(Config, HashIgnoresOutAndThreads) {
    json a = small_config("edmd");
    json b = a;
    b["out"] = "elsewhere";
    b["threads"] = 3;
    EXPECT_EQ(koop::cli::config_hash(koop::cli::parse_config(a)), koop::cli::config_hash(koop::cli::parse_config(b)));
    b["seed"] = 8;
    EXPECT_NE(koop::cli::config_hash(koop::cli::parse_config(a)), koop::cli::config_hash(koop::cli::parse_config(b)));
}

TEST(Config, BundledRecipesParse) {
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(KOOP_RECIPES_DIR)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(koop::cli::load_config(entry.path().string())) << entry.path();
        ++count;
    }
    EXPECT_EQ(count, 11u);
}

TEST(Cli, VerifyPasses) {
    const auto dir = scratch("verify");
    EXPECT_EQ(run("verify", dir / "log"), 0) << slurp(dir / "log");
    EXPECT_NE(slurp(dir / "log").find("PASS"), std::string::npos);
}

TEST(Cli, PredictCsvShape) {
    const auto dir = scratch("predict");
    const auto cfg = write_config(dir, small_config("edmd"));
    const auto out = dir / "run";
    ASSERT_EQ(pipeline(cfg, out), "");
    const auto rows = lines(slurp(out / "predict.csv"));
    ASSERT_EQ(rows.size(), 1u + 16u); // header + horizon+1
    EXPECT_EQ(rows[0], "k,chi_1,chi_2");
    for (const auto& r : rows) EXPECT_EQ(std::count(r.begin(), r.end(), ','), 2) << r;
    EXPECT_EQ(lines(slurp(out / "predict_true.csv")).size(), rows.size());
    const auto prov = json::parse(slurp(out / "predict.csv.prov.json"));
    EXPECT_EQ(prov.at("seed"), 7);
}

TEST(Cli, ArtifactsAreBitReproducible) {
    const auto dir = scratch("determinism");
    const auto cfg = write_config(dir, small_config("proposed"));
    ASSERT_EQ(pipeline(cfg, dir / "a"), "");
    ASSERT_EQ(pipeline(cfg, dir / "b"), "");
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto other = dir / "b" / entry.path().filename();
        ASSERT_TRUE(fs::exists(other)) << other;
        EXPECT_EQ(koop::io::hash_hex(slurp(entry.path())), koop::io::hash_hex(slurp(other))) << entry.path().filename();
        ++compared;
    }
    EXPECT_GE(compared, 10u);
}

TEST(Cli, SeedOverrideChangesData) {
    const auto dir = scratch("seed");
    const auto cfg = write_config(dir, small_config("edmd"));
    ASSERT_EQ(run("gen-data --config " + cfg.string() + " --out " + (dir / "a").string(), dir / "log"), 0);
    ASSERT_EQ(run("gen-data --config " + cfg.string() + " --out " + (dir / "b").string() + " --seed 8", dir / "log"), 0);
    EXPECT_NE(slurp(dir / "a" / "dataset.csv"), slurp(dir / "b" / "dataset.csv"));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit");
    const auto cfg = write_config(dir, small_config("edmd"));
    EXPECT_EQ(run("", dir / "log"), 2);
    EXPECT_EQ(run("eval nonsense --config " + cfg.string(), dir / "log"), 2);
    EXPECT_EQ(run("train --config " + (dir / "missing.json").string(), dir / "log"), 2);

    const auto empty = dir / "empty";
    fs::create_directories(empty);
    EXPECT_EQ(run("eval predict --config " + cfg.string() + " --out " + empty.string(), dir / "log"), 6);
    EXPECT_NE(slurp(dir / "log").find("error[dependency]"), std::string::npos) << slurp(dir / "log");
    EXPECT_EQ(run("train --config " + cfg.string() + " --out " + empty.string(), dir / "log"), 6);

    json bad = small_config("edmd");
    bad["bogus"] = true;
    const auto bad_cfg = dir / "bad.json";
    std::ofstream(bad_cfg) << bad.dump();
    EXPECT_EQ(run("gen-data --config " + bad_cfg.string(), dir / "log"), 2);
    EXPECT_NE(slurp(dir / "log").find("bogus"), std::string::npos);
}
