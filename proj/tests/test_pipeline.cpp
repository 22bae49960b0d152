#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "regimekit/pipeline.hpp"

using namespace regimekit;
namespace fs = std::filesystem;

namespace {

// Synthetic price history: lognormal walk with a one-off volatility burst so
// the regime machinery has something to find. Six calendar years of
// weekday-ish data.
void write_fixture_csv(const fs::path& path, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    std::ofstream out(path);
    out << "Date,Open,High,Low,Close,Volume\n";
    Date d{2004, 1, 2};
    double price = 100.0;
    int day = 0;
    while (d.year < 2010) {
        double vol = 0.010;
        if (d.year == 2007 && d.month >= 9) vol = 0.045;  // burst
        if (d.year == 2008 && d.month <= 3) vol = 0.030;
        price *= std::exp(vol * g(rng));
        out << d.str() << ",0,0,0," << csv::fmt_double(price) << ",1000\n";
        // skip two days of every seven, roughly a trading calendar
        d = d.next();
        if (++day % 5 == 0) d = d.next().next();
    }
}

struct Fixture {
    fs::path dir;
    PipelineConfig cfg;

    Fixture() {
        dir = fs::temp_directory_path() / "regimekit_pipeline_test";
        fs::remove_all(dir);
        fs::create_directories(dir / "data");
        write_fixture_csv(dir / "data" / "AAA.csv", 1);
        write_fixture_csv(dir / "data" / "BBB.csv", 2);
        std::string ini =
            "[data]\n"
            "dir = " + (dir / "data").string() + "\n"
            "developed = AAA,BBB\n"
            "[output]\n"
            "dir = " + (dir / "out").string() + "\n";
        cfg = parse_config(ini);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("pipeline end-to-end on synthetic tickers") {
    Fixture fx;
    RunManifest manifest = run_pipeline(fx.cfg, all_stages());

    SECTION("stage outputs exist") {
        for (const char* rel :
             {"ingest/AAA.returns.csv", "ingest/AAA.states.csv", "ingest/AAA.cutoffs.json",
              "bds/bds.csv", "regimes/AAA.decomp.csv", "regimes/AAA.dq.csv",
              "regimes/AAA.labels.csv", "regimes/AAA.years.json",
              "sensitivity/AAA.sensitivity.json", "hhsa/profiles.csv",
              "report/pame_developed.csv", "report/unconditional.csv", "report/order1.csv",
              "report/orderk.csv", "report/regime_years.csv", "report/sensitivity.json",
              "report/report.json", "report/tables.txt"}) {
            INFO(rel);
            REQUIRE(fs::exists(fx.cfg.output_dir + "/" + rel));
            REQUIRE(manifest.files.count(rel) == 1);
        }
        REQUIRE(fs::exists(fx.cfg.output_dir + "/manifest.json"));
        REQUIRE(manifest.timings.size() == 8);
    }

    SECTION("states file carries literal R1..R5 labels") {
        csv::Table t = csv::read_file(fx.cfg.output_dir + "/ingest/AAA.states.csv");
        REQUIRE(t.header == std::vector<std::string>{"date", "state"});
        REQUIRE(!t.rows.empty());
        for (const auto& row : t.rows) {
            REQUIRE(row.at(1).size() == 2);
            REQUIRE(row.at(1)[0] == 'R');
        }
    }

    SECTION("bds rows: one per (ticker, m)") {
        csv::Table t = csv::read_file(fx.cfg.output_dir + "/bds/bds.csv");
        REQUIRE(t.header ==
                std::vector<std::string>{"ticker", "m", "epsilon", "statistic", "p_value"});
        REQUIRE(t.rows.size() == 4);  // 2 tickers x m in {2,3}
    }

    SECTION("labels partition and years JSON") {
        csv::Table t = csv::read_file(fx.cfg.output_dir + "/regimes/AAA.labels.csv");
        REQUIRE(t.header == std::vector<std::string>{"date", "energy", "label"});
        for (const auto& row : t.rows) {
            const std::string& l = row.at(2);
            REQUIRE((l == "Normal" || l == "High" || l == "Extreme"));
        }
        auto jy = nlohmann::json::parse(slurp(fx.cfg.output_dir + "/regimes/AAA.years.json"));
        REQUIRE(jy.contains("extreme"));
        REQUIRE(jy["tau2"].get<double>() > jy["tau1"].get<double>());
    }

    SECTION("rerun is byte-identical apart from the manifest") {
        std::map<std::string, std::string> before = manifest.files;
        PipelineConfig cfg2 = fx.cfg;
        cfg2.output_dir = (fx.dir / "out2").string();
        RunManifest m2 = run_pipeline(cfg2, all_stages());
        REQUIRE(m2.files == before);
        // spot-check one file byte for byte
        REQUIRE(slurp(fx.cfg.output_dir + "/report/report.json") ==
                slurp(cfg2.output_dir + "/report/report.json"));
    }

    SECTION("stage-by-stage run reproduces the full run byte for byte") {
        PipelineConfig cfg3 = fx.cfg;
        cfg3.output_dir = (fx.dir / "out3").string();
        std::map<std::string, std::string> collected;
        for (Stage st : {Stage::Ingest, Stage::Bds, Stage::Regimes, Stage::Sensitivity,
                         Stage::Hhsa, Stage::Vlmc, Stage::Metrics, Stage::Report}) {
            RunManifest m = run_pipeline(cfg3, {st});
            for (const auto& [k, v] : m.files) collected[k] = v;
        }
        REQUIRE(collected == manifest.files);
    }

    SECTION("CSV and JSON report values agree") {
        auto report = nlohmann::json::parse(slurp(fx.cfg.output_dir + "/report/report.json"));
        csv::Table tu = csv::read_file(fx.cfg.output_dir + "/report/unconditional.csv");
        for (const auto& row : tu.rows) {
            const std::string& group = row.at(0);
            std::string regime = csv::lower(row.at(1));
            auto& m = report["metrics"][group][regime]["unconditional"];
            for (int i = 0; i < 5; ++i) {
                double v;
                REQUIRE(csv::parse_double(row.at(2 + static_cast<std::size_t>(i)), v));
                REQUIRE(v == m["p"][static_cast<std::size_t>(i)].get<double>());
            }
            double entropy;
            REQUIRE(csv::parse_double(row.at(8), entropy));
            REQUIRE(entropy == m["entropy_bits"].get<double>());
        }
    }
}

TEST_CASE("pipeline: empty stage set emits only the manifest") {
    Fixture fx;
    PipelineConfig cfg = fx.cfg;
    cfg.output_dir = (fx.dir / "out_empty").string();
    RunManifest m = run_pipeline(cfg, {});
    REQUIRE(m.files.empty());
    REQUIRE(fs::exists(cfg.output_dir + "/manifest.json"));
    REQUIRE_FALSE(fs::exists(cfg.output_dir + "/ingest"));
}

TEST_CASE("pipeline: single stage on one ticker") {
    Fixture fx;
    PipelineConfig cfg = fx.cfg;
    cfg.filter_tickers({"AAA"});
    cfg.output_dir = (fx.dir / "out_single").string();
    run_pipeline(cfg, {Stage::Ingest});
    RunManifest m = run_pipeline(cfg, {Stage::Regimes});
    REQUIRE(fs::exists(cfg.output_dir + "/regimes/AAA.labels.csv"));
    REQUIRE_FALSE(fs::exists(cfg.output_dir + "/regimes/BBB.labels.csv"));
    REQUIRE(m.files.count("regimes/AAA.labels.csv") == 1);
}

TEST_CASE("pipeline error paths") {
    SECTION("config parse errors") {
        REQUIRE_THROWS_AS(parse_config("nonsense\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("[data]\nunknown_key = 1\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("[thresholds]\na = x\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config(""), ConfigError);  // no tickers
        REQUIRE_THROWS_AS(parse_config("[data]\ndeveloped = A\n[thresholds]\na = 9\nb = 6\n"),
                          ConfigError);
    }

    SECTION("missing inputs") {
        Fixture fx;
        PipelineConfig cfg = fx.cfg;
        cfg.developed.push_back("MISSING");
        cfg.output_dir = (fx.dir / "out_err").string();
        REQUIRE_THROWS_AS(run_pipeline(cfg, {Stage::Ingest}), MissingInputError);
    }

    SECTION("missing upstream outputs") {
        Fixture fx;
        PipelineConfig cfg = fx.cfg;
        cfg.output_dir = (fx.dir / "out_err2").string();
        REQUIRE_THROWS_AS(run_pipeline(cfg, {Stage::Bds}), MissingStageOutputError);
    }
}
