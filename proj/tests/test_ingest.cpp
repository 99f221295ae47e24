#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "fedsim/ingest.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

fs::path make_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

const char* kHeader =
    "timestamp,acc:x,acc:y,gyro:x,label:SITTING,label:FIX_walking\n";

}  // namespace

TEST_CASE("two well-formed client files load as two tables") {
    const auto dir = make_dir("fedsim_ingest_two");
    write_file(dir / "b.csv", std::string(kHeader) + "1,0.1,0.2,0.3,1,0\n2,0.4,0.5,0.6,0,1\n");
    write_file(dir / "a.csv", std::string(kHeader) + "5,1,2,3,0,1\n");

    const auto result = ingest::load_clients(dir.string());
    REQUIRE(result.tables.size() == 2);
    CHECK(result.tables[0].client_id == "a");  // sorted by id
    CHECK(result.tables[1].client_id == "b");
    CHECK(result.tables[0].rows.size() == 1);
    CHECK(result.tables[1].rows.size() == 2);
    CHECK(result.schema.feature_names ==
          std::vector<std::string>{"acc:x", "acc:y", "gyro:x"});
    CHECK(result.tables[0].rows[0].label == 3);  // walking
    CHECK(result.dropped_rows_total == 0);
}

TEST_CASE("rows with zero or two label flags are dropped and counted") {
    const auto dir = make_dir("fedsim_ingest_drop");
    write_file(dir / "c.csv", std::string(kHeader) +
                                  "1,0.1,0.2,0.3,1,1\n"   // sitting + walking
                                  "2,0.1,0.2,0.3,0,0\n"   // no label
                                  "3,0.1,0.2,0.3,1,0\n"); // valid
    const auto result = ingest::load_clients(dir.string());
    REQUIRE(result.tables.size() == 1);
    CHECK(result.tables[0].rows.size() == 1);
    CHECK(result.tables[0].dropped_rows == 2);
    CHECK(result.dropped_rows_total == 2);
    // kept + dropped accounts for every input row
    CHECK(result.tables[0].rows.size() + result.tables[0].dropped_rows == 3);
}

TEST_CASE("manifest index restricts and maps the loaded files") {
    const auto dir = make_dir("fedsim_ingest_manifest");
    write_file(dir / "x.csv", std::string(kHeader) + "1,1,2,3,1,0\n");
    write_file(dir / "ignored.csv", std::string(kHeader) + "1,9,9,9,1,0\n");
    write_file(dir / "manifest.json", R"({"clients": {"alpha": "x.csv"}})");
    const auto result = ingest::load_clients(dir.string());
    REQUIRE(result.tables.size() == 1);
    CHECK(result.tables[0].client_id == "alpha");
}

TEST_CASE("rows are sorted by timestamp") {
    const auto dir = make_dir("fedsim_ingest_sort");
    write_file(dir / "c.csv", std::string(kHeader) + "5,1,1,1,1,0\n2,2,2,2,1,0\n9,3,3,3,1,0\n");
    const auto result = ingest::load_clients(dir.string());
    const auto& rows = result.tables[0].rows;
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].timestamp == 2);
    CHECK(rows[1].timestamp == 5);
    CHECK(rows[2].timestamp == 9);
}

TEST_CASE("select_features drops a group when one feature crosses the threshold") {
    // acc:y missing in 61 of 100 rows; gyro fully observed.
    const auto dir = make_dir("fedsim_ingest_select");
    std::string text = kHeader;
    for (int i = 0; i < 100; ++i) {
        const bool missing = i < 61;
        text += std::to_string(i) + ",0.5," + (missing ? "" : "0.5") + ",0.5,1,0\n";
    }
    write_file(dir / "c.csv", text);
    const auto loaded = ingest::load_clients(dir.string());

    const auto reduced = ingest::select_features(loaded, 0.6);
    CHECK(reduced.schema.feature_names == std::vector<std::string>{"gyro:x"});
    CHECK(reduced.schema.sensor_groups.size() == 1);
    CHECK(reduced.tables[0].rows[0].features.size() == 1);

    SUBCASE("no missing values leaves the schema unchanged") {
        const auto same = ingest::select_features(reduced, 0.6);
        CHECK(same.schema.feature_names == reduced.schema.feature_names);
    }
    SUBCASE("selection is idempotent") {
        const auto twice = ingest::select_features(ingest::select_features(loaded, 0.6), 0.6);
        CHECK(twice.schema.feature_names == reduced.schema.feature_names);
        for (std::size_t i = 0; i < twice.tables[0].rows.size(); ++i) {
            CHECK(twice.tables[0].rows[i].features == reduced.tables[0].rows[i].features);
        }
    }
}

TEST_CASE("select_features throws when every group is dropped") {
    const auto dir = make_dir("fedsim_ingest_allgone");
    std::string text = "timestamp,acc:x,label:SITTING\n";
    for (int i = 0; i < 10; ++i) text += std::to_string(i) + ",,1\n";
    write_file(dir / "c.csv", text);
    const auto loaded = ingest::load_clients(dir.string());
    CHECK_THROWS(ingest::select_features(loaded, 0.6));
}

TEST_CASE("synthetic generator is deterministic per seed") {
    ingest::SyntheticConfig cfg;
    cfg.client_count = 3;
    cfg.class_count = 4;
    cfg.feature_dim = 5;
    cfg.proportions = {0.25, 0.25, 0.25, 0.25};
    cfg.samples_per_client = {50};
    cfg.shift_std = 0.5;
    cfg.scale_jitter = 0.1;
    cfg.dirichlet_alpha = 1.0;
    cfg.seed = 42;

    const auto a = ingest::generate_synthetic(cfg);
    const auto b = ingest::generate_synthetic(cfg);
    REQUIRE(a.tables.size() == 3);
    for (std::size_t t = 0; t < a.tables.size(); ++t) {
        REQUIRE(a.tables[t].rows.size() == b.tables[t].rows.size());
        for (std::size_t r = 0; r < a.tables[t].rows.size(); ++r) {
            CHECK(a.tables[t].rows[r].label == b.tables[t].rows[r].label);
            CHECK(a.tables[t].rows[r].features == b.tables[t].rows[r].features);
        }
    }

    cfg.seed = 43;
    const auto c = ingest::generate_synthetic(cfg);
    bool any_diff = false;
    for (std::size_t r = 0; r < a.tables[0].rows.size() && !any_diff; ++r) {
        any_diff = a.tables[0].rows[r].features != c.tables[0].rows[r].features;
    }
    CHECK(any_diff);
}

TEST_CASE("single uniform client covers every class") {
    ingest::SyntheticConfig cfg;
    cfg.client_count = 1;
    cfg.class_count = 6;
    cfg.feature_dim = 4;
    cfg.proportions = std::vector<double>(6, 1.0 / 6.0);
    cfg.samples_per_client = {120};
    cfg.seed = 7;
    const auto result = ingest::generate_synthetic(cfg);
    REQUIRE(result.tables.size() == 1);
    CHECK(result.tables[0].rows.size() == 120);
    std::map<int, std::size_t> counts;
    for (const auto& row : result.tables[0].rows) counts[row.label]++;
    REQUIRE(counts.size() == 6);
    for (const auto& [label, n] : counts) CHECK(n == 20);  // quota rounding, exact here
}

TEST_CASE("2% minority share is realized within half a percent") {
    ingest::SyntheticConfig cfg;
    cfg.client_count = 8;
    cfg.class_count = 4;
    cfg.feature_dim = 6;
    cfg.proportions = {0.40, 0.38, 0.20, 0.02};
    cfg.samples_per_client = {400};
    cfg.dirichlet_alpha = 0.0;  // exact proportions per client
    cfg.seed = 11;
    const auto result = ingest::generate_synthetic(cfg);
    std::size_t minority = 0, total = 0;
    for (const auto& t : result.tables) {
        for (const auto& row : t.rows) {
            total++;
            if (row.label == 3) minority++;
        }
    }
    const double share = static_cast<double>(minority) / static_cast<double>(total);
    CHECK(share == doctest::Approx(0.02).epsilon(0.25));
    CHECK(std::abs(share - 0.02) < 0.005);
}

TEST_CASE("synthetic config validation") {
    ingest::SyntheticConfig cfg;
    cfg.client_count = 2;
    cfg.class_count = 2;
    cfg.feature_dim = 2;
    cfg.samples_per_client = {20};
    cfg.proportions = {0.7, 0.2};  // sums to 0.9
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.proportions = {0.7, 0.3};
    CHECK_NOTHROW(cfg.validate());
    cfg.samples_per_client = {20, 30, 40};  // neither 1 nor client_count
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("explicit per-client proportions override the shared mix") {
    ingest::SyntheticConfig cfg;
    cfg.client_count = 2;
    cfg.class_count = 3;
    cfg.feature_dim = 4;
    cfg.proportions = {0.4, 0.4, 0.2};
    cfg.per_client_proportions = {0.8, 0.1, 0.1, 0.1, 0.1, 0.8};
    cfg.samples_per_client = {100};
    cfg.seed = 5;
    const auto result = ingest::generate_synthetic(cfg);
    REQUIRE(result.tables.size() == 2);
    std::map<int, std::size_t> c0, c1;
    for (const auto& row : result.tables[0].rows) c0[row.label]++;
    for (const auto& row : result.tables[1].rows) c1[row.label]++;
    CHECK(c0[0] == 80);  // quota rounding is exact at these proportions
    CHECK(c0[1] == 10);
    CHECK(c0[2] == 10);
    CHECK(c1[2] == 80);

    SUBCASE("row size and row sums are validated") {
        cfg.per_client_proportions = {0.8, 0.1, 0.1};  // one row missing
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
        cfg.per_client_proportions = {0.8, 0.1, 0.1, 0.5, 0.1, 0.8};
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
    }
}
