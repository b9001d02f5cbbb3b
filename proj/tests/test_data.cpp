#include "doctest.h"

#include "desert/data.hpp"
#include "desert/error.hpp"
#include "helpers.hpp"

using namespace desert;

TEST_SUITE("data") {

TEST_CASE("three-row file parses with one covariate") {
    const auto dir = testing::temp_dir("data_small");
    testing::write_text(dir / "a.csv", "race,quality,callback,exp\n1,0,1,3\n0,1,0,5\n1,1,1,9\n");
    const Dataset d = load_csv(dir / "a.csv", Schema::parse("s=race,z=quality,y=callback"));
    CHECK(d.size() == 3);
    CHECK(d.dim() == 1);
    CHECK(d.covariate_names()[0] == "exp");
    CHECK(d[1].z == 1);
    CHECK(d[2].x[0] == 9.0);
    CHECK(d.scaling().ranges[0].min == 3.0);
    CHECK(d.scaling().ranges[0].max == 9.0);
}

TEST_CASE("non-binary outcome reports its row") {
    const auto dir = testing::temp_dir("data_bad");
    std::string text = "race,quality,callback,exp\n";
    for (int i = 1; i <= 8; ++i) text += std::string("1,0,") + (i == 7 ? "2" : "1") + ",1\n";
    testing::write_text(dir / "a.csv", text);
    try {
        load_csv(dir / "a.csv", Schema::parse("s=race,z=quality,y=callback"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 7);
    }
}

TEST_CASE("missing column and empty files") {
    const auto dir = testing::temp_dir("data_missing");
    testing::write_text(dir / "a.csv", "s,z,x\n1,0,1\n");
    CHECK_THROWS_AS(load_csv(dir / "a.csv", Schema{}), SchemaError);
    testing::write_text(dir / "b.csv", "");
    CHECK_THROWS_AS(load_csv(dir / "b.csv", Schema{}), EmptyDataError);
    testing::write_text(dir / "c.csv", "s,z,y,x\n");
    CHECK_THROWS_AS(load_csv(dir / "c.csv", Schema{}), EmptyDataError);
    testing::write_text(dir / "d.csv", "s,z,y,x\n1,0,1,2\n0,0,1,2\n");
    CHECK_THROWS_AS(load_csv(dir / "d.csv", Schema{}), DegenerateCovariateError);
}

TEST_CASE("custom truthy tokens and absent outcome column") {
    const auto dir = testing::temp_dir("data_tokens");
    testing::write_text(dir / "a.csv", "s,z,x\nyes,no,1\nno,yes,2\n");
    Schema sc;
    sc.y.clear();
    sc.true_tokens = {"yes"};
    sc.false_tokens = {"no"};
    const Dataset d = load_csv(dir / "a.csv", sc);
    CHECK(d[0].s == 1);
    CHECK(d[0].z == 0);
    CHECK(d[1].y == 0);
}

TEST_CASE("scaling is affine, idempotent and clamps new rows") {
    std::vector<ObservationRecord> recs{{0, 0, {2.0}, 0}, {1, 1, {4.0}, 1}, {0, 1, {6.0}, 1}};
    Scaling sc;
    sc.ranges = {{2.0, 6.0}};
    const Dataset raw(recs, {"v"}, sc, false);
    const Dataset scaled = scale_covariates(raw);
    CHECK(scaled[0].x[0] == 0.0);
    CHECK(scaled[1].x[0] == 0.5);
    CHECK(scaled[2].x[0] == 1.0);
    const Dataset twice = scale_covariates(scaled);
    for (std::size_t i = 0; i < 3; ++i) CHECK(twice[i].x[0] == scaled[i].x[0]);

    bool clamped = false;
    CHECK(sc.apply({8.0}, &clamped)[0] == 1.0);
    CHECK(clamped);
    CHECK(sc.apply({3.0}, &clamped)[0] == 0.25);
    CHECK_FALSE(clamped);
}

TEST_CASE("write then load reproduces the records exactly") {
    const auto dir = testing::temp_dir("data_roundtrip");
    const Dataset d = testing::constant_model_data(50, {0.3, 0.6, 0.25, 0.15}, 3, 2);
    Dataset copy = d;
    copy.schema = Schema{};
    write_csv(dir / "r.csv", copy);
    const Dataset back = load_csv(dir / "r.csv", Schema{});
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i].s == d[i].s);
        CHECK(back[i].z == d[i].z);
        CHECK(back[i].y == d[i].y);
        CHECK(back[i].x == d[i].x);
    }
}

TEST_CASE("stratum counts and positivity") {
    const Dataset one({{0, 1, {0.0}, 0}, {0, 1, {1.0}, 0}}, {"x"}, Scaling::identity(1), true);
    const auto c = stratum_counts(one);
    CHECK(c[0][1] == 2);
    CHECK(c[0][0] + c[1][0] + c[1][1] == 0);
    CHECK_THROWS_AS(require_positivity(one), PositivityError);

    std::vector<ObservationRecord> recs;
    for (int i = 0; i < 400; ++i) recs.push_back({i % 2, (i / 2) % 2, {i / 400.0}, 0});
    const Dataset bal(recs, {"x"}, Scaling::identity(1), true);
    const auto b = stratum_counts(bal);
    for (int s = 0; s < 2; ++s)
        for (int z = 0; z < 2; ++z) CHECK(b[s][z] == 100);
    CHECK_NOTHROW(require_positivity(bal));
}

}
