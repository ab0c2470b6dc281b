#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "tsdet/errors.hpp"
#include "tsdet/io.hpp"

using namespace tsd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("tsdet_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int counter_;
};

int TempDir::counter_ = 0;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void dump(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

BoostedModel sample_model() {
    BoostedModel m;
    m.class_name = "prohibitory";
    m.subcategory = 2;
    m.window_w = 24;
    m.window_h = 24;
    m.padded_w = 32;
    m.padded_h = 32;
    m.margin_x = 4;
    m.margin_y = 4;
    m.layout.cell_w = 8;
    m.layout.cell_h = 8;
    m.layout.channels = 10;
    m.layout.family = "acf";
    m.nu = 0.1;
    m.depth = 2;

    DecisionTree t0;
    t0.depth = 2;
    t0.nodes = {{17, 0.1f}, {251, -1.0f / 3.0f}, {9, std::nextafterf(0.5f, 1.0f)}};
    t0.leaves = {1, -1, -1, 1};
    DecisionTree t1;
    t1.depth = 2;
    t1.nodes = {{3, 1e-20f}, {640, 123456.75f}, {0, -0.0f}};
    t1.leaves = {-1, 1, 1, -1};
    m.trees = {t0, t1};

    m.coeffs = {0.1 + 0.2, 4.0 * std::atan(1.0)};
    m.rejects = {-1e-300, 0.10986122886681098};
    m.calibration.a = -1.4142135623730951;
    m.calibration.b = 1.0 / 3.0;
    m.calibration.increasing = true;
    return m;
}

SubcategoryLayout sample_layout() {
    SubcategoryLayout layout;
    layout.class_name = "mandatory";
    layout.K = 2;
    layout.merged_small = false;
    SubcategoryWindow w0;
    w0.window_w = 20;
    w0.window_h = 20;
    w0.padded_w = 32;
    w0.padded_h = 32;
    w0.margin_x = 6;
    w0.margin_y = 6;
    w0.size = 41;
    w0.medoid = 17;
    SubcategoryWindow w1 = w0;
    w1.window_w = 28;
    w1.size = 23;
    w1.medoid = 3;
    layout.windows = {w0, w1};
    layout.assignments = {0, 1, 1, 0, 0, 1};
    layout.notes = {"merged nothing", "sigma from lower median"};
    return layout;
}

}  // namespace

TEST_CASE("model round trip preserves every field bit for bit") {
    TempDir tmp;
    const BoostedModel m = sample_model();
    const std::string path = tmp.file("a.model");
    write_model(path, m);
    const BoostedModel r = read_model(path);

    CHECK(r.class_name == m.class_name);
    CHECK(r.subcategory == m.subcategory);
    CHECK(r.window_w == m.window_w);
    CHECK(r.window_h == m.window_h);
    CHECK(r.padded_w == m.padded_w);
    CHECK(r.padded_h == m.padded_h);
    CHECK(r.margin_x == m.margin_x);
    CHECK(r.margin_y == m.margin_y);
    CHECK(r.layout.cell_w == m.layout.cell_w);
    CHECK(r.layout.cell_h == m.layout.cell_h);
    CHECK(r.layout.channels == m.layout.channels);
    CHECK(r.layout.family == m.layout.family);
    CHECK(r.nu == m.nu);
    CHECK(r.depth == m.depth);
    REQUIRE(r.trees.size() == m.trees.size());
    for (size_t t = 0; t < m.trees.size(); ++t) {
        CHECK(r.trees[t].depth == m.trees[t].depth);
        REQUIRE(r.trees[t].nodes.size() == m.trees[t].nodes.size());
        for (size_t n = 0; n < m.trees[t].nodes.size(); ++n) {
            CHECK(r.trees[t].nodes[n].feature == m.trees[t].nodes[n].feature);
            CHECK(r.trees[t].nodes[n].threshold == m.trees[t].nodes[n].threshold);
        }
        REQUIRE(r.trees[t].leaves == m.trees[t].leaves);
    }
    REQUIRE(r.coeffs.size() == m.coeffs.size());
    for (size_t i = 0; i < m.coeffs.size(); ++i) CHECK(r.coeffs[i] == m.coeffs[i]);
    REQUIRE(r.rejects.size() == m.rejects.size());
    for (size_t i = 0; i < m.rejects.size(); ++i) CHECK(r.rejects[i] == m.rejects[i]);
    CHECK(r.calibration.a == m.calibration.a);
    CHECK(r.calibration.b == m.calibration.b);
    CHECK(r.calibration.increasing == m.calibration.increasing);
}

TEST_CASE("model write is byte deterministic across a read cycle") {
    TempDir tmp;
    const BoostedModel m = sample_model();
    const std::string p1 = tmp.file("a.model");
    const std::string p2 = tmp.file("b.model");
    write_model(p1, m);
    write_model(p2, read_model(p1));
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("model with no reject thresholds round trips") {
    TempDir tmp;
    BoostedModel m = sample_model();
    m.rejects.clear();
    const std::string path = tmp.file("soft.model");
    write_model(path, m);
    CHECK(read_model(path).rejects.empty());
}

TEST_CASE("model reader rejects structural damage") {
    TempDir tmp;
    const std::string good = tmp.file("good.model");
    write_model(good, sample_model());
    const std::string text = slurp(good);

    SUBCASE("unsupported version") {
        const std::string p = tmp.file("v9.model");
        std::string bad = text;
        bad.replace(bad.find("tsdet-model 1"), 13, "tsdet-model 9");
        dump(p, bad);
        CHECK_THROWS_AS(read_model(p), DataError);
    }
    SUBCASE("wrong magic") {
        const std::string p = tmp.file("magic.model");
        dump(p, "tsdet-layout 1\n" + text.substr(text.find('\n') + 1));
        CHECK_THROWS_AS(read_model(p), DataError);
    }
    SUBCASE("leaf vote outside +-1") {
        const std::string p = tmp.file("leaf.model");
        std::string bad = text;
        bad.replace(bad.find("leaves 1 -1 -1 1"), 16, "leaves 1 -1 -1 2");
        dump(p, bad);
        CHECK_THROWS_AS(read_model(p), DataError);
    }
    SUBCASE("node count disagrees with depth") {
        const std::string p = tmp.file("nodes.model");
        std::string bad = text;
        bad.replace(bad.find("nodes 3"), 7, "nodes 4");
        dump(p, bad);
        CHECK_THROWS_AS(read_model(p), DataError);
    }
    SUBCASE("coeff count disagrees with tree count") {
        const std::string p = tmp.file("coeffs.model");
        std::string bad = text;
        bad.replace(bad.find("coeffs 2"), 8, "coeffs 3");
        dump(p, bad);
        CHECK_THROWS_AS(read_model(p), DataError);
    }
    SUBCASE("truncated file") {
        const std::string p = tmp.file("trunc.model");
        dump(p, text.substr(0, text.size() / 2));
        CHECK_THROWS_AS(read_model(p), DataError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_model(tmp.file("absent.model")), DataError); }
}

TEST_CASE("layout round trip preserves every field") {
    TempDir tmp;
    const SubcategoryLayout layout = sample_layout();
    const std::string path = tmp.file("a.layout");
    write_layout(path, layout);
    const SubcategoryLayout r = read_layout(path);

    CHECK(r.class_name == layout.class_name);
    CHECK(r.K == layout.K);
    CHECK(r.merged_small == layout.merged_small);
    REQUIRE(r.windows.size() == layout.windows.size());
    for (size_t c = 0; c < layout.windows.size(); ++c) {
        CHECK(r.windows[c].window_w == layout.windows[c].window_w);
        CHECK(r.windows[c].window_h == layout.windows[c].window_h);
        CHECK(r.windows[c].padded_w == layout.windows[c].padded_w);
        CHECK(r.windows[c].padded_h == layout.windows[c].padded_h);
        CHECK(r.windows[c].margin_x == layout.windows[c].margin_x);
        CHECK(r.windows[c].margin_y == layout.windows[c].margin_y);
        CHECK(r.windows[c].size == layout.windows[c].size);
        CHECK(r.windows[c].medoid == layout.windows[c].medoid);
    }
    CHECK(r.assignments == layout.assignments);
    CHECK(r.notes == layout.notes);

    const std::string p2 = tmp.file("b.layout");
    write_layout(p2, r);
    CHECK(slurp(path) == slurp(p2));
}

TEST_CASE("layout with empty assignments and notes round trips") {
    TempDir tmp;
    SubcategoryLayout layout = sample_layout();
    layout.K = 1;
    layout.windows.resize(1);
    layout.assignments.clear();
    layout.notes.clear();
    layout.merged_small = true;
    const std::string path = tmp.file("empty.layout");
    write_layout(path, layout);
    const SubcategoryLayout r = read_layout(path);
    CHECK(r.K == 1);
    CHECK(r.merged_small);
    CHECK(r.assignments.empty());
    CHECK(r.notes.empty());
}

TEST_CASE("layout reader rejects damage") {
    TempDir tmp;
    const std::string good = tmp.file("good.layout");
    write_layout(good, sample_layout());
    const std::string text = slurp(good);

    SUBCASE("K below one") {
        const std::string p = tmp.file("k0.layout");
        std::string bad = text;
        bad.replace(bad.find("K 2"), 3, "K 0");
        dump(p, bad);
        CHECK_THROWS_AS(read_layout(p), DataError);
    }
    SUBCASE("assignment outside range") {
        const std::string p = tmp.file("assign.layout");
        std::string bad = text;
        bad.replace(bad.find("0 1 1 0 0 1"), 11, "0 1 5 0 0 1");
        dump(p, bad);
        CHECK_THROWS_AS(read_layout(p), DataError);
    }
    SUBCASE("unsupported version") {
        const std::string p = tmp.file("v2.layout");
        std::string bad = text;
        bad.replace(bad.find("tsdet-layout 1"), 14, "tsdet-layout 2");
        dump(p, bad);
        CHECK_THROWS_AS(read_layout(p), DataError);
    }
}

TEST_CASE("detection files round trip through the six digit format") {
    TempDir tmp;
    std::vector<DetectionRecord> records;
    DetectionRecord a;
    a.image_id = "scene_0000";
    a.det.class_name = "danger";
    a.det.subcategory = 1;
    a.det.box = {12.5, 20.25, 44.75, 52.0};
    a.det.raw_score = 3.5;
    a.det.calibrated_score = 0.8125;
    DetectionRecord b;
    b.image_id = "scene_0001";
    b.det.class_name = "prohibitory";
    b.det.subcategory = 0;
    b.det.box = {0.0, 0.0, 17.0, 17.0};
    b.det.raw_score = -2.25;
    b.det.calibrated_score = 0.015625;
    records = {a, b};

    const std::string path = tmp.file("dets.txt");
    write_detections(path, records);
    const std::vector<DetectionRecord> r = read_detections(path);
    REQUIRE(r.size() == 2);
    CHECK(r[0].image_id == "scene_0000");
    CHECK(r[0].det.class_name == "danger");
    CHECK(r[0].det.subcategory == 1);
    CHECK(r[0].det.box.left == 12.5);
    CHECK(r[0].det.box.top == 20.25);
    CHECK(r[0].det.box.right == 44.75);
    CHECK(r[0].det.box.bottom == 52.0);
    CHECK(r[0].det.raw_score == 3.5);
    CHECK(r[0].det.calibrated_score == 0.8125);
    CHECK(r[1].det.raw_score == -2.25);
    CHECK(r[1].det.calibrated_score == 0.015625);

    const std::string head = slurp(path).substr(0, slurp(path).find('\n'));
    CHECK(head == "image_id class subcat left top right bottom raw_score calibrated_score");
}

TEST_CASE("detection values beyond six digits are rounded not mangled") {
    TempDir tmp;
    DetectionRecord rec;
    rec.image_id = "x";
    rec.det.class_name = "c";
    rec.det.subcategory = 0;
    rec.det.box = {1.0 / 3.0, 0, 10, 10};
    rec.det.raw_score = 0.10986122886681098;
    rec.det.calibrated_score = 0.5;
    const std::string path = tmp.file("round.txt");
    write_detections(path, {rec});
    const std::vector<DetectionRecord> r = read_detections(path);
    REQUIRE(r.size() == 1);
    CHECK(std::abs(r[0].det.box.left - 1.0 / 3.0) < 1e-6);
    CHECK(r[0].det.raw_score == 0.109861);
}

TEST_CASE("empty detection list leaves just the header") {
    TempDir tmp;
    const std::string path = tmp.file("none.txt");
    write_detections(path, {});
    CHECK(read_detections(path).empty());
}

TEST_CASE("malformed detection line names the offender") {
    TempDir tmp;
    const std::string path = tmp.file("bad.txt");
    dump(path,
         "image_id class subcat left top right bottom raw_score calibrated_score\n"
         "scene_0000 danger 1 12.5 20.25 44.75\n");
    try {
        read_detections(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}
