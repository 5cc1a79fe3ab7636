#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>

#include "sketchinpaint/bezier.hpp"
#include "sketchinpaint/datagen.hpp"
#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/image_io.hpp"
#include "sketchinpaint/masks.hpp"
#include "sketchinpaint/sketch.hpp"
#include "test_util.hpp"

using namespace sketchinpaint;
namespace fs = std::filesystem;

namespace {

Grid rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
    Grid m(1, 1, h, w);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.at(0, 0, y, x) = 1.0;
    }
    return m;
}

Grid plus_mask(int n, int arm) {
    Grid m(1, 1, n, n);
    const int c = n / 2;
    for (int i = 0; i < n; ++i) {
        for (int t = -arm; t <= arm; ++t) {
            m.at(0, 0, c + t, i) = 1.0;
            m.at(0, 0, i, c + t) = 1.0;
        }
    }
    return m;
}

// Output pixel is 1 when any input pixel within the k x k window is 1.
Grid brute_dilate(const Grid& m, int k) {
    const int r = k / 2;
    Grid out(m.shape());
    for (int y = 0; y < m.h(); ++y) {
        for (int x = 0; x < m.w(); ++x) {
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int sy = y + dy, sx = x + dx;
                    if (sy >= 0 && sy < m.h() && sx >= 0 && sx < m.w() && m.at(0, 0, sy, sx) != 0.0) {
                        out.at(0, 0, y, x) = 1.0;
                    }
                }
            }
        }
    }
    return out;
}

Grid random_blob(Rng& rng, int n) {
    Grid m(1, 1, n, n);
    const double cy = n / 2.0 + 6 * (uniform01(rng) - 0.5), cx = n / 2.0 + 6 * (uniform01(rng) - 0.5);
    const double ry = 3 + uniform01(rng) * n / 4.0, rx = 3 + uniform01(rng) * n / 4.0;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double u = (y - cy) / ry, v = (x - cx) / rx;
            if (u * u + v * v <= 1.0 + 0.3 * std::sin(5 * std::atan2(u, v))) m.at(0, 0, y, x) = 1.0;
        }
    }
    return m;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("sketchinpaint_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("single pixel dilated with k = 3 is a 3 x 3 square") {
    Grid m(1, 1, 7, 7);
    m.at(0, 0, 3, 3) = 1.0;
    const Grid out = dilate_square(m, 3);
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 7; ++x) {
            CHECK(out.at(0, 0, y, x) == ((std::abs(y - 3) <= 1 && std::abs(x - 3) <= 1) ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("dilate_square matches brute force on random masks") {
    Rng rng(1);
    for (int trial = 0; trial < 6; ++trial) {
        Grid m(1, 1, 24, 20);
        for (double& v : m.values()) v = uniform01(rng) < 0.05 ? 1.0 : 0.0;
        for (int k : {1, 3, 5, 9}) CHECK(dilate_square(m, k) == brute_dilate(m, k));
    }
}

TEST_CASE("dilation ladder: d = 0 identity, monotone, d = D approximates the bbox") {
    const Grid plus = plus_mask(41, 3);
    CHECK(dilate_mask(plus, 0, 5) == plus);
    CHECK(mask_iou(dilate_mask(plus, 5, 5), bbox_mask(plus)) >= 0.95);
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Grid m0 = random_blob(rng, 48);
        const int r = bbox_radius(m0);
        Grid prev = m0;
        for (int d = 1; d <= 5; ++d) {
            const Grid md = dilate_mask(m0, d, 5);
            CHECK(support_subset(prev, md));
            CHECK(support_subset(md, bbox_mask(m0)));
            CHECK(dilation_kernel(d, 5, r) == 1 + 2 * d * ((r + 4) / 5));
            prev = md;
        }
        CHECK(mask_iou(prev, bbox_mask(m0)) >= 0.95);
    }
    CHECK_THROWS_AS(dilate_mask(Grid(1, 1, 8, 8), 1, 5), ValueError);
}

TEST_CASE("bbox radius is the largest chessboard gap inside the box") {
    // An L shape: the far corner of its box is 4 steps from the nearest mask pixel.
    Grid m(1, 1, 10, 10);
    for (int i = 0; i < 5; ++i) {
        m.at(0, 0, 0, i) = 1.0;
        m.at(0, 0, i, 0) = 1.0;
    }
    CHECK(bbox_radius(m) == 4);
    CHECK(bbox_radius(rect_mask(10, 10, 2, 2, 6, 6)) == 0);
}

TEST_CASE("blend endpoints are exact and the midpoint lies strictly between") {
    const Grid small = rect_mask(40, 40, 15, 15, 25, 25), big = rect_mask(40, 40, 10, 10, 30, 30);
    CHECK(blend_masks(small, big, 0, 4, blur_kernel(0)) == small);
    CHECK(blend_masks(small, big, 4, 4, blur_kernel(4)) == big);
    const Grid mid = blend_masks(small, big, 2, 4, blur_kernel(2));
    CHECK(mask_area(mid) > mask_area(small));
    CHECK(mask_area(mid) < mask_area(big));
    CHECK(support_subset(small, mid));
    CHECK(support_subset(mid, big));
    CHECK_THROWS_AS(blend_masks(small, big, 5, 4, 3), ParameterError);
}

TEST_CASE("straight sweep over a full canvas zeroes exactly the leading half") {
    const Grid full(1, 1, 8, 8, 1.0);
    CubicBezier line;
    for (int i = 0; i < 4; ++i) line.p[static_cast<std::size_t>(i)] = {3.0, 7.0 * i / 3.0};
    const PartialMaskResult l2r = bezier_partial_mask(full, ScanDirection::left_to_right, 0.5, line);
    CHECK(l2r.coverage == 0.5);
    CHECK_FALSE(l2r.fallback);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) CHECK(l2r.pm.at(0, 0, y, x) == (x < 4 ? 0.0 : 1.0));
    }
    const PartialMaskResult d2u = bezier_partial_mask(full, ScanDirection::down_to_up, 0.5, line);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) CHECK(d2u.pm.at(0, 0, y, x) == (y >= 4 ? 0.0 : 1.0));
    }
}

TEST_CASE("partial masks: coverage bounds, scan containment, direction frequencies") {
    Rng rng(3);
    const Grid square = rect_mask(10, 10, 0, 0, 10, 10);
    std::array<int, 4> counts{};
    for (int seed = 0; seed < 1000; ++seed) {
        const ScanDirection dir = draw_direction(rng);
        ++counts[static_cast<std::size_t>(dir)];
        const double target = 0.5 + 0.1 * uniform01(rng);
        const PartialMaskResult r = bezier_partial_mask(square, dir, target, rng);
        CHECK(r.coverage >= target);
        CHECK(r.coverage <= 0.61);
        if (!r.fallback) CHECK(r.coverage <= target + r.step_increment);
        // Corrupted pixels lie inside the mask.
        for (std::size_t i = 0; i < r.pm.size(); ++i) {
            if (r.pm[i] == 0.0) CHECK(square[i] == 1.0);
        }
    }
    for (int c : counts) CHECK(c >= 150);
    for (ScanDirection d : {ScanDirection::right_to_left, ScanDirection::left_to_right, ScanDirection::down_to_up,
                            ScanDirection::up_to_down}) {
        CHECK(parse_direction(direction_name(d)) == d);
    }
    CHECK_THROWS_AS(parse_direction("diagonal"), ParameterError);
}

TEST_CASE("canny: constant image, vertical step and magnitude subset") {
    const Grid flat(1, 3, 32, 32, 0.4);
    const Grid no_edges = canny_sketch(flat, 0.1, 0.3);
    for (double v : no_edges.values()) CHECK(v == 0.0);

    Grid step(1, 1, 32, 32);
    for (int y = 0; y < 32; ++y) {
        for (int x = 16; x < 32; ++x) step.at(0, 0, y, x) = 1.0;
    }
    // Sobel on a unit step: gx = 4 on the two columns adjacent to the jump.
    const SobelResponse raw = sobel(step);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            CHECK(raw.gx.at(0, 0, y, x) == ((x == 15 || x == 16) ? 4.0 : 0.0));
            CHECK(raw.gy.at(0, 0, y, x) == 0.0);
        }
    }
    const Grid edges = canny_sketch(step, 0.1, 0.3);
    int column = -1;
    for (int y = 0; y < 32; ++y) {
        int count = 0;
        for (int x = 0; x < 32; ++x) {
            if (edges.at(0, 0, y, x) != 0.0) {
                ++count;
                if (column < 0) column = x;
                CHECK(x == column);
            }
        }
        CHECK(count == 1);
    }
    CHECK((column == 15 || column == 16));

    Rng rng(4);
    Grid img(1, 3, 48, 48);
    for (double& v : img.values()) v = uniform01(rng);
    const CannyOptions opt;
    const Grid e = canny_sketch(img, opt);
    const SobelResponse s = sobel(gaussian_blur(to_grayscale(img), opt.blur_kernel, opt.blur_sigma));
    double peak = 0.0;
    for (double v : s.magnitude.values()) peak = std::max(peak, v);
    for (std::size_t i = 0; i < e.size(); ++i) {
        CHECK((e[i] == 0.0 || e[i] == 1.0));
        if (e[i] != 0.0) CHECK(s.magnitude[i] >= opt.low * peak);
    }
}

TEST_CASE("partial_sketch examples and loop oracle") {
    Rng rng(5);
    Grid pm(1, 1, 6, 6), m0(1, 1, 6, 6), sk(1, 1, 6, 6);
    for (std::size_t i = 0; i < 36; ++i) {
        pm[i] = uniform01(rng) < 0.5;
        m0[i] = uniform01(rng) < 0.5;
        sk[i] = uniform01(rng) < 0.5;
    }
    const Grid ps = partial_sketch(pm, m0, sk);
    for (std::size_t i = 0; i < 36; ++i) CHECK(ps[i] == (1.0 - pm[i]) * m0[i] * sk[i]);
    const Grid untouched = partial_sketch(Grid(1, 1, 6, 6, 1.0), m0, sk);
    for (double v : untouched.values()) CHECK(v == 0.0);
    const Grid collapsed = partial_sketch(Grid(1, 1, 6, 6), m0, sk);
    for (std::size_t i = 0; i < 36; ++i) CHECK(collapsed[i] == m0[i] * sk[i]);
    CHECK_THROWS_AS(partial_sketch(pm, Grid(1, 1, 5, 6), sk), ShapeError);
}

TEST_CASE("sketch registry knows canny and rejects unknown generators") {
    auto& reg = SketchRegistry::instance();
    CHECK(reg.contains("canny"));
    try {
        reg.generate("pidinet", Grid(1, 3, 8, 8));
        FAIL("expected ParameterError");
    } catch (const ParameterError& e) {
        CHECK(e.field() == "sketch_type");
    }
}

TEST_CASE("synthetic corpus: nonempty masks and captions naming the colour") {
    Rng rng(6);
    const auto corpus = synth_corpus(16, 64, rng);
    REQUIRE(corpus.size() == 16);
    for (const SynthSample& s : corpus) {
        CHECK(mask_area(s.sample.instance_mask) > 0);
        CHECK(s.sample.caption.find(s.color) != std::string::npos);
        CHECK(s.sample.image.shape() == Grid::Shape{1, 3, 64, 64});
        validate_instance(s.sample);
    }
    Rng again(6);
    CHECK(synth_corpus(16, 64, again)[5].sample.image == corpus[5].sample.image);
}

TEST_CASE("four-tuples are deterministic and satisfy the pipeline invariants") {
    Rng rng(7);
    const auto corpus = synth_corpus(20, 64, rng);
    const DatagenConfig cfg;
    for (const SynthSample& s : corpus) {
        const FourTuple a = build_four_tuple(s.sample, cfg, 99);
        const FourTuple b = build_four_tuple(s.sample, cfg, 99);
        CHECK(a.partial_mask == b.partial_mask);
        CHECK(a.partial_sketch == b.partial_sketch);
        CHECK(a.masked_image == b.masked_image);
        CHECK(a.provenance.coverage == b.provenance.coverage);
        CHECK(a.provenance.coverage >= 0.5);
        CHECK(a.provenance.coverage <= 0.61);
        CHECK(a.provenance.d >= 0);
        CHECK(a.provenance.d < cfg.dilation_levels);
        CHECK(a.provenance.s <= cfg.blur_levels);
        for (std::size_t i = 0; i < a.partial_sketch.size(); ++i) {
            if (a.partial_sketch[i] != 0.0) {
                CHECK(a.partial_mask[i] == 0.0);
                CHECK(a.instance_mask[i] == 1.0);
            }
        }
        for (int c = 0; c < 3; ++c) {
            for (int k = 0; k < 64 * 64; ++k) {
                CHECK(a.masked_image.plane(0, c)[k] == a.image.plane(0, c)[k] * a.partial_mask[static_cast<std::size_t>(k)]);
            }
        }
    }
    InstanceSample empty = corpus[0].sample;
    empty.instance_mask.fill(0.0);
    CHECK_THROWS_AS(build_four_tuple(empty, cfg, 1), ValueError);
}

TEST_CASE("manifest and corpus round trips") {
    TempDir dir("manifest");
    Rng rng(8);
    const auto corpus = synth_corpus(3, 64, rng);
    std::vector<InstanceSample> samples;
    for (const auto& s : corpus) samples.push_back(s.sample);
    write_corpus((dir.path / "corpus").string(), samples);
    const auto back = read_corpus((dir.path / "corpus").string());
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].id == samples[i].id);
        CHECK(back[i].caption == samples[i].caption);
        CHECK(back[i].instance_mask == samples[i].instance_mask);
        for (std::size_t k = 0; k < samples[i].image.size(); ++k) {
            CHECK(std::abs(back[i].image[k] - samples[i].image[k]) <= 0.5 / 255 + 1e-12);
        }
    }

    const FourTuple t = build_four_tuple(samples[0], DatagenConfig{}, 5);
    const ManifestRecord rec = write_four_tuple(t, dir.path.string());
    const std::string line = manifest_line(rec);
    const std::array<const char*, 15> order{"\"id\"", "\"image\"", "\"instance_mask\"", "\"sketch\"", "\"masked_image\"",
                                            "\"partial_mask\"", "\"partial_sketch\"", "\"caption\"", "\"d\"", "\"s\"",
                                            "\"direction\"", "\"sketch_type\"", "\"coverage\"", "\"seed\"", "\"fallback\""};
    std::size_t pos = 0;
    for (const char* key : order) {
        const std::size_t at = line.find(key, pos);
        CHECK(at != std::string::npos);
        pos = at;
    }
    {
        std::ofstream out(dir.path / "manifest.jsonl");
        out << line << "\n";
    }
    const auto records = read_manifest((dir.path / "manifest.jsonl").string());
    REQUIRE(records.size() == 1);
    CHECK(records[0].provenance.coverage == t.provenance.coverage);
    CHECK(records[0].provenance.direction == t.provenance.direction);
    const FourTuple loaded = load_four_tuple(records[0], dir.path.string());
    CHECK(loaded.partial_mask == t.partial_mask);
    CHECK(loaded.partial_sketch == t.partial_sketch);
    CHECK(loaded.caption == t.caption);
}

TEST_CASE("malformed manifests and corpora raise ingestion errors with the line") {
    TempDir dir("bad");
    {
        std::ofstream out(dir.path / "m.jsonl");
        out << "\n{\"id\": \"x\"\n";
    }
    try {
        read_manifest((dir.path / "m.jsonl").string());
        FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(read_manifest((dir.path / "missing.jsonl").string()), IngestionError);
    fs::create_directories(dir.path / "corpus");
    {
        std::ofstream out(dir.path / "corpus" / "captions.txt");
        out << "no_tab_here\n";
    }
    CHECK_THROWS_AS(read_corpus((dir.path / "corpus").string()), IngestionError);
}
