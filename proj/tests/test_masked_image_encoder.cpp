#include <doctest.h>

#include "fixtures.hpp"
#include "sketchinpaint/datagen.hpp"
#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/masked_image_encoder.hpp"
#include "sketchinpaint/vae.hpp"

using namespace sketchinpaint;
using namespace fixtures;

namespace {

std::vector<Grid> synth_images(int n, int canvas, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Grid> out;
    for (const SynthSample& s : synth_corpus(n, canvas, rng)) out.push_back(s.sample.image);
    return out;
}

// Block-wise minimum computed pixel by pixel.
Grid brute_min_pool(const Grid& m, int f) {
    Grid out(1, 1, m.h() / f, m.w() / f, 1.0);
    for (int y = 0; y < m.h(); ++y) {
        for (int x = 0; x < m.w(); ++x) {
            if (m.at(0, 0, y, x) == 0.0) out.at(0, 0, y / f, x / f) = 0.0;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("patch VAE maps 512 x 512 x 3 to 64 x 64 x 4 and back") {
    ParameterSet params;
    Vae vae(VaeConfig{}, params);
    CHECK_FALSE(vae.fitted());
    const auto images = synth_images(3, 512, 5);
    vae.fit(images);
    CHECK(vae.fitted());
    const Grid z = vae.encode(images[0]);
    CHECK(z.shape() == Grid::Shape{1, 4, 64, 64});
    CHECK(vae.decode(z).shape() == images[0].shape());
    CHECK_THROWS_AS(vae.encode(Grid(1, 3, 100, 100)), ShapeError);
    CHECK_THROWS_AS(vae.decode(Grid(1, 3, 8, 8)), ShapeError);
    for (const Parameter& p : params.all()) {
        CHECK(p.group == ParamGroup::frozen);
        CHECK(p.name.rfind("vae.", 0) == 0);
    }
}

TEST_CASE("identity VAE returns its input") {
    ParameterSet params;
    const Vae vae(VaeConfig{VaeMode::identity, 1, 4, 4}, params);
    Rng rng(1);
    const Grid x = test_util::random_grid({2, 4, 8, 8}, rng);
    CHECK(vae.encode(x) == x);
    CHECK(vae.decode(x) == x);
    CHECK(parse_vae_mode(vae_mode_name(VaeMode::patch_linear)) == VaeMode::patch_linear);
}

TEST_CASE("held-out reconstruction error stays within 10% of the recorded validation error") {
    ParameterSet params;
    Vae vae(VaeConfig{}, params);
    const VaeFitReport report = vae.fit(synth_images(40, 128, 21));
    CHECK(report.validation_images == 8);
    CHECK(vae.validation_error() == report.validation_error);
    const auto held_out = synth_images(12, 128, 22);
    CHECK(reconstruction_error(vae, held_out) <= 1.1 * vae.validation_error());
}

TEST_CASE("downsample_mask examples") {
    const Grid ones(1, 1, 512, 512, 1.0), zeros(1, 1, 512, 512, 0.0);
    const auto full = downsample_mask(ones), empty = downsample_mask(zeros);
    const int sides[] = {64, 32, 16, 8};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(full.levels[i].shape() == Grid::Shape{1, 1, sides[i], sides[i]});
        for (double v : full.levels[i].values()) CHECK(v == 1.0);
        for (double v : empty.levels[i].values()) CHECK(v == 0.0);
    }
    Grid square(1, 1, 512, 512);
    for (int y = 128; y < 384; ++y) {
        for (int x = 128; x < 384; ++x) square.at(0, 0, y, x) = 1.0;
    }
    const Grid level = downsample_mask(square).levels[0];
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const bool inside = y >= 16 && y < 48 && x >= 16 && x < 48;
            CHECK(level.at(0, 0, y, x) == (inside ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("downsample_mask equals a brute-force block minimum on random masks") {
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        Grid m(1, 1, 128, 128, 1.0);
        for (double& v : m.values()) v = uniform01(rng) < 0.002 * (trial + 1) ? 0.0 : 1.0;
        const auto pyramid = downsample_mask(m);
        const int factors[] = {8, 16, 32, 64};
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(pyramid.levels[i] == brute_min_pool(m, factors[i]));
        }
    }
    Grid bad(1, 1, 64, 64, 1.0);
    bad[5] = 0.5;
    CHECK_THROWS_AS(downsample_mask(bad), ValueError);
    CHECK_THROWS_AS(downsample_mask(Grid(1, 1, 96, 96, 1.0)), ShapeError);
}

TEST_CASE("MIE outputs are zero at init and align with the base features") {
    SketchInpaintModel model(small_config());
    Rng rng(2);
    const Conditioning cond = random_conditioning(model, 2, rng);
    const std::vector<int> ts{10, 900};
    const ag::Var temb = model.base().time_embedding(ts);
    const MultiScaleFeatures m =
        model.masked_image_encoder().forward(ag::constant(cond.masked_latent), cond.mask_pyramid, temb);
    EncoderTap tap;
    model.base().forward(ag::constant(test_util::random_grid({2, 4, 8, 8}, rng)), ts,
                         ag::constant(model.resolve_text(cond)), &tap);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(m[i].shape() == tap.features[i].shape());
        for (double v : m[i].value().values()) CHECK(v == 0.0);
    }
}

TEST_CASE("MIE is sensitive to visible pixels and blind to corrupted ones") {
    SketchInpaintModel model(small_config());
    Rng rng(3);
    randomize_trainable(model, rng);
    InpaintInput in = random_input(model.config(), rng);
    int visible = -1, hidden = -1;
    for (int k = 0; k < 64 && (visible < 0 || hidden < 0); ++k) {
        (in.partial_mask[static_cast<std::size_t>(k)] != 0.0 ? visible : hidden) = k;
    }
    REQUIRE(visible >= 0);
    REQUIRE(hidden >= 0);
    const std::vector<int> ts{300};
    auto features = [&](const InpaintInput& x) {
        const Conditioning c = model.make_conditioning(std::span<const InpaintInput>(&x, 1));
        return model.masked_image_encoder().forward(ag::constant(c.masked_latent), c.mask_pyramid,
                                                    model.base().time_embedding(ts));
    };
    const MultiScaleFeatures ref = features(in);
    InpaintInput changed_hidden = in;
    for (int c = 0; c < in.image.c(); ++c) changed_hidden.image.plane(0, c)[hidden] += 0.5;
    const MultiScaleFeatures same = features(changed_hidden);
    for (std::size_t i = 0; i < 4; ++i) CHECK(same[i].value() == ref[i].value());
    InpaintInput changed_visible = in;
    changed_visible.image.plane(0, 0)[visible] += 0.5;
    CHECK_FALSE(features(changed_visible)[0].value() == ref[0].value());
}

TEST_CASE("inject adds per scale and rejects misaligned shapes") {
    Rng rng(4);
    MultiScaleFeatures n, m, zero;
    for (std::size_t i = 0; i < 4; ++i) {
        const int side = 8 >> i;
        n[i] = ag::constant(test_util::random_grid({1, 3, side, side}, rng));
        m[i] = ag::constant(test_util::random_grid({1, 3, side, side}, rng));
        zero[i] = ag::constant(Grid(1, 3, side, side));
    }
    const MultiScaleFeatures sum = inject(n, m), keep = inject(n, zero), only_m = inject(zero, m);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(keep[i].value() == n[i].value());
        CHECK(only_m[i].value() == m[i].value());
        for (std::size_t k = 0; k < sum[i].value().size(); ++k) {
            CHECK(sum[i].value()[k] - n[i].value()[k] == doctest::Approx(m[i].value()[k]).epsilon(1e-15));
        }
    }
    MultiScaleFeatures bad = m;
    bad[2] = ag::constant(Grid(1, 3, 3, 3));
    CHECK_THROWS_AS(inject(n, bad), ShapeError);
}
