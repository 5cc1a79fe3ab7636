#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/optimizer.hpp"

using namespace sketchinpaint;
using namespace fixtures;

TEST_CASE("text embedder: null, determinism and token sensitivity") {
    ParameterSet params;
    Rng rng(3);
    const TextEmbedder te(TextEmbedderConfig{}, params, rng);
    CHECK(te.encode("") == te.null_embedding());
    CHECK(te.encode("a red bird") == te.encode("a red bird"));
    CHECK(te.encode("A  Red bird") == te.encode("a red bird"));
    const std::vector<std::string> vocab{"red", "blue", "green", "bird", "square", "circle", "tree", "cat", "dog"};
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        for (std::size_t j = i + 1; j < vocab.size(); ++j) {
            const Grid a = te.encode("a " + vocab[i] + " thing"), b = te.encode("a " + vocab[j] + " thing");
            REQUIRE(a.shape() == Grid::Shape{1, 1, 8, 32});
            int differing_rows = 0;
            for (int r = 0; r < 8; ++r) {
                bool differs = false;
                for (int k = 0; k < 32; ++k) differs |= a.at(0, 0, r, k) != b.at(0, 0, r, k);
                differing_rows += differs;
            }
            CHECK(differing_rows == 1);
        }
    }
    CHECK(te.tokenize("one two three four five six seven eight nine ten").size() == 8);
    const Parameter* null = params.find("text.null_embedding");
    REQUIRE(null);
    CHECK(null->group == ParamGroup::frozen);
}

TEST_CASE("unet config validation names the field") {
    UNetConfig c;
    c.groupnorm_groups = 5;
    try {
        c.validate();
        FAIL("expected ParameterError");
    } catch (const ParameterError& e) {
        CHECK(e.field() == "groupnorm_groups");
    }
}

TEST_CASE("hook-free, identity-hook and tap shapes of the base denoiser") {
    const ModelConfig cfg = small_config();
    SketchInpaintModel model(cfg);
    Rng rng(5);
    const Grid z = test_util::random_grid({2, 4, 8, 8}, rng);
    const auto ts = random_timesteps(2, rng);
    const ag::Var text = ag::constant(Grid::stack_batch(std::vector<Grid>{model.text_embedder().encode("a"), model.text_embedder().encode("b")}));
    const BaseDenoiser& base = model.base();
    const Grid plain = base.forward(ag::constant(z), ts, text).value();
    CHECK(plain.shape() == z.shape());

    EncoderTap tap;
    const Grid no_hooks = base.forward(ag::constant(z), ts, text, &tap).value();
    CHECK(no_hooks == plain);
    for (int i = 1; i <= kNumScales; ++i) {
        const Grid& f = tap.features[static_cast<std::size_t>(i - 1)].value();
        CHECK(f.c() == cfg.unet.channels(i));
        CHECK(f.h() == cfg.unet.side(i));
        if (i > 1) {
            CHECK(f.h() * 2 == tap.features[static_cast<std::size_t>(i - 2)].value().h());
            CHECK(f.w() * 2 == tap.features[static_cast<std::size_t>(i - 2)].value().w());
        }
    }

    EncoderTap identity;
    for (auto& h : identity.hooks) h = [](const ag::Var& n) { return n; };
    CHECK(base.forward(ag::constant(z), ts, text, &identity).value() == plain);
    CHECK_THROWS_AS(base.forward(ag::constant(Grid(2, 3, 8, 8)), ts, text), ShapeError);
}

TEST_CASE("decoder skips consume exactly the hook output, and each hook matters") {
    SketchInpaintModel model(small_config());
    Rng rng(6);
    const Grid z = test_util::random_grid({1, 4, 8, 8}, rng);
    const std::vector<int> ts{400};
    const ag::Var text = ag::constant(model.text_embedder().encode("a cat"));
    const Grid plain = model.base().forward(ag::constant(z), ts, text).value();
    for (std::size_t i = 0; i < kNumScales; ++i) {
        EncoderTap tap;
        std::vector<Grid> produced;
        tap.hooks[i] = [&](const ag::Var& n) {
            const ag::Var out = ag::scale(n, 1.5);
            produced.push_back(out.value());
            return out;
        };
        const Grid out = model.base().forward(ag::constant(z), ts, text, &tap).value();
        REQUIRE(produced.size() == 1);
        CHECK(tap.skips[i].value() == produced[0]);
        for (std::size_t j = 0; j < kNumScales; ++j) {
            if (j != i) CHECK(tap.skips[j].value() == tap.features[j].value());
        }
        CHECK_FALSE(out == plain);
    }
}

TEST_CASE("partition covers every parameter exactly once with the right groups") {
    SketchInpaintModel model(small_config());
    const ParameterPartition part = partition_parameters(model.parameters());
    std::set<std::string> seen;
    for (const Parameter* p : part.frozen) {
        CHECK(p->group == ParamGroup::frozen);
        CHECK_FALSE(p->var.requires_grad());
        CHECK(seen.insert(p->name).second);
        const bool ok = p->name.rfind("base.", 0) == 0 || p->name.rfind("text.", 0) == 0 || p->name.rfind("vae.", 0) == 0;
        CHECK(ok);
    }
    for (const Parameter* p : part.trainable) {
        CHECK(p->group == ParamGroup::trainable);
        CHECK(p->var.requires_grad());
        CHECK(seen.insert(p->name).second);
    }
    CHECK(seen.size() == model.parameters().all().size());

    ParameterSet bad;
    bad.add("base.rogue", Grid(1, 1, 1, 1), ParamGroup::trainable);
    CHECK_THROWS_AS(partition_parameters(bad), IntegrityError);
    ParameterSet unknown;
    unknown.add("extra.w", Grid(1, 1, 1, 1), ParamGroup::frozen);
    CHECK_THROWS_AS(partition_parameters(unknown), IntegrityError);
}

namespace {

// Hand count of the adapter parameters from layer shapes.
long long conv_count(long long in, long long out, long long k) { return out * in * k * k + out; }
long long gn_count(long long c) { return 2 * c; }
long long res_count(long long in, long long out, long long temb) {
    return gn_count(in) + conv_count(in, out, 3) + conv_count(temb, out, 1) + gn_count(out) + conv_count(out, out, 3) +
           (in != out ? conv_count(in, out, 1) : 0);
}

long long adapter_count(const UNetConfig& u, int factor) {
    const long long temb = 4LL * u.base_width;
    long long total = 0;
    // masked image encoder
    total += conv_count(u.latent_channels, u.channels(1), 3);
    long long width = u.channels(1);
    for (int i = 1; i <= 4; ++i) {
        if (i > 1) total += conv_count(width, width, 3);
        total += conv_count(width + 1, width, 3);
        total += res_count(width, u.channels(i), temb);
        width = u.channels(i);
        total += conv_count(width, width, 1);
    }
    // sketch encoder
    total += conv_count(static_cast<long long>(factor) * factor, u.channels(1), 1);
    width = u.channels(1);
    for (int i = 1; i <= 4; ++i) {
        if (i > 1) total += conv_count(width, width, 3);
        total += res_count(width, u.channels(i), temb);
        width = u.channels(i);
    }
    // SBFI blocks
    for (int i = 1; i <= 4; ++i) {
        const long long c = u.channels(i);
        total += 3 * conv_count(c, c, 1) + conv_count(c, 1, 1) + gn_count(1);
    }
    return total;
}

}  // namespace

TEST_CASE("trainable parameter count matches a shape-arithmetic oracle") {
    SketchInpaintModel small(small_config());
    CHECK(static_cast<long long>(small.parameters().element_count(ParamGroup::trainable)) ==
          adapter_count(small.config().unet, 1));
    ModelConfig toy;
    toy.unet.latent_size = 16;
    SketchInpaintModel full(toy);
    CHECK(static_cast<long long>(full.parameters().element_count(ParamGroup::trainable)) == adapter_count(toy.unet, 8));
}

TEST_CASE("frozen parameters stay bitwise unchanged over 10 optimizer steps") {
    SketchInpaintModel model(small_config());
    std::vector<Grid> frozen_before, trainable_before;
    for (const Parameter& p : model.parameters().all()) {
        (p.group == ParamGroup::frozen ? frozen_before : trainable_before).push_back(p.var.value());
    }
    Adam adam(model.parameters(), AdamOptions{1e-3});
    Rng rng(8);
    const NoiseSchedule s = build_schedule(1000, 1e-4, 2e-2, ScheduleKind::linear);
    TrainingBatch batch;
    batch.cond = random_conditioning(model, 2, rng);
    batch.z0 = batch.cond.masked_latent;
    for (int step = 0; step < 10; ++step) {
        model.parameters().zero_grad();
        const LossEvaluation ev = training_loss(model, batch, s, rng);
        ag::backward(ev.loss);
        adam.step();
    }
    std::size_t fi = 0, ti = 0, changed = 0;
    for (const Parameter& p : model.parameters().all()) {
        if (p.group == ParamGroup::frozen) {
            CHECK(p.var.value() == frozen_before[fi++]);
        } else {
            changed += !(p.var.value() == trainable_before[ti++]);
        }
    }
    CHECK(changed > 0);
}
