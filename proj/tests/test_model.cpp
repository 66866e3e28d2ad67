#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "radscan/checkpoint.hpp"
#include "radscan/config.hpp"
#include "radscan/evaluation.hpp"
#include "radscan/fpn.hpp"
#include "radscan/gradient_suite.hpp"
#include "radscan/main_net.hpp"
#include "radscan/metrics.hpp"
#include "radscan/training.hpp"
#include "test_util.hpp"

using namespace radscan;
using namespace radscan::testing;
namespace fs = std::filesystem;

namespace {

FpnModel small_fpn(Rng& rng, bool zero_heads = false) {
    FpnConfig c;
    c.channels = 4;
    c.zero_heads = zero_heads;
    return FpnModel::init(c, rng);
}

MainModel small_main(Rng& rng, std::size_t groups = 3, bool zero_head = false) {
    MainConfig c;
    c.channels = 4;
    c.d_state = 2;
    c.groups = groups;
    c.zero_head = zero_head;
    return MainModel::init(c, rng);
}

PriorBundle some_priors(Rng& rng, std::size_t h, std::size_t w, std::size_t levels) {
    PriorBundle b;
    b.full.p_flare = random_tensor({1, h, w}, rng, 0.0, 1.0);
    b.full.p_mask = Tensor({1, h, w});
    const std::size_t r = 1 + rng.below(h - 2), c = 1 + rng.below(w - 2);
    b.full.p_mask.at(0, r, c) = 1.0;
    b.full.p_mask.at(0, r, c + 1) = 1.0;
    b.full.p_position.add({double(c), double(r)});
    return downsample_priors(b, levels);
}

std::vector<SceneSample> tiny_dataset(std::size_t n, std::uint64_t seed) {
    std::vector<SceneSample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_sample(derive_seed(seed, i), SynthConfig{}));
    return out;
}

TrainConfig tiny_config(std::size_t iterations) {
    TrainConfig c;
    c.channels = 4;
    c.d_state = 2;
    c.fpn_channels = 4;
    c.iterations = iterations;
    c.seed = 5;
    return c;
}

std::string bytes_of(const Checkpoint& ck) {
    std::ostringstream s;
    ck.write(s);
    return s.str();
}

}  // namespace

TEST_SUITE("fpn") {

TEST_CASE("shape contract and divisibility") {
    Rng rng(501);
    const FpnModel m = small_fpn(rng);
    for (std::size_t e : {8u, 16u, 32u}) {
        const FpnOutput o = fpn_forward(m, random_tensor({3, e, e}, rng, 0.0, 1.0));
        CHECK(o.flare.shape() == Shape{1, e, e});
        CHECK(o.heat.shape() == Shape{1, e, e});
        for (double v : o.flare.data()) CHECK((v > 0.0 && v < 1.0));
    }
    CHECK_THROWS(fpn_forward(m, Tensor({3, 12, 12})));
    CHECK_THROWS(fpn_forward(m, Tensor({1, 16, 16})));
}

TEST_CASE("zero heads give one half everywhere") {
    Rng rng(502);
    const FpnModel m = small_fpn(rng, true);
    const FpnOutput o = fpn_forward(m, Tensor({3, 16, 16}));
    for (double v : o.flare.data()) CHECK(v == 0.5);
    for (double v : o.heat.data()) CHECK(v == 0.5);
}

TEST_CASE("toy parameter budget") {
    Rng rng(503);
    FpnModel m = FpnModel::init(FpnConfig{}, rng);
    const std::size_t n = parameter_count(m);
    MESSAGE("FPN parameters: " << n);
    CHECK(n > 0);
    CHECK(n <= 100000);
    std::vector<std::string> names;
    m.visit([&](const std::string& name, Tensor&) { names.push_back(name); });
    CHECK(names.front() == "stem.kernel");
    CHECK(names.back() == "heat_head.bias");
}

TEST_CASE("fpn backward matches finite differences") {
    Rng rng(504);
    FpnConfig c;
    c.channels = 2;
    c.levels = 2;
    FpnModel m = FpnModel::init(c, rng);
    Tensor input = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
    const Tensor uf = random_tensor({1, 8, 8}, rng), uh = random_tensor({1, 8, 8}, rng);
    FpnTape tape;
    fpn_forward(m, input, &tape);
    FpnModel g = fpn_backward(m, tape, uf, uh);
    std::vector<Tensor*> grads;
    g.visit([&](const std::string&, Tensor& t) { grads.push_back(&t); });
    std::vector<CheckedInput> inputs;
    std::size_t k = 0;
    m.visit([&](const std::string& name, Tensor& t) {
        // Every tensor of the small net, perturbed element by element.
        inputs.push_back({name, &t, *grads[k++]});
    });
    const Tensor up = [&] {
        Tensor u({2, 8, 8});
        std::copy(uf.data().begin(), uf.data().end(), u.data().begin());
        std::copy(uh.data().begin(), uh.data().end(), u.data().begin() + 64);
        return u;
    }();
    const auto r = vjp_check(
        "fpn",
        [&] {
            const FpnOutput o = fpn_forward(m, input);
            Tensor u({2, 8, 8});
            std::copy(o.flare.data().begin(), o.flare.data().end(), u.data().begin());
            std::copy(o.heat.data().begin(), o.heat.data().end(), u.data().begin() + 64);
            return u;
        },
        up, inputs, 1e-5);
    for (const auto& in : r.inputs) CHECK_MESSAGE(in.max_rel_error < 1e-5, in.name << " " << in.max_rel_error);
}

TEST_CASE("priors from maps") {
    const PriorBundle none = priors_from_maps(Tensor({1, 16, 16}), Tensor({1, 16, 16}), 2);
    CHECK(none.full.p_position.empty());
    CHECK(max_abs(none.full.p_mask) == 0.0);
    CHECK(none.levels() == 2);

    SourceSet s;
    s.add({5, 9});
    const Tensor heat = gaussian_heatmap(s, 16, 16, 2.0);
    Rng rng(505);
    const Tensor flare = random_tensor({1, 16, 16}, rng, 0.0, 0.4);
    const PriorBundle b = priors_from_maps(flare, heat, 2);
    REQUIRE(b.full.p_position.size() == 1);
    CHECK(b.full.p_position.centers[0] == Point{5, 9});
    for (std::size_t i = 0; i < 256; ++i)
        if (b.full.p_mask[i] != 0.0) CHECK(b.full.p_flare[i] >= kPriorThreshold);
    CHECK(b.level(2).p_mask.shape() == Shape{1, 4, 4});
}

}

TEST_SUITE("main network") {

TEST_CASE("output shapes at several sizes and depths") {
    Rng rng(511);
    for (std::size_t groups : {3u, 7u}) {
        const MainModel m = small_main(rng, groups);
        const std::size_t levels = m.config.levels();
        for (std::size_t e : {16u, 32u, 64u}) {
            if (groups == 7 && e == 64) continue;
            const Tensor x = random_tensor({3, e, e}, rng, 0.0, 1.0);
            MainTape tape;
            const Tensor y = main_forward(m, x, some_priors(rng, e, e, levels), &tape);
            CHECK(y.shape() == Shape{6, e, e});
            // One entry per encoder level plus the bottleneck input.
            REQUIRE(tape.enc_out.size() == levels + 1);
            for (std::size_t l = 0; l < levels; ++l) {
                CHECK(tape.enc_out[l].dim(1) == e >> l);
                CHECK(tape.dec_in[l].dim(1) == e >> l);
            }
        }
    }
}

TEST_CASE("zero head and prior fallbacks") {
    Rng rng(512);
    const MainModel zero = small_main(rng, 3, true);
    const Tensor x = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    CHECK(max_abs(main_forward(zero, x, some_priors(rng, 16, 16, 1))) == 0.0);

    const MainModel m = small_main(rng);
    const Tensor a = main_forward(m, x, empty_priors(1));
    PriorBundle absent;
    absent = downsample_priors(absent, 1);
    CHECK(main_forward(m, x, absent) == a);
    for (double v : a.data()) CHECK(std::isfinite(v));
    CHECK_FALSE(main_forward(m, x, some_priors(rng, 16, 16, 1)) == a);

    CHECK_THROWS_AS(main_forward(m, x, some_priors(rng, 32, 32, 1)), ShapeError);
    CHECK_THROWS(main_forward(m, x, empty_priors(0)));
    CHECK_THROWS(main_forward(m, Tensor({3, 15, 16}), empty_priors(1)));
}

TEST_CASE("main backward: directional check and per-tensor spot checks") {
    Rng rng(513);
    MainModel m = small_main(rng);
    for (double& v : m.head.kernel.values()) v += 0.05 * (rng.uniform() - 0.5);
    const Tensor x = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    const PriorBundle b = some_priors(rng, 16, 16, 1);
    const Tensor u = random_tensor({6, 16, 16}, rng);
    MainTape tape;
    main_forward(m, x, b, &tape);
    MainModel g = main_backward(m, tape, u);

    std::vector<Tensor*> params, grads_ptr;
    std::vector<Tensor> grads;
    m.visit([&](const std::string&, Tensor& t) { params.push_back(&t); });
    g.visit([&](const std::string&, Tensor& t) { grads.push_back(t); grads_ptr.push_back(&t); });
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto r = directional_check("main", [&] { return dot(u, main_forward(m, x, b)); }, params, grads, seed, 1e-5);
        CHECK_MESSAGE(r.passed(), r.max_rel_error);
    }

    std::vector<CheckedInput> spot;
    std::size_t k = 0;
    m.visit([&](const std::string& name, Tensor& t) {
        if (name == "stem.bias" || name == "enc0.b0.rssm.a_log" || name == "mid.b1.rssm.exc_p_b" ||
            name == "dec0.fuse.bias" || name == "head.bias")
            spot.push_back({name, &t, *grads_ptr[k]});
        ++k;
    });
    REQUIRE(spot.size() == 5);
    const auto r = vjp_check("main", [&] { return main_forward(m, x, b); }, u, spot, 1e-5);
    for (const auto& in : r.inputs) CHECK_MESSAGE(in.max_rel_error < 1e-5, in.name << " " << in.max_rel_error);
}

}

TEST_SUITE("optimizer") {

TEST_CASE("adam closed forms") {
    Tensor p({3}, {1.0, -2.0, 0.5});
    const Tensor before = p;
    Tensor zero({3});
    AdamState s;
    adam_step({&p}, {&zero}, s, 0.1);
    CHECK(p == before);

    Tensor q({1}, {0.0}), g({1}, {1.0});
    AdamState t;
    adam_step({&q}, {&g}, t, 1e-3);
    CHECK(std::abs(q[0] + 1e-3 * 1.0 / (1.0 + 1e-8)) < 1e-15);
    CHECK(t.step == 1);

    // Moments decay once gradients stop.
    double last_m = std::abs(t.m[0][0]), last_v = t.v[0][0];
    for (int i = 0; i < 20; ++i) {
        Tensor z({1});
        adam_step({&q}, {&z}, t, 1e-3);
        CHECK(std::abs(t.m[0][0]) < last_m);
        CHECK(t.v[0][0] < last_v);
        last_m = std::abs(t.m[0][0]);
        last_v = t.v[0][0];
    }
    Tensor wrong({2});
    CHECK_THROWS(adam_step({&q}, {&wrong}, t, 1e-3));
    CHECK_THROWS(adam_step({&q, &p}, {&g}, t, 1e-3));
}

TEST_CASE("learning-rate halving") {
    CHECK(scheduled_lr(1e-3, 0, 100) == 1e-3);
    CHECK(scheduled_lr(1e-3, 49, 100) == 1e-3);
    CHECK(scheduled_lr(1e-3, 50, 100) == 5e-4);
    CHECK(scheduled_lr(1e-3, 99, 100) == 5e-4);
}

}

TEST_SUITE("checkpoint") {

TEST_CASE("round trip is bit-identical") {
    Rng rng(521);
    MainModel m = small_main(rng);
    Checkpoint ck;
    ck.iteration = 42;
    ck.set_meta("stage", "main");
    ck.set_meta("note", "x y");
    ck.rng_state = rng.state();
    store_params(ck, m);
    ck.add("odd", Tensor({2, 2}, {1e-300, -0.0, 1.0 / 3.0, std::nextafter(1.0, 2.0)}));

    std::stringstream ss;
    ck.write(ss);
    const Checkpoint back = Checkpoint::read(ss);
    CHECK(back == ck);
    CHECK(bytes_of(back) == bytes_of(ck));
    CHECK(back.meta_value("note") == "x y");
    CHECK_THROWS_WITH_AS(back.meta_value("missing"), doctest::Contains("missing"), std::runtime_error);

    const fs::path path = fs::temp_directory_path() / "radscan_ck_test.ckpt";
    ck.save(path.string());
    CHECK(Checkpoint::load(path.string()) == ck);
    fs::remove(path);

    MainModel other = small_main(rng);
    restore_params(back, other);
    std::vector<Tensor> a, b;
    m.visit([&](const std::string&, Tensor& t) { a.push_back(t); });
    other.visit([&](const std::string&, Tensor& t) { b.push_back(t); });
    CHECK(a == b);

    std::stringstream bad("CKPT9 1\nEND\n");
    CHECK_THROWS(Checkpoint::read(bad));
    std::stringstream truncated(bytes_of(ck).substr(0, 200));
    CHECK_THROWS(Checkpoint::read(truncated));
    CHECK_THROWS(Checkpoint::load("/nonexistent/radscan.ckpt"));
}

}

TEST_SUITE("training") {

TEST_CASE("fpn training is deterministic, finite, and resumable") {
    const auto data = tiny_dataset(6, 41);
    const TrainConfig c = tiny_config(16);
    const TrainRun a = train_fpn(c, data);
    const TrainRun b = train_fpn(c, data);
    CHECK(bytes_of(a.checkpoint) == bytes_of(b.checkpoint));
    REQUIRE(a.rows.size() == 16);
    for (const auto& r : a.rows) {
        CHECK(std::isfinite(r.report.total));
        CHECK(std::abs(r.report.total - r.report.component_sum()) < 1e-6);
    }

    TrainOptions first;
    first.stop_at = 7;
    const TrainRun part = train_fpn(c, data, first);
    CHECK(part.checkpoint.iteration == 7);
    std::stringstream ss;
    part.checkpoint.write(ss);
    const Checkpoint reloaded = Checkpoint::read(ss);
    TrainOptions rest;
    rest.resume = &reloaded;
    const TrainRun resumed = train_fpn(c, data, rest);
    CHECK(bytes_of(resumed.checkpoint) == bytes_of(a.checkpoint));
    REQUIRE(resumed.rows.size() == 9);
    CHECK(resumed.rows.front().iteration == 7);
    CHECK(resumed.rows.back().report.total == a.rows.back().report.total);

    CHECK_THROWS(train_fpn(c, {}));
}

TEST_CASE("main training freezes the prior network and resumes exactly") {
    const auto data = tiny_dataset(4, 42);
    const TrainConfig c = tiny_config(8);
    const TrainRun fpn = train_fpn(c, data);
    const std::string fpn_bytes = bytes_of(fpn.checkpoint);

    CHECK_THROWS_WITH_AS(train_main(c, data, nullptr), doctest::Contains("FPN checkpoint"), std::invalid_argument);
    CHECK_THROWS(train_main(c, data, &(const Checkpoint&)train_main(c, data, &fpn.checkpoint).checkpoint));

    const TrainRun a = train_main(c, data, &fpn.checkpoint);
    CHECK(bytes_of(fpn.checkpoint) == fpn_bytes);
    CHECK(a.rows.size() == 8);
    for (const auto& r : a.rows) CHECK(std::isfinite(r.report.total));

    TrainOptions first;
    first.stop_at = 3;
    const TrainRun part = train_main(c, data, &fpn.checkpoint, first);
    TrainOptions rest;
    rest.resume = &part.checkpoint;
    const TrainRun resumed = train_main(c, data, &fpn.checkpoint, rest);
    CHECK(bytes_of(resumed.checkpoint) == bytes_of(a.checkpoint));

    const MainModel m = main_from_checkpoint(a.checkpoint);
    CHECK(m.config.channels == 4);
    CHECK(m.config.d_state == 2);
    CHECK_THROWS(main_from_checkpoint(fpn.checkpoint));
    CHECK_THROWS(fpn_from_checkpoint(a.checkpoint));
}

TEST_CASE("smoothed loss and loss curve") {
    std::vector<LossRow> rows;
    for (std::size_t i = 0; i < 25; ++i) rows.push_back({i, LossReport{double(25 - i), {{"a", double(25 - i)}}}});
    CHECK(smoothed_loss(rows, false) == 24.5);  // window 2
    CHECK(smoothed_loss(rows, true) == 1.5);
    CHECK_THROWS(smoothed_loss({}, true));

    const fs::path p = fs::temp_directory_path() / "radscan_curve.tsv";
    write_loss_curve(p.string(), rows, 10);
    std::ifstream in(p);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);  // header + 3 intervals
    CHECK(lines[0] == "iteration\ttotal\ta");
    CHECK(lines[1].rfind("9\t20.5\t", 0) == 0);
    CHECK(lines[3].rfind("24\t3\t", 0) == 0);
    fs::remove(p);
}

}

TEST_SUITE("config") {

TEST_CASE("key=value parsing") {
    std::istringstream in("# toy\nchannels = 6\nd_state=3\n\ngroups=5 # depth\nlr=2.5e-4\niterations=10\nseed=9\n"
                          "dataset=/tmp/data\nidentity_init=1\n");
    const TrainConfig c = parse_config(in);
    CHECK(c.channels == 6);
    CHECK(c.d_state == 3);
    CHECK(c.groups == 5);
    CHECK(c.lr == 2.5e-4);
    CHECK(c.iterations == 10);
    CHECK(c.seed == 9);
    CHECK(c.dataset == "/tmp/data");
    CHECK(c.identity_init);

    std::istringstream again(describe(c));
    const TrainConfig d = parse_config(again);
    CHECK(describe(d) == describe(c));

    for (const char* bad : {"colour=3\n", "channels=0\n", "groups=4\n", "lr=-1\n", "seed=abc\n", "novalue\n"}) {
        std::istringstream s(bad);
        CHECK_THROWS_AS(parse_config(s), std::invalid_argument);
    }
    CHECK_THROWS_AS(load_config("/nonexistent/radscan.cfg"), std::invalid_argument);
}

}

TEST_SUITE("evaluation") {

TEST_CASE("identity restoration and region masks") {
    const SceneSample s = make_sample(77, SynthConfig{});
    const Tensor clean = clean_region_mask(s);
    const Tensor gt = s.clean_target();
    const std::size_t hw = 32 * 32;
    for (std::size_t p = 0; p < hw; ++p) {
        if (clean[p] == 0.0) continue;
        CHECK(s.mask[p] == 0.0);
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(s.input[k * hw + p] - gt[k * hw + p]) < kCleanRegionTolerance);
    }
    const SampleScores id = score_restoration(s, s.input);
    CHECK(id.psnr == psnr(s.input, gt));
    CHECK(id.clean_psnr == masked_psnr(s.input, gt, clean));
    CHECK(score_restoration(s, gt).psnr == kPsnrCap);
    CHECK(finite_mean({1.0, NAN, 3.0}) == 2.0);
    CHECK(std::isnan(finite_mean({NAN})));
}

TEST_CASE("ablations starve exactly one mechanism") {
    Rng rng(531);
    const PriorBundle b = some_priors(rng, 16, 16, 2);
    const PriorBundle u = ablate(b, Ablation::no_unfold), h = ablate(b, Ablation::no_hb), r = ablate(b, Ablation::no_rse);
    for (std::size_t l = 0; l <= 2; ++l) {
        CHECK(u.level(l).p_position.empty());
        CHECK(u.level(l).has_mask());
        CHECK_FALSE(h.level(l).has_mask());
        CHECK(h.level(l).has_flare());
        CHECK_FALSE(r.level(l).has_flare());
        CHECK(r.level(l).p_position == b.level(l).p_position);
    }
    CHECK(ablate(b, Ablation::full).full.p_flare == b.full.p_flare);
    CHECK(all_ablations().size() == 4);
    CHECK(std::string(ablation_name(Ablation::no_hb)) == "w/o HB");
}

}
