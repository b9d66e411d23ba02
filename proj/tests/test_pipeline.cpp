#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <memory>
#include <vector>

#include "dmnet/data/synthetic.hpp"
#include "dmnet/model.hpp"
#include "dmnet/train.hpp"
#include "helpers.hpp"

using namespace dmnet;

namespace {

// one shared corpus for every case in this file
const std::string& corpus_root() {
    static testutil::TempDir tmp("pipeline");
    static bool generated = false;
    if (!generated) {
        SyntheticSpec spec;
        spec.classes = synthetic_class_names();
        spec.n_images = 48;
        spec.image_size = 64;
        spec.seed = 21;
        generate_synthetic_dataset(tmp.str(), spec);
        generated = true;
    }
    static std::string root = tmp.str();
    return root;
}

FoldSpec fold0() { return parse_fold_spec_text(testutil::kSyntheticFoldText, 0, "inline"); }

Config small_config() {
    Config cfg;
    cfg.data.root = corpus_root();
    cfg.data.n_images = 48;
    cfg.model.reduce_dim = 16;  // keep unit runs quick
    cfg.model.high_dim = 24;
    cfg.cprm.rank = 16;
    return cfg;
}

Episode fixed_episode(const EpisodeIndex& index, int k = 1, std::uint64_t seed = 3) {
    Rng rng(seed);
    return index.sample_episode(k, rng);
}

std::vector<std::uint8_t> file_bytes(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("forward pass produces full-resolution probabilities") {
    const Config cfg = small_config();
    Model model(cfg, fold0());
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::train);
    const Episode ep = fixed_episode(index);

    const auto out = model.forward_episode(ep, Mode::test);
    CHECK(out.y_q.probs.shape() == Shape{2, 8, 8});
    CHECK(out.y_final.probs.shape() == Shape{2, 8, 8});
    CHECK(static_cast<int>(out.fg_prob_full.size()) == 64 * 64);
    for (double v : out.fg_prob_full) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(!out.loss.defined());
}

TEST_CASE("test-mode inference never touches the memory") {
    const Config cfg = small_config();
    Model model(cfg, fold0());
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::test);

    const MetaMemory before = model.memory();
    model.forward_episode(fixed_episode(index), Mode::test);
    CHECK(model.memory().w_f == before.w_f);
    CHECK(model.memory().w_b == before.w_b);
    CHECK(model.memory().init_flag == before.init_flag);
}

TEST_CASE("train-mode forward yields a finite loss and writes the memory") {
    const Config cfg = small_config();
    Model model(cfg, fold0());
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::train);
    const Episode ep = fixed_episode(index);

    const auto out = model.forward_episode(ep, Mode::train);
    REQUIRE(out.loss.defined());
    CHECK(std::isfinite(out.loss.item()));
    CHECK(out.loss.item() > 0.0);

    const int slot = fold0().train_slot(ep.target_class);
    CHECK(model.memory().initialized(slot));
    CHECK(model.memory().update_count[slot] == 1);

    out.loss.backward();
    bool any_grad = false;
    for (const auto& t : model.params().tensors())
        for (double g : t.grad()) any_grad = any_grad || g != 0.0;
    CHECK(any_grad);
}

TEST_CASE("refinement adds no learnable parameters") {
    Config with = small_config();
    Config without = small_config();
    without.model.use_csrm = false;
    Model a(with, fold0());
    Model b(without, fold0());
    CHECK(a.params().total_numel() == b.params().total_numel());
}

TEST_CASE("the mining switch controls the parameter set") {
    Config base = small_config();
    Config ablated = small_config();
    ablated.model.use_cprm = false;
    Model a(base, fold0());
    Model b(ablated, fold0());
    CHECK(a.params().has("cprm.w_p"));
    CHECK(!b.params().has("cprm.w_p"));
    CHECK(a.params().total_numel() > b.params().total_numel());

    // the ablated model still runs end to end
    const EpisodeIndex index = EpisodeIndex::build(base.data.root, fold0(), Split::train);
    const auto out = b.forward_episode(fixed_episode(index), Mode::train);
    CHECK(std::isfinite(out.loss.item()));
}

TEST_CASE("identically configured models agree bit for bit") {
    testutil::TempDir tmp("det");
    const Config cfg = small_config();
    Model a(cfg, fold0());
    Model b(cfg, fold0());
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::train);
    const Episode ep = fixed_episode(index);

    const auto oa = a.forward_episode(ep, Mode::train);
    const auto ob = b.forward_episode(ep, Mode::train);
    CHECK(oa.loss.item() == ob.loss.item());
    CHECK(oa.fg_prob_full == ob.fg_prob_full);

    a.save_checkpoint(tmp.str() + "/a.dmck");
    b.save_checkpoint(tmp.str() + "/b.dmck");
    CHECK(file_bytes(tmp.str() + "/a.dmck") == file_bytes(tmp.str() + "/b.dmck"));
}

TEST_CASE("checkpoints restore the model exactly") {
    testutil::TempDir tmp("ckpt");
    const Config cfg = small_config();
    const FoldSpec fold = fold0();
    const EpisodeIndex train = EpisodeIndex::build(cfg.data.root, fold, Split::train);
    const EpisodeIndex test = EpisodeIndex::build(cfg.data.root, fold, Split::test);

    Model model(cfg, fold);
    Rng rng(11);
    for (int i = 0; i < 4; ++i) model.forward_episode(train.sample_episode(1, rng), Mode::train);

    const std::string path = tmp.str() + "/model.dmck";
    model.save_checkpoint(path);
    Model back = Model::load_checkpoint(path);

    CHECK(back.fold().testing_classes == fold.testing_classes);
    CHECK(back.fold().class_names == fold.class_names);
    CHECK(back.memory().w_f == model.memory().w_f);
    CHECK(back.memory().update_count == model.memory().update_count);
    CHECK(back.config().model.reduce_dim == cfg.model.reduce_dim);

    const Episode ep = fixed_episode(test, 1, 77);
    const auto oa = model.forward_episode(ep, Mode::test);
    const auto ob = back.forward_episode(ep, Mode::test);
    CHECK(oa.fg_prob_full == ob.fg_prob_full);

    // a second save round-trips to identical bytes
    back.save_checkpoint(tmp.str() + "/again.dmck");
    CHECK(file_bytes(path) == file_bytes(tmp.str() + "/again.dmck"));
}

TEST_CASE("the frozen backbone is deterministic per seed") {
    Config cfg = small_config();
    Model a(cfg, fold0());
    Model b(cfg, fold0());
    CHECK(a.backbone().weight_hash() == b.backbone().weight_hash());

    cfg.model.backbone_seed = 999;
    Model c(cfg, fold0());
    CHECK(c.backbone().weight_hash() != a.backbone().weight_hash());

    ImageU8 tiny;
    tiny.width = 4;
    tiny.height = 4;
    tiny.pixels.assign(4 * 4 * 3, 10);
    CHECK_THROWS_AS(a.backbone().extract(tiny), SizeError);
}

TEST_CASE("training runs, honors the warm-up gate and never thaws the backbone") {
    Config cfg = small_config();
    cfg.train.epochs = 2;
    cfg.train.episodes_per_epoch = 10;
    cfg.train.batch = 2;  // 5 iterations per epoch, 10 total
    Model model(cfg, fold0());
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::train);

    int logged = 0;
    const TrainStats stats = train_model(model, index, [&](int, double, double) { ++logged; });
    CHECK(stats.iterations == 10);
    CHECK(logged == 10);
    // boundary = round(0.8 * 5) = 4: iterations 0..3 skip their step
    CHECK(stats.skipped_by_warmup == 4);
    CHECK(std::isfinite(stats.final_loss));
    CHECK(stats.backbone_hash_before == stats.backbone_hash_after);

    // ablating the memory disables the gate
    Config no_kms = cfg;
    no_kms.model.use_kms = false;
    Model plain(no_kms, fold0());
    const TrainStats s2 = train_model(plain, index);
    CHECK(s2.skipped_by_warmup == 0);
    CHECK(s2.iterations == 10);
}

TEST_CASE("training is reproducible end to end") {
    Config cfg = small_config();
    cfg.train.epochs = 1;
    cfg.train.episodes_per_epoch = 6;
    cfg.train.batch = 2;
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::train);

    std::vector<double> losses_a, losses_b;
    Model a(cfg, fold0());
    train_model(a, index, [&](int, double l, double) { losses_a.push_back(l); });
    Model b(cfg, fold0());
    train_model(b, index, [&](int, double l, double) { losses_b.push_back(l); });
    CHECK(losses_a == losses_b);
}

TEST_CASE("the poly schedule spans full rate to zero") {
    nn::SgdConfig scfg;
    scfg.lr = 0.01;
    scfg.poly_power = 0.9;
    scfg.max_iter = 100;
    nn::Sgd opt({}, scfg);
    CHECK(opt.lr_at(0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(opt.lr_at(100) == 0.0);
    CHECK(opt.lr_at(50) == doctest::Approx(0.01 * std::pow(0.5, 0.9)).epsilon(1e-12));
}

TEST_CASE("multi-shot episodes fuse all branches") {
    const Config cfg = small_config();
    Model model(cfg, fold0());
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::train);

    Episode ep;
    bool found = false;
    for (std::uint64_t seed = 1; seed <= 30 && !found; ++seed) {
        Rng rng(seed);
        try {
            ep = index.sample_episode(5, rng);
            found = true;
        } catch (const SamplingError&) {
        }
    }
    REQUIRE(found);

    const auto out = model.forward_episode(ep, Mode::test);
    CHECK(out.y_final.probs.shape() == Shape{2, 8, 8});
    const int hw = 64;
    for (int i = 0; i < hw; ++i)
        CHECK(out.y_final.probs.value_at(i) + out.y_final.probs.value_at(hw + i) ==
              doctest::Approx(1.0).epsilon(1e-9));

    // K = 1 on the same query and first support equals the single-branch path
    const Episode one = index.make_episode(ep.query_id, {ep.support_ids[0]}, ep.target_class);
    const auto out1 = model.forward_episode(one, Mode::test);
    CHECK(out1.y_final.probs.shape() == Shape{2, 8, 8});
}

TEST_CASE("the feature cache does not change results") {
    const Config cfg = small_config();
    Model cached(cfg, fold0());
    Model uncached(cfg, fold0());
    uncached.set_feature_cache(false);
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold0(), Split::train);
    const Episode ep = fixed_episode(index);

    const auto oa = cached.forward_episode(ep, Mode::test);
    const auto ob = uncached.forward_episode(ep, Mode::test);
    CHECK(oa.fg_prob_full == ob.fg_prob_full);

    // repeated forward with the cache stays bit-stable
    const auto oc = cached.forward_episode(ep, Mode::test);
    CHECK(oa.fg_prob_full == oc.fg_prob_full);
}
