#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "dmnet/config.hpp"
#include "dmnet/error.hpp"
#include "dmnet/rng.hpp"
#include "dmnet/serialize.hpp"
#include "helpers.hpp"

using namespace dmnet;

TEST_CASE("rng streams are deterministic and independent") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i) differs = differs || (a2.next_u64() != c.next_u64());
    CHECK(differs);

    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(derive_seed(1, 2, 0) != derive_seed(1, 2, 1));
    CHECK(derive_seed(7, 9) == derive_seed(7, 9));
}

TEST_CASE("rng draw ranges") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        CHECK(rng.next_below(10) < 10);
        const int v = rng.next_int(-3, 3);
        CHECK(v >= -3);
        CHECK(v <= 3);
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double r = rng.next_range(2.0, 5.0);
        CHECK(r >= 2.0);
        CHECK(r <= 5.0);
    }
    // all residues of next_below(3) appear
    bool seen[3] = {false, false, false};
    for (int i = 0; i < 200; ++i) seen[rng.next_below(3)] = true;
    CHECK((seen[0] && seen[1] && seen[2]));
}

TEST_CASE("archive round-trips all entry kinds bit-exactly") {
    Archive a;
    a.put_f64("weights", {2, 3}, {1.5, -2.25, 1e-300, 0.0, 3.14159, -0.0});
    a.put_i64("count", {42, -7});
    a.put_text("note", "hello\nworld");

    const std::vector<std::uint8_t> bytes = a.encode();
    const Archive b = Archive::decode(bytes);
    CHECK(b.shape_of("weights") == Shape{2, 3});
    CHECK(b.f64("weights") == a.f64("weights"));
    CHECK(b.i64("count") == std::vector<std::int64_t>{42, -7});
    CHECK(b.text("note") == "hello\nworld");
    CHECK(b.encode() == bytes);

    CHECK_THROWS_AS(a.put_i64("count", {1}), Error);     // duplicate name
    CHECK_THROWS_AS(b.f64("missing"), Error);            // absent entry
    std::vector<std::uint8_t> trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(Archive::decode(trailing), Error);
    CHECK_THROWS_AS(Archive::decode({1, 2, 3}), Error);  // bad magic
}

TEST_CASE("archive file save and load") {
    testutil::TempDir tmp("archive");
    Archive a;
    a.put_f64("x", {3}, {1.0, 2.0, 3.0});
    const std::string path = tmp.str() + "/a.dmck";
    a.save(path);
    const Archive b = Archive::load(path);
    CHECK(b.f64("x") == std::vector<double>{1.0, 2.0, 3.0});
    CHECK_THROWS_AS(Archive::load(tmp.str() + "/nope.dmck"), Error);
}

TEST_CASE("config defaults carry the published hyperparameters") {
    const Config cfg;
    CHECK(cfg.cprm.lambda_fuse == 0.5);
    CHECK(cfg.csrm.mu1 == 0.7);
    CHECK(cfg.csrm.mu2 == 0.6);
    CHECK(cfg.csrm.step_mu1 == 0.05);
    CHECK(cfg.csrm.step_mu2 == 0.02);
    CHECK(cfg.csrm.cpm_iters == 3);
    CHECK(cfg.csrm.gamma1 == 0.9);
    CHECK(cfg.csrm.gamma2 == 0.1);
    CHECK(cfg.kms.rho == 0.5);
    CHECK(cfg.kms.lambda_warm == 0.8);
    CHECK(cfg.train.lr == 0.005);
    CHECK(cfg.train.momentum == 0.9);
    CHECK(cfg.train.weight_decay == 1e-4);
    CHECK(cfg.train.poly_power == 0.9);
    CHECK(cfg.train.batch == 8);
    CHECK(cfg.eval.n_pairs == 1000);
}

TEST_CASE("config parsing applies sections and types") {
    const Config cfg = parse_config_text(
        "# comment\n"
        "[data]\n"
        "fold = 2\n"
        "image_size = 32\n"
        "[model]\n"
        "use_cprm = false\n"
        "[train]\n"
        "lr = 0.003\n"
        "; another comment\n"
        "[csrm]\n"
        "mu1 = 0.75\n");
    CHECK(cfg.data.fold == 2);
    CHECK(cfg.data.image_size == 32);
    CHECK(cfg.model.use_cprm == false);
    CHECK(cfg.model.use_csrm == true);
    CHECK(cfg.train.lr == 0.003);
    CHECK(cfg.csrm.mu1 == 0.75);
}

TEST_CASE("config rejects unknown keys with the valid alternatives") {
    try {
        parse_config_text("[train]\nlearning_rate = 1\n");
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("learning_rate") != std::string::npos);
        CHECK(msg.find("lr") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("[nope]\nx = 1\n"), SpecError);
    CHECK_THROWS_AS(parse_config_text("[train]\nlr = banana\n"), SpecError);
    CHECK_THROWS_AS(parse_config_text("lr = 1\n"), SpecError);  // key before any section
}

TEST_CASE("config render and re-parse is lossless") {
    Config cfg;
    cfg.data.fold = 1;
    cfg.train.lr = 0.0042;
    cfg.model.use_kms = false;
    cfg.csrm.tau = 12.5;
    const std::string text = cfg.to_string();
    const Config back = parse_config_text(text);
    CHECK(back.to_string() == text);
    CHECK(back.data.fold == 1);
    CHECK(back.train.lr == 0.0042);
    CHECK(back.model.use_kms == false);
    CHECK(back.csrm.tau == 12.5);
}

TEST_CASE("config file loading") {
    testutil::TempDir tmp("config");
    const std::string path = tmp.str() + "/c.cfg";
    std::ofstream(path) << "[eval]\nk = 5\n";
    CHECK(load_config(path).eval.k == 5);
    CHECK_THROWS_AS(load_config(tmp.str() + "/missing.cfg"), SpecError);
}

TEST_CASE("error types stay catchable through the base class") {
    const auto as_base = [](auto make) {
        try {
            throw make("x");
        } catch (const Error&) {
            return true;
        } catch (...) {
            return false;
        }
    };
    CHECK(as_base([](const char* m) { return SpecError(m); }));
    CHECK(as_base([](const char* m) { return DataError(m); }));
    CHECK(as_base([](const char* m) { return SamplingError(m); }));
    CHECK(as_base([](const char* m) { return EmptyMaskError(m); }));
    CHECK(as_base([](const char* m) { return SizeError(m); }));
    CHECK(as_base([](const char* m) { return ShapeError(m); }));
    CHECK(as_base([](const char* m) { return IndexError(m); }));
    CHECK(as_base([](const char* m) { return NumericalError(m); }));
}
