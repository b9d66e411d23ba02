#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "dmnet/data/fold.hpp"
#include "dmnet/data/index.hpp"
#include "dmnet/data/synthetic.hpp"
#include "dmnet/image.hpp"
#include "helpers.hpp"

using namespace dmnet;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

SyntheticSpec small_spec(int n_images, std::uint64_t seed = 5) {
    SyntheticSpec spec;
    spec.classes = synthetic_class_names();
    spec.n_images = n_images;
    spec.image_size = 64;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("fold spec parsing") {
    const FoldSpec fold = parse_fold_spec_text(testutil::kSyntheticFoldText, 0, "inline");
    CHECK(fold.class_names.size() == 8);
    CHECK(fold.training_classes == std::vector<int>{1, 2, 3, 4, 5, 6});
    CHECK(fold.testing_classes == std::vector<int>{7, 8});
    CHECK(fold.is_training_class(1));
    CHECK(fold.is_testing_class(7));
    CHECK(!fold.is_training_class(7));
    CHECK(fold.name_of(7) == "ellipse");
    CHECK(fold.id_of("ellipse") == 7);
    CHECK(fold.id_of("nope") == 0);
    CHECK(fold.train_slot(1) == 0);
    CHECK(fold.train_slot(6) == 5);
    CHECK_THROWS_AS(fold.train_slot(7), IndexError);
}

TEST_CASE("fold spec error reporting") {
    CHECK_THROWS_AS(parse_fold_spec_text("", 0, "x"), SpecError);
    CHECK_THROWS_AS(
        parse_fold_spec_text("classes = a, b\n[fold 0]\ntrain = a\ntest = a\n", 0, "x"),
        SpecError);  // overlap
    CHECK_THROWS_AS(
        parse_fold_spec_text("classes = a, b\n[fold 0]\ntrain = a\ntest = c\n", 0, "x"),
        SpecError);  // unknown name
    CHECK_THROWS_AS(
        parse_fold_spec_text("classes = a, a\n[fold 0]\ntrain = a\ntest = a\n", 0, "x"),
        SpecError);  // duplicate class
    CHECK_THROWS_AS(parse_fold_spec_text("classes = a, b\n", 1, "x"), SpecError);  // missing fold
}

TEST_CASE("shipped fold files match the published splits") {
    const FoldSpec f0 = load_fold_spec(testutil::repo_path("configs/isaid_folds.cfg"), 0);
    CHECK(f0.class_names.size() == 15);
    CHECK(f0.testing_classes == std::vector<int>{1, 2, 3, 4, 5});
    CHECK(f0.name_of(1) == "ship");
    CHECK(f0.name_of(5) == "basketball_court");

    const FoldSpec f2 = load_fold_spec(testutil::repo_path("configs/isaid_folds.cfg"), 2);
    CHECK(f2.testing_classes == std::vector<int>{11, 12, 13, 14, 15});
    CHECK(f2.name_of(15) == "harbor");
    CHECK(f2.training_classes.size() == 10);

    const FoldSpec l2 = load_fold_spec(testutil::repo_path("configs/loveda_folds.cfg"), 2);
    CHECK(l2.class_names.size() == 6);
    std::vector<std::string> test_names;
    for (int id : l2.testing_classes) test_names.push_back(l2.name_of(id));
    CHECK(test_names == std::vector<std::string>{"forest", "agriculture"});

    const FoldSpec s0 = load_fold_spec(testutil::repo_path("configs/synthetic_folds.cfg"), 0);
    CHECK(s0.testing_classes == std::vector<int>{7, 8});
    const FoldSpec s3 = load_fold_spec(testutil::repo_path("configs/synthetic_folds.cfg"), 3);
    std::vector<std::string> s3_names;
    for (int id : s3.testing_classes) s3_names.push_back(s3.name_of(id));
    CHECK(s3_names == std::vector<std::string>{"cross", "star"});
}

TEST_CASE("png round-trips") {
    testutil::TempDir tmp("png");
    ImageU8 img;
    img.width = 5;
    img.height = 3;
    img.pixels.resize(45);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(i * 17 % 256);
    const std::string ipath = tmp.str() + "/i.png";
    write_image_png(ipath, img);
    const ImageU8 back = read_image_png(ipath);
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.pixels == img.pixels);

    MaskU8 mask;
    mask.width = 4;
    mask.height = 2;
    mask.pixels = {0, 1, 2, 8, 255, 0, 3, 7};
    const std::string mpath = tmp.str() + "/m.png";
    write_mask_png(mpath, mask);
    const MaskU8 mback = read_mask_png(mpath);
    CHECK(mback.pixels == mask.pixels);

    // color PNGs are not valid masks
    CHECK_THROWS_AS(read_mask_png(ipath), DataError);
    CHECK_THROWS_AS(read_image_png(tmp.str() + "/missing.png"), DataError);

    // identical pixels encode to identical bytes
    const std::string ipath2 = tmp.str() + "/i2.png";
    write_image_png(ipath2, img);
    CHECK(file_bytes(ipath) == file_bytes(ipath2));
}

TEST_CASE("synthetic generation is deterministic and well-formed") {
    testutil::TempDir tmp("gen");
    const SyntheticSpec spec = small_spec(24);
    const GenReport rep = generate_synthetic_dataset(tmp.str() + "/a", spec);
    CHECK(rep.n_images == 24);
    generate_synthetic_dataset(tmp.str() + "/b", spec);

    for (int i = 0; i < 24; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.png", i);
        CHECK(file_bytes(tmp.path / "a" / "images" / name) ==
              file_bytes(tmp.path / "b" / "images" / name));
        CHECK(file_bytes(tmp.path / "a" / "masks" / name) ==
              file_bytes(tmp.path / "b" / "masks" / name));

        const MaskU8 mask = read_mask_png((tmp.path / "a" / "masks" / name).string());
        CHECK(mask.width == 64);
        CHECK(mask.height == 64);
        std::set<int> present;
        for (auto v : mask.pixels) {
            CHECK(v <= 8);
            if (v > 0) present.insert(v);
        }
        CHECK(present.size() >= 2);  // at least shapes_min visible classes
        for (int id : present) {
            const int count = static_cast<int>(
                std::count(mask.pixels.begin(), mask.pixels.end(), static_cast<std::uint8_t>(id)));
            CHECK(count >= 20);
        }
    }
    CHECK(file_bytes(tmp.path / "a" / "metadata.json") ==
          file_bytes(tmp.path / "b" / "metadata.json"));

    // different seed changes content
    SyntheticSpec other = small_spec(24, 6);
    generate_synthetic_dataset(tmp.str() + "/c", other);
    CHECK(file_bytes(tmp.path / "a" / "images" / "img_00000.png") !=
          file_bytes(tmp.path / "c" / "images" / "img_00000.png"));
}

TEST_CASE("synthetic spec validation") {
    DataConfig d;
    d.classes = 1;
    CHECK_THROWS_AS(synthetic_spec_from_config(d), SpecError);
    d.classes = 9;
    CHECK_THROWS_AS(synthetic_spec_from_config(d), SpecError);
    d.classes = 4;
    const SyntheticSpec s = synthetic_spec_from_config(d);
    CHECK(s.classes == std::vector<std::string>{"disk", "ring", "triangle", "rectangle"});
}

TEST_CASE("episode index filters leakage and samples correctly") {
    testutil::TempDir tmp("index");
    generate_synthetic_dataset(tmp.str(), small_spec(60));
    const FoldSpec fold = parse_fold_spec_text(testutil::kSyntheticFoldText, 0, "inline");

    const EpisodeIndex train = EpisodeIndex::build(tmp.str(), fold, Split::train);
    const EpisodeIndex test = EpisodeIndex::build(tmp.str(), fold, Split::test);

    for (int c : train.classes()) CHECK(fold.is_training_class(c));
    for (int c : test.classes()) CHECK(fold.is_testing_class(c));

    // no training image contains a testing-class pixel
    for (int c : train.classes())
        for (const auto& id : train.images_of(c)) {
            const MaskU8 m = read_mask_png((tmp.path / "masks" / (id + ".png")).string());
            for (auto v : m.pixels) {
                CHECK(v != 7);
                CHECK(v != 8);
            }
        }

    Rng rng(3);
    const Episode ep = train.sample_episode(1, rng);
    CHECK(ep.support_images.size() == 1);
    CHECK(ep.support_ids[0] != ep.query_id);
    CHECK(fold.is_training_class(ep.target_class));
    CHECK(ep.height == 64);
    CHECK(ep.query_mask.size() == 64 * 64);
    double fg = 0.0;
    for (double v : ep.query_mask) {
        CHECK((v == 0.0 || v == 1.0));
        fg += v;
    }
    CHECK(fg > 0.0);
    for (double v : ep.support_masks[0]) CHECK((v == 0.0 || v == 1.0));

    // same rng seed, same episode
    Rng rng2(3);
    const Episode ep2 = train.sample_episode(1, rng2);
    CHECK(ep2.query_id == ep.query_id);
    CHECK(ep2.support_ids == ep.support_ids);
    CHECK(ep2.target_class == ep.target_class);
}

TEST_CASE("make_episode validates membership") {
    testutil::TempDir tmp("episode");
    generate_synthetic_dataset(tmp.str(), small_spec(40));
    const FoldSpec fold = parse_fold_spec_text(testutil::kSyntheticFoldText, 0, "inline");
    const EpisodeIndex index = EpisodeIndex::build(tmp.str(), fold, Split::train);

    const int cls = index.classes().front();
    const auto& imgs = index.images_of(cls);
    REQUIRE(imgs.size() >= 2);
    const Episode ep = index.make_episode(imgs[0], {imgs[1]}, cls);
    CHECK(ep.query_id == imgs[0]);

    // an image without the class cannot serve as its query
    std::string outsider;
    for (int other : index.classes())
        for (const auto& id : index.images_of(other))
            if (std::find(imgs.begin(), imgs.end(), id) == imgs.end()) {
                outsider = id;
                break;
            }
    if (!outsider.empty())
        CHECK_THROWS_AS(index.make_episode(outsider, {imgs[1]}, cls), SamplingError);
    CHECK_THROWS_AS(index.make_episode("no_such_id", {imgs[1]}, cls), DataError);
}

TEST_CASE("missing training classes are a hard error") {
    testutil::TempDir tmp("missing");
    SyntheticSpec spec = small_spec(30);
    spec.classes = {"disk", "ring", "triangle", "rectangle"};  // no cross/star/ellipse/lshape
    generate_synthetic_dataset(tmp.str(), spec);
    const FoldSpec fold = parse_fold_spec_text(testutil::kSyntheticFoldText, 0, "inline");
    CHECK_THROWS_AS(EpisodeIndex::build(tmp.str(), fold, Split::train), DataError);
}

TEST_CASE("pair lists are deterministic and round-trip through files") {
    testutil::TempDir tmp("pairs");
    generate_synthetic_dataset(tmp.str(), small_spec(40));
    const FoldSpec fold = parse_fold_spec_text(testutil::kSyntheticFoldText, 0, "inline");
    const EpisodeIndex index = EpisodeIndex::build(tmp.str(), fold, Split::test);

    const auto pairs = make_pair_list(index, 20, 1, 9);
    const auto again = make_pair_list(index, 20, 1, 9);
    REQUIRE(pairs.size() == 20);
    for (size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].query_id == again[i].query_id);
        CHECK(pairs[i].support_ids == again[i].support_ids);
        CHECK(pairs[i].class_id == again[i].class_id);
        CHECK(pairs[i].support_ids.size() == 1);
        CHECK(std::find(pairs[i].support_ids.begin(), pairs[i].support_ids.end(),
                        pairs[i].query_id) == pairs[i].support_ids.end());
    }
    const auto other = make_pair_list(index, 20, 1, 10);
    bool differs = false;
    for (size_t i = 0; i < pairs.size(); ++i)
        differs = differs || pairs[i].query_id != other[i].query_id;
    CHECK(differs);

    const std::string path = tmp.str() + "/pairs.txt";
    write_pair_list(path, pairs);
    const auto read = read_pair_list(path);
    REQUIRE(read.size() == pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        CHECK(read[i].query_id == pairs[i].query_id);
        CHECK(read[i].support_ids == pairs[i].support_ids);
        CHECK(read[i].class_id == pairs[i].class_id);
    }

    // k too large for every class -> SamplingError
    CHECK_THROWS_AS(make_pair_list(index, 5, 1000, 0), SamplingError);
}
