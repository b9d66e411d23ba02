#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmnet/config.hpp"
#include "dmnet/data/fold.hpp"
#include "dmnet/data/index.hpp"
#include "dmnet/data/synthetic.hpp"
#include "dmnet/error.hpp"
#include "dmnet/evaluate.hpp"
#include "dmnet/image.hpp"
#include "dmnet/model.hpp"
#include "dmnet/plot.hpp"
#include "dmnet/train.hpp"
#include "dmnet/version.hpp"

namespace fs = std::filesystem;
using namespace dmnet;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create: " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

Config load_with_overrides(const std::string& config_path, const std::vector<std::string>& sets) {
    Config cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (sets.empty()) return cfg;
    std::string text;
    for (const auto& s : sets) {
        const auto dot = s.find('.');
        const auto eq = s.find('=');
        if (dot == std::string::npos || eq == std::string::npos || dot > eq)
            throw SpecError("--set expects section.key=value, got '" + s + "'");
        text += "[" + s.substr(0, dot) + "]\n";
        text += s.substr(dot + 1, eq - dot - 1) + " = " + s.substr(eq + 1) + "\n";
    }
    return parse_config_text(text, cfg);
}

void write_manifest(const std::string& dir, const std::string& command, const Config& cfg,
                    std::uint64_t seed) {
    std::ostringstream out;
    out << "# run manifest\n";
    out << "version = " << kVersion << "\n";
    out << "command = " << command << "\n";
    out << "seed = " << seed << "\n\n";
    out << cfg.to_string();
    write_file(dir + "/manifest.txt", out.str());
}

int resolve_class(const FoldSpec& fold, const std::string& s) {
    try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    const int id = fold.id_of(s);
    if (id == 0) throw SpecError("unknown class '" + s + "'");
    return id;
}

struct GenArgs {
    std::string config, out;
    int images = 0, size = 0;
    std::uint64_t seed = 0;
    bool has_images = false, has_size = false, has_seed = false;
    std::vector<std::string> sets;
};

int run_gen(const GenArgs& a) {
    Config cfg = load_with_overrides(a.config, a.sets);
    if (!a.out.empty()) cfg.data.root = a.out;
    if (a.has_images) cfg.data.n_images = a.images;
    if (a.has_size) cfg.data.image_size = a.size;
    if (a.has_seed) cfg.data.seed = a.seed;

    const SyntheticSpec spec = synthetic_spec_from_config(cfg.data);
    const GenReport rep = generate_synthetic_dataset(cfg.data.root, spec);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    write_manifest(cfg.data.root, "gen-data", cfg, spec.seed);
    std::cout << "wrote " << rep.n_images << " images under " << cfg.data.root << "\n";
    return 0;
}

struct TrainArgs {
    std::string config, out = "runs/train";
    int fold = 0;
    std::uint64_t seed = 0;
    bool has_fold = false, has_seed = false;
    std::vector<std::string> sets;
};

int run_train(const TrainArgs& a) {
    Config cfg = load_with_overrides(a.config, a.sets);
    if (a.has_fold) cfg.data.fold = a.fold;
    if (a.has_seed) cfg.train.seed = static_cast<int>(a.seed);

    const FoldSpec fold = load_fold_spec(cfg.data.fold_file, cfg.data.fold);
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold, Split::train);
    fs::create_directories(a.out);

    Model model(cfg, fold);
    std::cout << "fold " << fold.fold_id << ": " << fold.training_classes.size()
              << " training classes, " << index.n_entries() << " images, "
              << model.params().total_numel() << " learnable values\n";

    std::ofstream log(a.out + "/loss_log.csv", std::ios::trunc);
    if (!log) throw DataError("cannot create: " + a.out + "/loss_log.csv");
    log << "iter,loss,lr\n";
    log.precision(10);
    const TrainStats stats = train_model(model, index, [&](int iter, double loss, double lr) {
        log << iter << "," << loss << "," << lr << "\n";
    });

    model.save_checkpoint(a.out + "/checkpoint.dmck");
    write_manifest(a.out, "train", cfg, static_cast<std::uint64_t>(cfg.train.seed));
    std::cout << "trained " << stats.iterations << " iterations (" << stats.skipped_by_warmup
              << " in warm-up), final loss " << stats.final_loss << "\n";
    std::cout << "checkpoint: " << a.out << "/checkpoint.dmck\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint, out = "runs/eval", data_root;
    int k = 0, pairs = 0, fold = 0;
    std::uint64_t seed = 0;
    bool has_k = false, has_pairs = false, has_fold = false, has_seed = false;
};

int run_eval(const EvalArgs& a) {
    Model model = Model::load_checkpoint(a.checkpoint);
    Config cfg = model.config();
    if (!a.data_root.empty()) cfg.data.root = a.data_root;
    if (a.has_fold && a.fold != model.fold().fold_id)
        throw SpecError("checkpoint was trained on fold " + std::to_string(model.fold().fold_id) +
                        ", not " + std::to_string(a.fold));
    const int k = a.has_k ? a.k : cfg.eval.k;
    const int pairs = a.has_pairs ? a.pairs : cfg.eval.n_pairs;
    const std::uint64_t seed = a.has_seed ? a.seed : static_cast<std::uint64_t>(cfg.eval.seed);

    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, model.fold(), Split::test);
    const MetricsReport rep = evaluate_fold(model_predictor(model), index, pairs, k, seed);

    fs::create_directories(a.out);
    write_file(a.out + "/report.txt", rep.to_text());
    write_file(a.out + "/report.json", rep.to_json());
    write_manifest(a.out, "eval", cfg, seed);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << rep.n_evaluated << "/" << rep.n_pairs << " pairs, k=" << k << "\n";
    std::cout << "miou = " << rep.miou << "\nfb_iou = " << rep.fb_iou << "\nmacc = " << rep.macc
              << "\n";
    std::cout << "report: " << a.out << "/report.json\n";
    return 0;
}

struct PredictArgs {
    std::string checkpoint, out = "runs/predict/pred", data_root, cls, query;
    std::vector<std::string> supports;
    std::uint64_t seed = 0;
};

int run_predict(const PredictArgs& a) {
    Model model = Model::load_checkpoint(a.checkpoint);
    Config cfg = model.config();
    if (!a.data_root.empty()) cfg.data.root = a.data_root;
    const FoldSpec& fold = model.fold();
    const int class_id = resolve_class(fold, a.cls);
    const Split split = fold.is_testing_class(class_id) ? Split::test : Split::train;
    const EpisodeIndex index = EpisodeIndex::build(cfg.data.root, fold, split);

    Episode ep;
    if (!a.query.empty() && !a.supports.empty()) {
        ep = index.make_episode(a.query, a.supports, class_id);
    } else if (a.query.empty() && a.supports.empty()) {
        const auto& imgs = index.images_of(class_id);
        if (imgs.size() < 2)
            throw SamplingError("class '" + fold.name_of(class_id) + "' has fewer than 2 images");
        Rng rng(derive_seed(a.seed, 0x93ed));
        const int qi = static_cast<int>(rng.next_below(imgs.size()));
        int si = qi;
        while (si == qi) si = static_cast<int>(rng.next_below(imgs.size()));
        ep = index.make_episode(imgs[qi], {imgs[si]}, class_id);
    } else {
        throw SpecError("give both --query and --support, or neither to sample");
    }

    const std::vector<double> fg_prob = model_predictor(model)(ep);
    const std::vector<std::uint8_t> pred = binarize_fg(fg_prob);

    MaskU8 mask;
    mask.width = ep.width;
    mask.height = ep.height;
    mask.pixels.resize(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) mask.pixels[i] = pred[i] ? 255 : 0;

    ImageU8 overlay = ep.query_image;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!pred[i]) continue;
        std::uint8_t* px = overlay.pixels.data() + i * 3;
        px[0] = static_cast<std::uint8_t>((px[0] + 255) / 2);
        px[1] = static_cast<std::uint8_t>(px[1] / 2);
        px[2] = static_cast<std::uint8_t>(px[2] / 2);
    }

    const fs::path prefix(a.out);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    write_mask_png(a.out + "_mask.png", mask);
    write_image_png(a.out + "_overlay.png", overlay);

    std::vector<std::uint8_t> gt(ep.query_mask.size());
    for (size_t i = 0; i < gt.size(); ++i) gt[i] = ep.query_mask[i] > 0.5 ? 1 : 0;
    const IouCounts c = accumulate_iou(pred, gt);
    const double iou =
        c.tp + c.fp + c.fn == 0 ? 100.0 : 100.0 * c.tp / static_cast<double>(c.tp + c.fp + c.fn);
    std::cout << "query " << ep.query_id << ", class '" << fold.name_of(class_id) << "', iou "
              << iou << "\n";
    std::cout << "wrote " << a.out << "_mask.png and " << a.out << "_overlay.png\n";
    return 0;
}

struct PlotArgs {
    std::string report, out;
};

int run_plot(const PlotArgs& a) {
    const MetricsReport rep = MetricsReport::from_json(read_file(a.report));
    std::string out = a.out;
    if (out.empty()) {
        const fs::path parent = fs::path(a.report).parent_path();
        out = parent.empty() ? "." : parent.string();
    }
    fs::create_directories(out);
    plot_class_bars(rep, out + "/class_iou.png");
    plot_scale_scatter(rep, out + "/scale_iou.png");
    std::cout << "wrote " << out << "/class_iou.png and " << out << "/scale_iou.png\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-mining few-shot segmentation"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic shapes corpus");
    gen_cmd->add_option("--config", gen.config, "config file");
    gen_cmd->add_option("--out", gen.out, "dataset root (default from config)");
    gen_cmd->add_option("--images", gen.images, "number of images");
    gen_cmd->add_option("--size", gen.size, "image side length");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--set", gen.sets, "override section.key=value")->take_all();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "meta-train on the fold's training classes");
    train_cmd->add_option("--config", train.config, "config file");
    train_cmd->add_option("--out", train.out, "run directory");
    train_cmd->add_option("--fold", train.fold, "fold id");
    train_cmd->add_option("--seed", train.seed, "training seed");
    train_cmd->add_option("--set", train.sets, "override section.key=value")->take_all();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "fixed-pair evaluation on the test classes");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained checkpoint")->required();
    eval_cmd->add_option("--out", eval.out, "run directory");
    eval_cmd->add_option("--data-root", eval.data_root, "override dataset root");
    eval_cmd->add_option("--k", eval.k, "support shots");
    eval_cmd->add_option("--pairs", eval.pairs, "number of support-query pairs");
    eval_cmd->add_option("--fold", eval.fold, "fold id (must match the checkpoint)");
    eval_cmd->add_option("--seed", eval.seed, "pair-sampling seed");

    PredictArgs pred;
    auto* pred_cmd = app.add_subcommand("predict", "segment one episode and write mask + overlay");
    pred_cmd->add_option("--checkpoint", pred.checkpoint, "trained checkpoint")->required();
    pred_cmd->add_option("--class", pred.cls, "target class name or id")->required();
    pred_cmd->add_option("--query", pred.query, "query image id");
    pred_cmd->add_option("--support", pred.supports, "support image ids")->take_all();
    pred_cmd->add_option("--seed", pred.seed, "episode-sampling seed");
    pred_cmd->add_option("--data-root", pred.data_root, "override dataset root");
    pred_cmd->add_option("--out", pred.out, "output path prefix");

    PlotArgs plot;
    auto* plot_cmd = app.add_subcommand("plot", "render charts from an eval report");
    plot_cmd->add_option("--report", plot.report, "report.json from eval")->required();
    plot_cmd->add_option("--out", plot.out, "output directory (default: beside the report)");

    try {
        app.parse(argc, argv);
        gen.has_images = gen_cmd->count("--images") > 0;
        gen.has_size = gen_cmd->count("--size") > 0;
        gen.has_seed = gen_cmd->count("--seed") > 0;
        train.has_fold = train_cmd->count("--fold") > 0;
        train.has_seed = train_cmd->count("--seed") > 0;
        eval.has_k = eval_cmd->count("--k") > 0;
        eval.has_pairs = eval_cmd->count("--pairs") > 0;
        eval.has_fold = eval_cmd->count("--fold") > 0;
        eval.has_seed = eval_cmd->count("--seed") > 0;

        if (gen_cmd->parsed()) return run_gen(gen);
        if (train_cmd->parsed()) return run_train(train);
        if (eval_cmd->parsed()) return run_eval(eval);
        if (pred_cmd->parsed()) return run_predict(pred);
        if (plot_cmd->parsed()) return run_plot(plot);
        throw SpecError("no command given");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
