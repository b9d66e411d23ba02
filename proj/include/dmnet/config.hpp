#pragma once

#include <string>

namespace dmnet {

// All hyperparameters, one struct per config-file section. Defaults are the
// published operating point; anything can be overridden from file.
struct DataConfig {
    std::string root = "data/shapes";
    std::string fold_file = "configs/synthetic_folds.cfg";
    int fold = 0;
    int image_size = 64;
    int n_images = 400;       // synthetic generator corpus size
    int classes = 8;          // synthetic shape classes (ids 1..classes)
    int shapes_min = 2;       // shapes per generated image
    int shapes_max = 3;
    double scale_min = 0.5;   // per-instance size jitter factors
    double scale_max = 2.0;
    int seed = 0;             // generator seed
};

struct ModelConfig {
    std::string backbone = "tiny";  // tiny | vgg16
    std::string weights;            // weights file for the deep backbone
    int reduce_dim = 32;            // mid-level channel count C
    int high_dim = 64;              // high-level channel count C_H
    int stride = 8;
    int backbone_seed = 1234;       // tiny encoder frozen-init seed
    bool use_cprm = true;
    bool use_csrm = true;
    bool use_kms = true;
};

struct CprmConfig {
    int rank = 64;             // low-rank size of the channel-mining scale matrix
    double lambda_fuse = 0.5;  // fixed fusion weight
};

struct CsrmConfig {
    double mu1 = 0.7;       // foreground confidence threshold
    double mu2 = 0.6;       // background confidence threshold
    double step_mu1 = 0.05; // per-iteration threshold decrements
    double step_mu2 = 0.02;
    int cpm_iters = 3;
    double gamma1 = 0.9;    // refined-prototype merge weight
    double gamma2 = 0.1;    // filtered-prototype merge weight
    double tau = 10.0;      // cosine-score temperature
};

struct KmsConfig {
    double rho = 0.5;          // EMA momentum of the prototype memory
    double lambda_warm = 0.8;  // warm-up fraction of iters_per_epoch
};

struct TrainConfig {
    double lr = 0.005;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double poly_power = 0.9;
    int epochs = 4;
    int episodes_per_epoch = 200;
    int batch = 8;          // episodes per optimizer step
    double eta = 1.0;       // auxiliary loss weight
    int seed = 0;
};

struct EvalConfig {
    int k = 1;
    int n_pairs = 1000;
    int seed = 0;
};

struct Config {
    DataConfig data;
    ModelConfig model;
    CprmConfig cprm;
    CsrmConfig csrm;
    KmsConfig kms;
    TrainConfig train;
    EvalConfig eval;

    // Canonical key=value rendering; consumed by manifests and checkpoints.
    std::string to_string() const;
};

// Parses `[section]` / `key = value` text. Unknown sections or keys are hard
// errors that list the valid alternatives.
Config parse_config_text(const std::string& text, Config base = {});
Config load_config(const std::string& path, Config base = {});

}  // namespace dmnet
