#include "dmnet/train.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "dmnet/error.hpp"
#include "dmnet/kms.hpp"
#include "dmnet/nn.hpp"
#include "dmnet/ops.hpp"

namespace dmnet {

TrainStats train_model(Model& model, const EpisodeIndex& index, const TrainLogger& logger) {
    const Config& cfg = model.config();
    if (cfg.train.batch <= 0) throw SpecError("train.batch must be positive");
    const int iters_per_epoch = cfg.train.episodes_per_epoch / cfg.train.batch;
    if (iters_per_epoch <= 0)
        throw SpecError("train.episodes_per_epoch must be at least train.batch");
    const int max_iter = cfg.train.epochs * iters_per_epoch;
    const double lambda_warm = cfg.model.use_kms ? cfg.kms.lambda_warm : 0.0;

    nn::SgdConfig sgd_cfg;
    sgd_cfg.lr = cfg.train.lr;
    sgd_cfg.momentum = cfg.train.momentum;
    sgd_cfg.weight_decay = cfg.train.weight_decay;
    sgd_cfg.poly_power = cfg.train.poly_power;
    sgd_cfg.max_iter = max_iter;
    nn::Sgd opt(model.params().tensors(), sgd_cfg);

    Rng rng(derive_seed(static_cast<std::uint64_t>(cfg.train.seed), 0xba7c));

    TrainStats stats;
    stats.backbone_hash_before = model.backbone().weight_hash();

    for (int iter = 0; iter < max_iter; ++iter) {
        model.params().zero_grad();

        std::vector<Tensor> losses;
        losses.reserve(cfg.train.batch);
        for (int b = 0; b < cfg.train.batch; ++b) {
            const Episode ep = index.sample_episode(1, rng, cfg.data.image_size);
            losses.push_back(model.forward_episode(ep, Mode::train).loss);
        }
        const Tensor loss = ops::scale(ops::add_n(losses), 1.0 / cfg.train.batch);
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value))
            throw NumericalError("training diverged: loss " + std::to_string(loss_value) +
                                 " at iteration " + std::to_string(iter) + " (epoch " +
                                 std::to_string(iter / iters_per_epoch) + ")");

        loss.backward();
        if (warmup_gate(iter, iters_per_epoch, lambda_warm))
            opt.step(iter);
        else
            ++stats.skipped_by_warmup;

        stats.final_loss = loss_value;
        ++stats.iterations;
        if (logger) logger(iter, loss_value, opt.lr_at(iter));
    }

    stats.backbone_hash_after = model.backbone().weight_hash();
    if (stats.backbone_hash_after != stats.backbone_hash_before)
        throw NumericalError("frozen backbone weights changed during training");
    return stats;
}

}  // namespace dmnet
