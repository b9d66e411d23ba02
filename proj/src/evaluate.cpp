#include "dmnet/evaluate.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dmnet/error.hpp"

namespace dmnet {

namespace {

double pct(double x) { return 100.0 * x; }

double iou_of(const IouCounts& c) {
    const std::int64_t denom = c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;  // both prediction and truth empty
    return static_cast<double>(c.tp) / static_cast<double>(denom);
}

double acc_of(const IouCounts& c) {
    const std::int64_t total = c.tp + c.fp + c.fn + c.tn;
    if (total == 0) return 1.0;
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << v;
    return out.str();
}

}  // namespace

IouCounts accumulate_iou(const std::vector<std::uint8_t>& pred,
                         const std::vector<std::uint8_t>& gt) {
    if (pred.size() != gt.size())
        throw ShapeError("accumulate_iou: prediction has " + std::to_string(pred.size()) +
                         " pixels, ground truth " + std::to_string(gt.size()));
    IouCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, g = gt[i] != 0;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

std::vector<std::uint8_t> binarize_fg(const std::vector<double>& fg_prob) {
    std::vector<std::uint8_t> out(fg_prob.size());
    for (size_t i = 0; i < fg_prob.size(); ++i) out[i] = fg_prob[i] > 0.5 ? 1 : 0;
    return out;
}

Predictor model_predictor(Model& model) {
    return [&model](const Episode& ep) {
        return model.forward_episode(ep, Mode::test).fg_prob_full;
    };
}

MetricsReport evaluate_fold(const Predictor& predictor, const EpisodeIndex& index, int n_pairs,
                            int k, std::uint64_t seed) {
    if (n_pairs <= 0) throw SpecError("evaluation needs a positive pair count");
    if (k < 1) throw SpecError("evaluation needs k >= 1");

    MetricsReport rep;
    rep.fold = index.fold().fold_id;
    rep.split = index.split() == Split::train ? "train" : "test";
    rep.k = k;
    rep.n_pairs = n_pairs;
    rep.seed = seed;

    for (int c : index.classes()) {
        if (static_cast<int>(index.images_of(c).size()) < k + 1)
            rep.warnings.push_back("class '" + index.fold().name_of(c) + "' has only " +
                                   std::to_string(index.images_of(c).size()) +
                                   " images (needs k+1 = " + std::to_string(k + 1) +
                                   "); excluded");
    }

    const std::vector<PairLine> pairs = make_pair_list(index, n_pairs, k, seed);

    std::map<int, IouCounts> by_class;
    std::map<int, int> pairs_of;
    IouCounts pooled;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const PairLine& p = pairs[i];
        IouCounts c;
        PairRecord rec;
        try {
            const Episode ep = index.make_episode(p.query_id, p.support_ids, p.class_id);
            const std::vector<double> fg_prob = predictor(ep);
            std::vector<std::uint8_t> gt(ep.query_mask.size());
            for (size_t j = 0; j < gt.size(); ++j) gt[j] = ep.query_mask[j] > 0.5 ? 1 : 0;
            c = accumulate_iou(binarize_fg(fg_prob), gt);
            rec.fg_fraction =
                static_cast<double>(c.tp + c.fn) / static_cast<double>(ep.query_mask.size());
        } catch (const Error& e) {
            rep.warnings.push_back("pair " + std::to_string(i) + " (query " + p.query_id +
                                   ", class '" + index.fold().name_of(p.class_id) +
                                   "') skipped: " + e.what());
            continue;
        }
        const IouCounts& acc = by_class[p.class_id];
        by_class[p.class_id] = {acc.tp + c.tp, acc.fp + c.fp, acc.fn + c.fn, acc.tn + c.tn};
        pairs_of[p.class_id] += 1;
        pooled = {pooled.tp + c.tp, pooled.fp + c.fp, pooled.fn + c.fn, pooled.tn + c.tn};
        rec.class_id = p.class_id;
        rec.query_id = p.query_id;
        rec.iou = pct(iou_of(c));
        rep.pairs.push_back(std::move(rec));
        ++rep.n_evaluated;
    }

    double iou_sum = 0.0, acc_sum = 0.0;
    for (const auto& [class_id, counts] : by_class) {
        ClassMetric cm;
        cm.class_id = class_id;
        cm.name = index.fold().name_of(class_id);
        cm.iou = pct(iou_of(counts));
        cm.acc = pct(acc_of(counts));
        cm.n_pairs = pairs_of[class_id];
        iou_sum += cm.iou;
        acc_sum += cm.acc;
        rep.classes.push_back(std::move(cm));
    }
    if (!rep.classes.empty()) {
        rep.miou = iou_sum / rep.classes.size();
        rep.macc = acc_sum / rep.classes.size();
    }
    const IouCounts bg{pooled.tn, pooled.fn, pooled.fp, pooled.tp};
    rep.fb_iou = pct(0.5 * (iou_of(pooled) + iou_of(bg)));
    return rep;
}

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    out << "fold = " << fold << "\n";
    out << "split = " << split << "\n";
    out << "k = " << k << "\n";
    out << "n_pairs = " << n_pairs << "\n";
    out << "n_evaluated = " << n_evaluated << "\n";
    out << "seed = " << seed << "\n";
    out << "miou = " << fmt(miou) << "\n";
    out << "fb_iou = " << fmt(fb_iou) << "\n";
    out << "macc = " << fmt(macc) << "\n";
    for (const auto& c : classes) {
        out << "iou." << c.name << " = " << fmt(c.iou) << "\n";
        out << "acc." << c.name << " = " << fmt(c.acc) << "\n";
        out << "pairs." << c.name << " = " << c.n_pairs << "\n";
    }
    for (const auto& w : warnings) out << "warning = " << w << "\n";
    return out.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["fold"] = fold;
    j["split"] = split;
    j["k"] = k;
    j["n_pairs"] = n_pairs;
    j["n_evaluated"] = n_evaluated;
    j["seed"] = seed;
    j["miou"] = miou;
    j["fb_iou"] = fb_iou;
    j["macc"] = macc;
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : classes)
        j["classes"].push_back({{"id", c.class_id},
                                {"name", c.name},
                                {"iou", c.iou},
                                {"acc", c.acc},
                                {"n_pairs", c.n_pairs}});
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : pairs)
        j["pairs"].push_back({{"class_id", p.class_id},
                              {"query_id", p.query_id},
                              {"iou", p.iou},
                              {"fg_fraction", p.fg_fraction}});
    j["warnings"] = warnings;
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad report json: ") + e.what());
    }
    MetricsReport rep;
    try {
        rep.fold = j.at("fold").get<int>();
        rep.split = j.at("split").get<std::string>();
        rep.k = j.at("k").get<int>();
        rep.n_pairs = j.at("n_pairs").get<int>();
        rep.n_evaluated = j.at("n_evaluated").get<int>();
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.miou = j.at("miou").get<double>();
        rep.fb_iou = j.at("fb_iou").get<double>();
        rep.macc = j.at("macc").get<double>();
        for (const auto& c : j.at("classes")) {
            ClassMetric cm;
            cm.class_id = c.at("id").get<int>();
            cm.name = c.at("name").get<std::string>();
            cm.iou = c.at("iou").get<double>();
            cm.acc = c.at("acc").get<double>();
            cm.n_pairs = c.at("n_pairs").get<int>();
            rep.classes.push_back(std::move(cm));
        }
        for (const auto& p : j.at("pairs")) {
            PairRecord pr;
            pr.class_id = p.at("class_id").get<int>();
            pr.query_id = p.at("query_id").get<std::string>();
            pr.iou = p.at("iou").get<double>();
            pr.fg_fraction = p.at("fg_fraction").get<double>();
            rep.pairs.push_back(std::move(pr));
        }
        rep.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report json missing fields: ") + e.what());
    }
    return rep;
}

}  // namespace dmnet
