#include "lgcm/analysis.hpp"

#include <cmath>
#include <sstream>

namespace lgcm {

namespace {

struct GroupAccumulator {
    std::size_t examples = 0;
    std::vector<std::vector<double>> attention;
    std::vector<std::vector<double>> gate;
    bool has_gate = false;
};

} // namespace

std::map<int, HeatmapReport> build_heatmaps(const Model& model,
                                            const std::vector<TrainingExample>& dataset,
                                            const std::string& split) {
    if (dataset.empty()) throw DataError("heatmaps: empty dataset");
    if (model.config().variant == Variant::FLAT_TRANSFORMER)
        throw DataError("heatmaps: the flat baseline has no global encoder to inspect");
    const std::size_t layers = model.global_layers().size();
    if (layers == 0) throw DataError("heatmaps: model has no global layers");

    std::map<int, GroupAccumulator> groups;
    for (const auto& ex : dataset) {
        Batch batch = collate({ex}, model.config().l_utt_max);
        GlobalTrace trace;
        model.encode(batch, 0, &trace);
        const int n = batch.ctx_counts[0];
        auto& acc = groups[n];
        if (acc.attention.empty()) {
            acc.attention.assign(layers, std::vector<double>(n * n, 0.0));
            acc.gate.assign(layers, std::vector<double>(n, 0.0));
        }
        ++acc.examples;
        for (std::size_t l = 0; l < layers; ++l) {
            const auto& lt = trace.layers[l];
            std::size_t key_total = 0;
            for (std::size_t s = 0; s < lt.key_len.size(); ++s) key_total += lt.key_len[s];
            for (int t = 0; t < n; ++t) {
                const std::size_t real_q = batch.ctx_len(0, t);
                for (int s = 0; s < n; ++s) {
                    const std::size_t real_k = batch.ctx_len(0, s);
                    double sum = 0.0;
                    for (std::size_t i = 0; i < real_q; ++i)
                        for (std::size_t j = 0; j < real_k; ++j)
                            sum += lt.alpha[t][i * key_total + lt.key_offset[s] + j];
                    acc.attention[l][t * n + s] += sum / static_cast<double>(real_q);
                }
            }
            if (!lt.gate.empty()) {
                acc.has_gate = true;
                const std::size_t d = model.config().d;
                for (int t = 0; t < n; ++t) {
                    const std::size_t real_q = batch.ctx_len(0, t);
                    double sum = 0.0;
                    for (std::size_t i = 0; i < real_q; ++i)
                        for (std::size_t j = 0; j < d; ++j) sum += lt.gate[t][i * d + j];
                    acc.gate[l][t] += sum / static_cast<double>(real_q * d);
                }
            }
        }
    }

    std::map<int, HeatmapReport> out;
    for (auto& [n, acc] : groups) {
        HeatmapReport rep;
        rep.split = split;
        rep.context_size = n;
        rep.examples = acc.examples;
        rep.layers = layers;
        rep.has_gate = acc.has_gate;
        rep.attention.assign(layers, {});
        rep.gate_global_share.assign(layers, {});
        rep.gate_local_share.assign(layers, {});
        const double inv = 1.0 / static_cast<double>(acc.examples);
        for (std::size_t l = 0; l < layers; ++l) {
            rep.attention[l].resize(n * n);
            for (int k = 0; k < n * n; ++k) rep.attention[l][k] = acc.attention[l][k] * inv;
            if (acc.has_gate) {
                rep.gate_local_share[l].resize(n);
                rep.gate_global_share[l].resize(n);
                for (int t = 0; t < n; ++t) {
                    const double mean_h = acc.gate[l][t] * inv;
                    rep.gate_local_share[l][t] = mean_h;
                    rep.gate_global_share[l][t] = 1.0 - mean_h;
                }
            }
        }
        out.emplace(n, std::move(rep));
    }
    return out;
}

namespace {

HeatmapReport single_group(const Model& model, const std::vector<TrainingExample>& dataset,
                           const std::string& split) {
    auto groups = build_heatmaps(model, dataset, split);
    if (groups.size() != 1) {
        std::string sizes;
        for (const auto& [n, rep] : groups) sizes += (sizes.empty() ? "" : ", ") + std::to_string(n);
        throw DataError("heatmaps: refusing to average over mixed context sizes {" + sizes +
                        "}; group the dataset by context size");
    }
    return groups.begin()->second;
}

} // namespace

HeatmapReport attention_heatmap(const Model& model, const std::vector<TrainingExample>& dataset,
                                const std::string& split) {
    return single_group(model, dataset, split);
}

HeatmapReport gate_heatmap(const Model& model, const std::vector<TrainingExample>& dataset,
                           const std::string& split) {
    HeatmapReport rep = single_group(model, dataset, split);
    if (!rep.has_gate)
        throw DataError("gate_heatmap: this variant's global layers have no gate");
    return rep;
}

std::string attention_csv(const HeatmapReport& rep) {
    std::ostringstream out;
    out.precision(17);
    const int n = rep.context_size;
    for (std::size_t l = 0; l < rep.layers; ++l) {
        out << "# attention split=" << rep.split << " context_size=" << n
            << " examples=" << rep.examples << " layer=" << (l + 1) << "\n";
        out << "t";
        for (int s = 1; s <= n; ++s) out << ",s" << s;
        out << "\n";
        for (int t = 0; t < n; ++t) {
            out << (t + 1);
            for (int s = 0; s < n; ++s) out << ',' << rep.attention[l][t * n + s];
            out << "\n";
        }
    }
    return out.str();
}

std::string gate_csv(const HeatmapReport& rep) {
    std::ostringstream out;
    out.precision(17);
    const int n = rep.context_size;
    out << "# gate split=" << rep.split << " context_size=" << n
        << " examples=" << rep.examples << "\n";
    out << "# global_share = 1 - mean(H); local_share = mean(H)\n";
    out << "metric,layer";
    for (int t = 1; t <= n; ++t) out << ",t" << t;
    out << "\n";
    for (std::size_t l = 0; l < rep.layers; ++l) {
        out << "global_share," << (l + 1);
        for (int t = 0; t < n; ++t) out << ',' << rep.gate_global_share[l][t];
        out << "\n";
    }
    for (std::size_t l = 0; l < rep.layers; ++l) {
        out << "local_share," << (l + 1);
        for (int t = 0; t < n; ++t) out << ',' << rep.gate_local_share[l][t];
        out << "\n";
    }
    return out.str();
}

namespace {

char shade(double v) {
    static const char* ramp = " .:-=+*#%@";
    int idx = static_cast<int>(v * 10.0);
    if (idx < 0) idx = 0;
    if (idx > 9) idx = 9;
    return ramp[idx];
}

} // namespace

std::string ascii_heatmaps(const HeatmapReport& rep) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    const int n = rep.context_size;
    for (std::size_t l = 0; l < rep.layers; ++l) {
        out << "attention layer " << (l + 1) << " (split " << rep.split << ", context size " << n
            << ", " << rep.examples << " examples)\n";
        for (int t = 0; t < n; ++t) {
            out << "  t" << (t + 1) << " |";
            for (int s = 0; s < n; ++s) out << ' ' << shade(rep.attention[l][t * n + s]);
            out << " |";
            for (int s = 0; s < n; ++s) out << ' ' << rep.attention[l][t * n + s];
            out << "\n";
        }
    }
    if (rep.has_gate) {
        out << "gate global share (1 - mean(H))\n";
        for (std::size_t l = 0; l < rep.layers; ++l) {
            out << "  layer " << (l + 1) << " |";
            for (int t = 0; t < n; ++t) out << ' ' << shade(rep.gate_global_share[l][t]);
            out << " |";
            for (int t = 0; t < n; ++t) out << ' ' << rep.gate_global_share[l][t];
            out << "\n";
        }
    }
    return out.str();
}

} // namespace lgcm
