#pragma once

#include <map>
#include <string>
#include <vector>

#include "lgcm/model.hpp"

namespace lgcm {

/// Dataset-averaged utterance-to-utterance attention and gate proportions
/// for one context-size group. attention[layer][t * n + s] is the weight
/// utterance t spends on utterance s, averaged per the aggregation
/// a(t->s) = (1/|u_t|) sum_i sum_j alpha(t,s,i,j) and then over examples.
/// Gate entries are means over unpadded tokens and hidden dimensions;
/// global_share = 1 - mean(H) since H weighs the local operand.
struct HeatmapReport {
    std::string split;
    int context_size = 0;
    std::size_t examples = 0;
    std::size_t layers = 0;
    std::vector<std::vector<double>> attention;         // [layer][t * n + s]
    std::vector<std::vector<double>> gate_global_share; // [layer][t]
    std::vector<std::vector<double>> gate_local_share;  // [layer][t] = mean(H)
    bool has_gate = false;
};

/// Aggregates per context size; examples with different context sizes are
/// never averaged together.
std::map<int, HeatmapReport> build_heatmaps(const Model& model,
                                            const std::vector<TrainingExample>& dataset,
                                            const std::string& split);

/// Uniform-context-size convenience wrappers (mixed sizes are refused).
HeatmapReport attention_heatmap(const Model& model, const std::vector<TrainingExample>& dataset,
                                const std::string& split = "dataset");
HeatmapReport gate_heatmap(const Model& model, const std::vector<TrainingExample>& dataset,
                           const std::string& split = "dataset");

std::string attention_csv(const HeatmapReport& report);
std::string gate_csv(const HeatmapReport& report);
std::string ascii_heatmaps(const HeatmapReport& report);

} // namespace lgcm
