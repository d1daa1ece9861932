#pragma once

#include <string>

#include "lgcm/model.hpp"
#include "lgcm/trainer.hpp"

namespace lgcm {

/// Run configuration file: INI-style sections of key = value lines with
/// '#' comments. Unknown sections or keys are errors. Every command that
/// produces outputs writes the fully resolved form next to them.
struct RunConfig {
    // [data]
    std::string train_path;
    std::string valid_path;
    std::string test_path;
    std::string vocab_path;
    int min_freq = 2;

    // [model] — vocab size is filled in when the vocabulary is loaded
    LGCMConfig model;

    // [train]
    TrainConfig train;

    // [generate]
    int max_new_tokens = 24;

    // [output]
    std::string out_dir = "out";

    // [run]
    std::uint64_t seed = 0;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_string(const std::string& text, const std::string& origin);

    /// Serialized form with every value spelled out.
    std::string resolved_text() const;
};

} // namespace lgcm
