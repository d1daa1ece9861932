#include "lgcm/runconfig.hpp"

#include <fstream>
#include <sstream>

namespace lgcm {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" + value + "'");
    }
}

} // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

RunConfig RunConfig::parse_string(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "data" && section != "model" && section != "train" &&
                section != "generate" && section != "output" && section != "run")
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError(where + ": key outside any section");

        if (section == "data") {
            if (key == "train") cfg.train_path = value;
            else if (key == "valid") cfg.valid_path = value;
            else if (key == "test") cfg.test_path = value;
            else if (key == "vocab") cfg.vocab_path = value;
            else if (key == "min_freq") cfg.min_freq = to_int(key, value);
            else throw ConfigError(where + ": unknown key '" + key + "' in [data]");
        } else if (section == "model") {
            if (key == "d") cfg.model.d = to_int(key, value);
            else if (key == "heads") cfg.model.heads = to_int(key, value);
            else if (key == "n_local") cfg.model.n_local = to_int(key, value);
            else if (key == "n_global") cfg.model.n_global = to_int(key, value);
            else if (key == "n_dec") cfg.model.n_dec = to_int(key, value);
            else if (key == "n_max") cfg.model.n_max = to_int(key, value);
            else if (key == "l_utt_max") cfg.model.l_utt_max = to_int(key, value);
            else if (key == "variant") cfg.model.variant = variant_from_string(value);
            else if (key == "dropout") cfg.model.dropout = to_double(key, value);
            else if (key == "scale_embeddings")
                cfg.model.scale_embeddings = to_int(key, value) != 0;
            else throw ConfigError(where + ": unknown key '" + key + "' in [model]");
        } else if (section == "train") {
            if (key == "lr") cfg.train.lr = to_double(key, value);
            else if (key == "batch_size") cfg.train.batch_size = to_int(key, value);
            else if (key == "max_steps") cfg.train.max_steps = to_int(key, value);
            else if (key == "eval_interval") cfg.train.eval_interval = to_int(key, value);
            else if (key == "clip_norm") cfg.train.clip_norm = to_double(key, value);
            else if (key == "weight_decay") cfg.train.weight_decay = to_double(key, value);
            else if (key == "beta1") cfg.train.beta1 = to_double(key, value);
            else if (key == "beta2") cfg.train.beta2 = to_double(key, value);
            else if (key == "eps") cfg.train.eps = to_double(key, value);
            else if (key == "warmup_steps") cfg.train.warmup_steps = to_int(key, value);
            else throw ConfigError(where + ": unknown key '" + key + "' in [train]");
        } else if (section == "generate") {
            if (key == "max_new_tokens") cfg.max_new_tokens = to_int(key, value);
            else throw ConfigError(where + ": unknown key '" + key + "' in [generate]");
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = value;
            else throw ConfigError(where + ": unknown key '" + key + "' in [output]");
        } else { // run
            if (key == "seed") cfg.seed = std::stoull(value);
            else throw ConfigError(where + ": unknown key '" + key + "' in [run]");
        }
    }
    cfg.model.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    return cfg;
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "[data]\n";
    out << "train = " << train_path << "\n";
    out << "valid = " << valid_path << "\n";
    out << "test = " << test_path << "\n";
    out << "vocab = " << vocab_path << "\n";
    out << "min_freq = " << min_freq << "\n\n";
    out << "[model]\n";
    out << "d = " << model.d << "\n";
    out << "heads = " << model.heads << "\n";
    out << "n_local = " << model.n_local << "\n";
    out << "n_global = " << model.n_global << "\n";
    out << "n_dec = " << model.n_dec << "\n";
    out << "n_max = " << model.n_max << "\n";
    out << "l_utt_max = " << model.l_utt_max << "\n";
    out << "variant = " << variant_to_string(model.variant) << "\n";
    out << "dropout = " << model.dropout << "\n";
    out << "scale_embeddings = " << (model.scale_embeddings ? 1 : 0) << "\n\n";
    out << "[train]\n";
    out << "lr = " << train.lr << "\n";
    out << "batch_size = " << train.batch_size << "\n";
    out << "max_steps = " << train.max_steps << "\n";
    out << "eval_interval = " << train.eval_interval << "\n";
    out << "clip_norm = " << train.clip_norm << "\n";
    out << "weight_decay = " << train.weight_decay << "\n";
    out << "beta1 = " << train.beta1 << "\n";
    out << "beta2 = " << train.beta2 << "\n";
    out << "eps = " << train.eps << "\n";
    out << "warmup_steps = " << train.warmup_steps << "\n\n";
    out << "[generate]\n";
    out << "max_new_tokens = " << max_new_tokens << "\n\n";
    out << "[output]\n";
    out << "dir = " << out_dir << "\n\n";
    out << "[run]\n";
    out << "seed = " << seed << "\n";
    return out.str();
}

} // namespace lgcm
