#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "lgcm/analysis.hpp"
#include "lgcm/flops.hpp"
#include "lgcm/metrics.hpp"
#include "lgcm/model.hpp"
#include "lgcm/runconfig.hpp"
#include "lgcm/trainer.hpp"

namespace fs = std::filesystem;
using namespace lgcm;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

std::vector<TrainingExample> load_split(const std::string& path, const Vocabulary& vocab,
                                        int n_max) {
    if (path.empty()) throw ConfigError("config: missing data path for the requested split");
    auto raw = load_jsonl(path);
    return make_examples(encode_dialogs(raw, vocab), n_max);
}

void check_vocab_matches(const Checkpoint& ckpt, const Vocabulary& vocab) {
    if (!ckpt.vocab_tokens.empty() && ckpt.vocab_tokens != vocab.tokens())
        throw ConfigError("checkpoint was trained with a different vocabulary file");
}

std::vector<std::string> ids_to_words(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (int id : ids) {
        if (id == kBosId || id == kEosId || id == kPadId) continue;
        out.push_back(vocab.token(id));
    }
    return out;
}

int cmd_build_vocab(const std::string& data_path, int min_freq, const std::string& out_path) {
    auto raw = load_jsonl(data_path);
    Vocabulary vocab = Vocabulary::build(raw, min_freq);
    vocab.save(out_path);
    std::cout << "vocabulary size " << vocab.size() << " written to " << out_path << "\n";
    return 0;
}

int cmd_train(const std::string& config_path) {
    RunConfig cfg = RunConfig::parse_file(config_path);
    std::cout << "train (seed " << cfg.seed << ")\n";
    Vocabulary vocab = Vocabulary::load(cfg.vocab_path);
    cfg.model.vocab = vocab.size();
    auto train_set = load_split(cfg.train_path, vocab, cfg.model.n_max);
    auto valid_set = load_split(cfg.valid_path, vocab, cfg.model.n_max);

    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "config.resolved", cfg.resolved_text());

    Model model = Model::init(cfg.model);
    std::cout << "model " << variant_to_string(cfg.model.variant) << ", "
              << model.param_count() << " parameters, " << train_set.size()
              << " train examples\n";
    TrainResult result = train(model, train_set, valid_set, cfg.train, vocab.tokens(),
                               &std::cout);

    save_checkpoint(result.best, (fs::path(cfg.out_dir) / "checkpoint_best.ckpt").string());
    write_file(fs::path(cfg.out_dir) / "metrics_log.csv", metric_log_csv(result.log));
    std::cout << "best validation ppl " << result.best_valid_ppl << " at step "
              << result.best_step << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& split, bool copy_reference, bool sentence_bleu) {
    RunConfig cfg = RunConfig::parse_file(config_path);
    std::cout << "eval " << split << " (seed " << cfg.seed << ")\n";
    Vocabulary vocab = Vocabulary::load(cfg.vocab_path);
    cfg.model.vocab = vocab.size();

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    check_config_compatible(cfg.model, ckpt.config);
    check_vocab_matches(ckpt, vocab);
    Model model = model_from_checkpoint(ckpt);

    const std::string path = split == "train"   ? cfg.train_path
                             : split == "valid" ? cfg.valid_path
                             : split == "test"  ? cfg.test_path
                                                : "";
    if (path.empty()) throw ConfigError("eval: unknown split '" + split + "'");
    auto examples = load_split(path, vocab, cfg.model.n_max);

    const double ppl = evaluate_ppl(model, examples, cfg.train.batch_size);
    std::vector<EvalPair> pairs;
    for (const auto& ex : examples) {
        EvalPair pair;
        pair.reference = ids_to_words(ex.response.tokens, vocab);
        if (copy_reference) {
            pair.hypothesis = pair.reference;
        } else {
            auto ids = model.greedy_generate(ex.context, ex.response_role(), cfg.max_new_tokens);
            pair.hypothesis = ids_to_words(ids, vocab);
        }
        pairs.push_back(std::move(pair));
    }
    MetricReport report = score_corpus(pairs, ppl);
    std::cout << metric_report_text(report);
    if (sentence_bleu)
        std::cout << "bleu4_sentence_smoothed " << bleu4_sentence_smoothed(pairs)
                  << " (diagnostic)\n";

    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "config.resolved", cfg.resolved_text());
    write_file(fs::path(cfg.out_dir) / ("eval_" + split + ".csv"), metric_report_csv(report));
    return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& context_path,
                 int max_new_tokens) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = model_from_checkpoint(ckpt);
    Vocabulary vocab = Vocabulary::from_tokens(ckpt.vocab_tokens);

    auto raw = load_jsonl(context_path);
    if (raw.empty() || raw[0].utterances.empty())
        throw DataError("generate: context file has no dialog turns");
    auto dialogs = encode_dialogs({raw[0]}, vocab);
    const auto& utts = dialogs[0].utterances;
    const int n_max = model.config().n_max;
    const std::size_t take = std::min<std::size_t>(utts.size(), n_max);
    std::vector<Utterance> context(utts.end() - take, utts.end());
    const Role resp_role = other_role(context.back().speaker);

    const int cap = max_new_tokens > 0 ? max_new_tokens : model.config().l_utt_max - 1;
    auto ids = model.greedy_generate(context, resp_role, cap);
    std::cout << detokenize(ids_to_words(ids, vocab)) << "\n";
    return 0;
}

int cmd_inspect(const std::string& config_path, const std::string& ckpt_path,
                const std::string& split, const std::string& out_dir) {
    RunConfig cfg = RunConfig::parse_file(config_path);
    std::cout << "inspect " << split << " (seed " << cfg.seed << ")\n";
    Vocabulary vocab = Vocabulary::load(cfg.vocab_path);
    cfg.model.vocab = vocab.size();
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    check_config_compatible(cfg.model, ckpt.config);
    check_vocab_matches(ckpt, vocab);
    Model model = model_from_checkpoint(ckpt);

    const std::string path = split == "train"   ? cfg.train_path
                             : split == "valid" ? cfg.valid_path
                             : split == "test"  ? cfg.test_path
                                                : "";
    if (path.empty()) throw ConfigError("inspect: unknown split '" + split + "'");
    auto examples = load_split(path, vocab, cfg.model.n_max);

    const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
    fs::create_directories(dir);
    write_file(fs::path(dir) / "config.resolved", cfg.resolved_text());

    auto groups = build_heatmaps(model, examples, split);
    for (const auto& [n, rep] : groups) {
        const std::string suffix = "_n" + std::to_string(n);
        write_file(fs::path(dir) / ("attention" + suffix + ".csv"), attention_csv(rep));
        if (rep.has_gate) write_file(fs::path(dir) / ("gate" + suffix + ".csv"), gate_csv(rep));
        write_file(fs::path(dir) / ("heatmap" + suffix + ".txt"), ascii_heatmaps(rep));
        std::cout << "context size " << n << ": " << rep.examples << " examples\n";
    }
    return 0;
}

int cmd_flops(const std::string& config_path, int L, int N, bool full,
              const std::string& csv_path) {
    RunConfig cfg = RunConfig::parse_file(config_path);
    cfg.model.vocab = kNumSpecials; // irrelevant to the counts
    FlopReport report = count_flops(cfg.model, L, N);
    if (full) {
        FullFlopReport fr = count_flops_full(cfg.model, L, N);
        std::cout << flop_table(report, &fr);
    } else {
        std::cout << flop_table(report);
    }
    if (!csv_path.empty()) write_file(csv_path, flop_csv(report));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical local-global dialogue model"};
    app.require_subcommand(1);

    std::string data_path, out_path, config_path, ckpt_path, context_path, split = "test";
    std::string inspect_out;
    int min_freq = 2, max_new = 0, flop_l = 128, flop_n = 4;
    bool copy_reference = false, full_flops = false, sentence_bleu = false;
    std::string flop_csv_path;

    auto* sub_vocab = app.add_subcommand("build-vocab", "build a vocabulary from a JSONL corpus");
    sub_vocab->add_option("--data", data_path, "JSONL corpus")->required();
    sub_vocab->add_option("--min-freq", min_freq, "minimum token frequency");
    sub_vocab->add_option("--out", out_path, "output vocabulary file")->required();

    auto* sub_train = app.add_subcommand("train", "train a model from a run config");
    sub_train->add_option("--config", config_path, "run config file")->required();

    auto* sub_eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    sub_eval->add_option("--config", config_path, "run config file")->required();
    sub_eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    sub_eval->add_option("--split", split, "train|valid|test");
    sub_eval->add_flag("--copy-reference", copy_reference,
                       "score references against themselves (debug)");
    sub_eval->add_flag("--sentence-bleu", sentence_bleu,
                       "also print smoothed sentence-level BLEU");

    auto* sub_gen = app.add_subcommand("generate", "greedy response for a JSONL context");
    sub_gen->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    sub_gen->add_option("--context-file", context_path, "JSONL file with one dialog")->required();
    sub_gen->add_option("--max-new-tokens", max_new, "generation cap");

    auto* sub_inspect = app.add_subcommand("inspect", "export attention/gate heatmaps");
    sub_inspect->add_option("--config", config_path, "run config file")->required();
    sub_inspect->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    sub_inspect->add_option("--split", split, "train|valid|test");
    sub_inspect->add_option("--out", inspect_out, "output directory (default: config output dir)");

    auto* sub_flops = app.add_subcommand("flops", "encoder FLOP accounting table");
    sub_flops->add_option("--config", config_path, "run config file")->required();
    sub_flops->add_option("--L", flop_l, "total input length");
    sub_flops->add_option("--N", flop_n, "number of equal-length utterances");
    sub_flops->add_flag("--full", full_flops, "also print the full accounting");
    sub_flops->add_option("--csv", flop_csv_path, "write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors exit 1; --help exits 0
    }

    try {
        if (sub_vocab->parsed()) return cmd_build_vocab(data_path, min_freq, out_path);
        if (sub_train->parsed()) return cmd_train(config_path);
        if (sub_eval->parsed())
            return cmd_eval(config_path, ckpt_path, split, copy_reference, sentence_bleu);
        if (sub_gen->parsed()) return cmd_generate(ckpt_path, context_path, max_new);
        if (sub_inspect->parsed())
            return cmd_inspect(config_path, ckpt_path, split, inspect_out);
        if (sub_flops->parsed())
            return cmd_flops(config_path, flop_l, flop_n, full_flops, flop_csv_path);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
