#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fmim/checkpoint.hpp"
#include "fmim/data.hpp"
#include "fmim/eval.hpp"
#include "fmim/train.hpp"

namespace fs = std::filesystem;
using namespace fmim;

namespace {

struct TrainArgs {
    RunConfig run;
    std::string task = "ABSA";
    std::string config_path;  // consumed before parsing; kept for --help
};

void add_run_options(CLI::App* cmd, TrainArgs& args) {
    cmd->add_option("--task", args.task, "Task: ABSA, ATE or NER")
        ->check(CLI::IsMember({"ABSA", "ATE", "NER", "absa", "ate", "ner"}));
    cmd->add_option("--source-train", args.run.source_train_path, "Labeled source training TSV")
        ->required();
    cmd->add_option("--target-unlabeled", args.run.target_unlabeled_path,
                    "Unlabeled target TSV (one token per line)")
        ->required();
    cmd->add_option("--target-test", args.run.target_test_path, "Labeled target test TSV");
    cmd->add_option("--out-dir", args.run.out_dir, "Output directory")->required();

    cmd->add_option("--embed-dim", args.run.tagger.embed_dim, "Token embedding width");
    cmd->add_option("--context-window", args.run.tagger.context_window,
                    "Context radius around each token");
    cmd->add_option("--hidden-dim", args.run.tagger.hidden_dim, "MLP hidden size");
    cmd->add_option("--max-len", args.run.tagger.max_len, "Token cap per sentence");

    cmd->add_option("--lr", args.run.optim.lr, "Fixed learning rate");
    cmd->add_option("--beta1", args.run.optim.beta1, "AdamW beta1");
    cmd->add_option("--beta2", args.run.optim.beta2, "AdamW beta2");
    cmd->add_option("--adam-eps", args.run.optim.eps, "AdamW epsilon");
    cmd->add_option("--weight-decay", args.run.optim.weight_decay, "Decoupled weight decay");

    cmd->add_option("--alpha", args.run.mi.alpha, "MI loss weight");
    cmd->add_option("--rho", args.run.mi.rho, "Marginal-entropy threshold (nats)");
    cmd->add_option("--mi-epsilon", args.run.mi.epsilon, "Log-clamp floor");

    cmd->add_option("--batch-size", args.run.batch_size, "Sentences per source mini-batch");
    cmd->add_option("--epochs", args.run.epochs, "Training epochs (default 20, NER 3)");
    cmd->add_option("--min-count", args.run.min_count, "Vocabulary frequency cutoff");
    cmd->add_option("--seed", args.run.seed, "Master seed for all RNG streams");
    cmd->add_option("--config", args.config_path,
                    "Flat key=value config file; explicit flags override it");
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

// Expands every `--config path` in the argument list into `--key value` token
// pairs read from the file. Keys the user already passed as flags are skipped,
// so explicit flags always win.
std::vector<std::string> expand_config_args(const std::vector<std::string>& in) {
    std::vector<std::string> args = in;
    std::vector<std::string> explicit_flags;
    for (const std::string& a : args)
        if (a.rfind("--", 0) == 0 && a != "--config") explicit_flags.push_back(a);

    for (size_t i = 0; i < args.size(); ++i) {
        std::string path;
        size_t consumed = 0;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw std::runtime_error("--config requires a path");
            path = args[i + 1];
            consumed = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            consumed = 1;
        } else {
            continue;
        }

        std::ifstream file(path);
        if (!file) throw std::runtime_error("cannot open config file " + path);
        std::vector<std::string> expanded;
        std::string line;
        int line_no = 0;
        while (std::getline(file, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config file " + path + " line " +
                                         std::to_string(line_no) + ": expected key=value");
            std::string key = trim(t.substr(0, eq));
            std::string value = trim(t.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            if (key.empty())
                throw std::runtime_error("config file " + path + " line " +
                                         std::to_string(line_no) + ": empty key");
            std::string flag = "--" + key;
            if (std::find(explicit_flags.begin(), explicit_flags.end(), flag) !=
                explicit_flags.end())
                continue;
            expanded.push_back(flag);
            expanded.push_back(value);
        }
        args.erase(args.begin() + static_cast<long>(i),
                   args.begin() + static_cast<long>(i + consumed));
        args.insert(args.begin() + static_cast<long>(i), expanded.begin(), expanded.end());
        i += expanded.size();
        if (i > 0) --i;
    }
    return args;
}

struct LoadedCorpora {
    Corpus source_train;
    Corpus target_unlabeled;
};

LoadedCorpora load_train_corpora(const RunConfig& run) {
    TagScheme scheme = run.scheme();
    LoadedCorpora c;
    c.source_train = parse_conll_file(run.source_train_path, scheme, true, Domain::Source);
    c.target_unlabeled =
        parse_conll_file(run.target_unlabeled_path, scheme, false, Domain::Target);
    return c;
}

int run_train(TrainArgs& args) {
    args.run.task = match_mode_from_string(args.task);
    LoadedCorpora corpora = load_train_corpora(args.run);

    fs::create_directories(args.run.out_dir);
    TrainOutput out;
    try {
        out = train_run(args.run, corpora.source_train, corpora.target_unlabeled);
    } catch (const TrainAbortError& e) {
        std::string dump_path = (fs::path(args.run.out_dir) / "abort_dump.json").string();
        std::ofstream dump(dump_path);
        dump << e.dump << '\n';
        std::cerr << e.what() << "\nbatch dump written to " << dump_path << "\n";
        return 1;
    }

    std::string metrics_path = (fs::path(args.run.out_dir) / "metrics.jsonl").string();
    std::ofstream metrics(metrics_path);
    metrics << out.metrics_jsonl;

    std::string ckpt_path = (fs::path(args.run.out_dir) / "checkpoint.fmim").string();
    save_checkpoint(ckpt_path, out.checkpoint);

    const StepMetrics& last = out.steps.back();
    std::printf("trained %zu steps; final ce=%.4f delta1=%.4f delta2=%.4f mi_loss=%.4f\n",
                out.steps.size(), last.ce, last.delta1, last.delta2, last.mi_loss);
    std::printf("checkpoint: %s\nmetrics: %s\n", ckpt_path.c_str(), metrics_path.c_str());

    if (!args.run.target_test_path.empty()) {
        Corpus test =
            parse_conll_file(args.run.target_test_path, args.run.scheme(), true, Domain::Target);
        ScoreReport report = evaluate_model(out.checkpoint, test, args.run.task);
        std::printf("%s\n", report.to_json().c_str());
    }
    return 0;
}

int run_evaluate(const std::string& ckpt_path, const std::string& test_path,
                 const std::string& mode_str) {
    MatchMode mode = match_mode_from_string(mode_str);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Corpus test = parse_conll_file(test_path, ckpt.scheme, true, Domain::Target);
    ScoreReport report = evaluate_model(ckpt, test, mode);
    std::printf("%s\n", report.to_json().c_str());
    return 0;
}

std::string join_tokens(const std::vector<std::string>& tokens, int start, int end) {
    std::string out;
    for (int i = start; i < end; ++i) {
        if (!out.empty()) out += ' ';
        out += tokens[static_cast<size_t>(i)];
    }
    return out;
}

int run_diagnose(const std::string& ckpt_path, const std::string& input_path, bool labeled,
                 const std::string& jsonl_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Corpus input = parse_conll_file(input_path, ckpt.scheme, labeled, Domain::Target);
    std::vector<DiagnosedSentence> rows = diagnose_model(ckpt, input);

    std::printf("%-5s %9s %9s %9s  %s\n", "sent", "H(Y)", "H(Y|X)", "I(X;Y)", "predictions");
    for (size_t i = 0; i < rows.size(); ++i) {
        const DiagnosedSentence& r = rows[i];
        std::string preds;
        for (const Span& s : r.diag.spans) {
            if (!preds.empty()) preds += ", ";
            preds += join_tokens(r.tokens, s.start, s.end) + " (" + s.label + ")";
        }
        if (preds.empty()) preds = "none";
        std::printf("%-5zu %9.4f %9.4f %9.4f  %s\n", i + 1, r.diag.h_y, r.diag.h_y_given_x,
                    r.diag.mi, preds.c_str());
        std::printf("      text: %s\n",
                    join_tokens(r.tokens, 0, static_cast<int>(r.tokens.size())).c_str());
    }

    if (!jsonl_path.empty()) {
        std::ofstream out(jsonl_path);
        for (const DiagnosedSentence& r : rows) out << r.diag.to_json(r.tokens) << '\n';
    }
    return 0;
}

int run_synth(const SynthConfig& cfg, const std::string& out_dir) {
    SyntheticData data = generate_synthetic(cfg);
    fs::create_directories(out_dir);
    auto write = [&](const Corpus& c, const std::string& name) {
        std::string path = (fs::path(out_dir) / name).string();
        std::ofstream out(path);
        write_conll(c, out);
        std::printf("wrote %s (%zu sentences)\n", path.c_str(), c.sentences.size());
    };
    write(data.source_train, "source_train.tsv");
    write(data.target_unlabeled, "target_unlabeled.tsv");
    write(data.target_test, "target_test.tsv");
    return 0;
}

int run_sweep(TrainArgs& args, const std::string& param, const std::vector<double>& values,
              const std::string& out_csv) {
    if (values.empty()) {
        std::cerr << "sweep: no values given\n";
        return 1;
    }
    args.run.task = match_mode_from_string(args.task);
    if (args.run.target_test_path.empty()) {
        std::cerr << "sweep: --target-test is required\n";
        return 1;
    }
    LoadedCorpora corpora = load_train_corpora(args.run);
    Corpus test =
        parse_conll_file(args.run.target_test_path, args.run.scheme(), true, Domain::Target);

    std::ostringstream csv;
    csv << "value,absa_f1,ate_f1\n";
    for (double v : values) {
        RunConfig run = args.run;  // seed fixed; only the swept parameter varies
        if (param == "alpha")
            run.mi.alpha = v;
        else
            run.mi.rho = v;
        TrainOutput out = train_run(run, corpora.source_train, corpora.target_unlabeled);
        ScoreReport absa = evaluate_model(out.checkpoint, test, MatchMode::ABSA);
        ScoreReport ate = evaluate_model(out.checkpoint, test, MatchMode::ATE);
        char line[128];
        std::snprintf(line, sizeof(line), "%g,%.4f,%.4f\n", v, absa.micro_f1, ate.micro_f1);
        csv << line;
        std::fprintf(stderr, "sweep %s=%g absa_f1=%.4f ate_f1=%.4f\n", param.c_str(), v,
                     absa.micro_f1, ate.micro_f1);
    }

    if (out_csv.empty()) {
        std::printf("%s", csv.str().c_str());
    } else {
        fs::create_directories(fs::path(out_csv).parent_path().empty()
                                   ? "."
                                   : fs::path(out_csv).parent_path().string());
        std::ofstream out(out_csv);
        out << csv.str();
        std::printf("wrote %s\n", out_csv.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FMIM: mutual-information regularized domain adaptation for sequence tagging"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "Joint source/target training run");
    add_run_options(train_cmd, train_args);

    std::string eval_ckpt, eval_test, eval_mode = "ABSA";
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a labeled test set");
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("--test", eval_test, "Labeled test TSV")->required();
    eval_cmd->add_option("--mode", eval_mode, "ABSA, ATE or NER")
        ->check(CLI::IsMember({"ABSA", "ATE", "NER", "absa", "ate", "ner"}));

    std::string diag_ckpt, diag_input, diag_jsonl;
    bool diag_labeled = false;
    CLI::App* diag_cmd =
        app.add_subcommand("diagnose", "Per-sentence entropy/MI table for an input file");
    diag_cmd->add_option("--checkpoint", diag_ckpt)->required();
    diag_cmd->add_option("--input", diag_input)->required();
    diag_cmd->add_flag("--labeled", diag_labeled, "Input has a label column");
    diag_cmd->add_option("--jsonl", diag_jsonl, "Also write diagnostics as JSON lines");

    SynthConfig synth_cfg;
    std::string synth_out = "synth";
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate the synthetic domain-shift benchmark");
    synth_cmd->add_option("--n-source-train", synth_cfg.n_source_train);
    synth_cmd->add_option("--n-target-unlabeled", synth_cfg.n_target_unlabeled);
    synth_cmd->add_option("--n-target-test", synth_cfg.n_target_test);
    synth_cmd->add_option("--shared-vocab-size", synth_cfg.shared_vocab_size);
    synth_cmd->add_option("--source-lexicon-size", synth_cfg.source_aspect_lexicon_size);
    synth_cmd->add_option("--target-lexicon-size", synth_cfg.target_aspect_lexicon_size);
    synth_cmd->add_option("--aspect-len-min", synth_cfg.aspect_len_min);
    synth_cmd->add_option("--aspect-len-max", synth_cfg.aspect_len_max);
    synth_cmd->add_option("--sentence-len-min", synth_cfg.sentence_len_min);
    synth_cmd->add_option("--sentence-len-max", synth_cfg.sentence_len_max);
    synth_cmd
        ->add_option("--sentiment-distribution", synth_cfg.sentiment_distribution,
                     "P(POS) P(NEU) P(NEG)")
        ->expected(3);
    synth_cmd->add_option("--source-lexicon", synth_cfg.source_aspect_lexicon,
                          "Explicit source aspect tokens");
    synth_cmd->add_option("--target-lexicon", synth_cfg.target_aspect_lexicon,
                          "Explicit target aspect tokens");
    synth_cmd->add_option("--seed", synth_cfg.seed);
    synth_cmd->add_option("--out-dir", synth_out);
    std::string synth_config_path;
    synth_cmd->add_option("--config", synth_config_path,
                          "Flat key=value config file; explicit flags override it");

    TrainArgs sweep_args;
    std::string sweep_param = "alpha";
    std::vector<double> sweep_values;
    std::string sweep_csv;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Train once per hyperparameter value and emit a CSV");
    add_run_options(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--param", sweep_param, "alpha or rho")
        ->check(CLI::IsMember({"alpha", "rho"}));
    sweep_cmd->add_option("--values", sweep_values, "Values to sweep")->required();
    sweep_cmd->add_option("--out", sweep_csv, "CSV output path (stdout when omitted)");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config_args(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (train_cmd->parsed()) return run_train(train_args);
        if (eval_cmd->parsed()) return run_evaluate(eval_ckpt, eval_test, eval_mode);
        if (diag_cmd->parsed()) return run_diagnose(diag_ckpt, diag_input, diag_labeled, diag_jsonl);
        if (synth_cmd->parsed()) return run_synth(synth_cfg, synth_out);
        if (sweep_cmd->parsed()) return run_sweep(sweep_args, sweep_param, sweep_values, sweep_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
