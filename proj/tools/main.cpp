// tblstm: one binary for the whole workflow. gen-corpus writes a synthetic
// sentence-pair corpus plus labeled task data; pretrain runs the masked-token
// + sentence-order objective; finetune adapts a pretrained encoder to a
// classification or span task; eval scores a checkpoint; count-params prints
// the analytic size audit; gradcheck differences one encoder block against
// the tape. Every producing run writes its resolved configuration to a
// sidecar file, and all randomness descends from --seed, so rerunning a
// command line reproduces its outputs byte for byte (the metrics ms column,
// which records wall time, is the one exception).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tblstm/audit.hpp"
#include "tblstm/checkpoint.hpp"
#include "tblstm/gradcheck.hpp"
#include "tblstm/trainer.hpp"

namespace {

using namespace tblstm;

// Training and evaluation run in single precision; gradcheck differences in
// double because float slopes are too noisy at h=1e-5.
using F = float;

// ---------------------------------------------------------------------------
// Model configuration assembly: preset, then config file, then single flags,
// validated once after the last layer has spoken.

struct ModelFlags {
    std::string preset_name;
    std::string config_file;
    std::optional<int64_t> layers, hidden, heads, ff_width, vocab_size, max_len;
    std::optional<std::string> blstm, blstm_width, decoder, blstm_sum;
    std::optional<double> dropout;
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
    cmd->add_option("--preset", mf.preset_name, "Named starting size")
        ->check(CLI::IsMember({"toy", "small", "base", "large"}));
    cmd->add_option("--config", mf.config_file,
                    "JSON config file applied over the preset; single flags override both");
    cmd->add_option("--layers", mf.layers, "Encoder layer count");
    cmd->add_option("--hidden", mf.hidden, "Hidden width H");
    cmd->add_option("--heads", mf.heads, "Attention head count (must divide H)");
    cmd->add_option("--ff-width", mf.ff_width, "Feed-forward inner width");
    cmd->add_option("--blstm", mf.blstm,
                    "Recurrent branch: none (plain transformer), replace (BLSTM in place of the "
                    "feed-forward), parallel (BLSTM branch summed into the residual), pure")
        ->check(CLI::IsMember({"none", "replace", "parallel", "pure"}));
    cmd->add_option("--blstm-hidden", mf.blstm_width,
                    "BLSTM width: full (concat 2H, projection back) or half (concat lands on H)")
        ->check(CLI::IsMember({"full", "half"}));
    cmd->add_option("--blstm-sum", mf.blstm_sum,
                    "Join point of the parallel branch: final or attn pre-norm sum")
        ->check(CLI::IsMember({"final", "attn"}));
    cmd->add_option("--decoder", mf.decoder, "Fine-tuning decoder: linear or blstm2")
        ->check(CLI::IsMember({"linear", "blstm2"}));
    cmd->add_option("--vocab-size", mf.vocab_size, "Embedding rows (vocabulary capacity)");
    cmd->add_option("--max-len", mf.max_len,
                    "Position budget: embedding rows and the longest training sequence");
    cmd->add_option("--dropout", mf.dropout, "Dropout rate in [0, 1)");
}

ModelConfig resolve_config(const ModelFlags& mf) {
    ModelConfig cfg = mf.preset_name.empty() ? ModelConfig{} : preset(mf.preset_name);
    if (!mf.config_file.empty()) {
        std::ifstream in(mf.config_file);
        if (!in) throw ConfigError("cannot open config file '" + mf.config_file + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        config_apply_json(cfg, ss.str());
    }
    if (mf.layers) cfg.num_layers = *mf.layers;
    if (mf.hidden) cfg.hidden = *mf.hidden;
    if (mf.heads) cfg.num_heads = *mf.heads;
    if (mf.ff_width) cfg.ff_width = *mf.ff_width;
    if (mf.blstm) cfg.blstm_mode = blstm_mode_from(*mf.blstm);
    if (mf.blstm_width) cfg.blstm_width = blstm_width_from(*mf.blstm_width);
    if (mf.blstm_sum) cfg.sum_point = sum_point_from(*mf.blstm_sum);
    if (mf.decoder) cfg.decoder_mode = decoder_mode_from(*mf.decoder);
    if (mf.vocab_size) cfg.vocab_size = *mf.vocab_size;
    if (mf.max_len) cfg.max_positions = *mf.max_len;
    if (mf.dropout) cfg.dropout = *mf.dropout;
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Shared output plumbing.

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

// The resolved-config sidecar: everything needed to rerun the command. Keys
// are sorted and nothing time-dependent goes in, so reruns rewrite the same
// bytes.
void write_sidecar(const std::string& path, const std::string& command, const ModelConfig& cfg,
                   nlohmann::json run) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = nlohmann::json::parse(config_to_json(cfg));
    j["dtype"] = DtypeName<F>::value;
    j["run"] = std::move(run);
    write_json_file(path, j);
}

// ---------------------------------------------------------------------------
// gen-corpus

struct GenArgs {
    std::string out;
    uint64_t seed = 42;
    SyntheticSpec spec;
    int64_t classify_n = 200;
    int64_t span_n = 200;
};

int run_gen_corpus(const GenArgs& a) {
    Corpus corpus = gen_synthetic_corpus(a.spec, a.seed);
    Vocab vocab = synthetic_vocab(a.spec);
    auto classify = gen_classify_data(a.spec, a.classify_n, derive_seed(a.seed, "gen.classify"));
    auto span = gen_span_data(a.spec, a.span_n, derive_seed(a.seed, "gen.span"));

    save_corpus(corpus, a.out + ".corpus.txt");
    save_vocab(vocab, a.out + ".vocab.txt");
    save_classify_data(classify, a.out + ".classify.tsv");
    save_span_data(span, a.out + ".span.tsv");

    nlohmann::json j;
    j["command"] = "gen-corpus";
    j["seed"] = a.seed;
    j["spec"] = {{"content_words", a.spec.content_words},
                 {"docs", a.spec.docs},
                 {"sentences_per_doc", a.spec.sentences_per_doc},
                 {"len_min", a.spec.len_min},
                 {"len_max", a.spec.len_max},
                 {"follow_prob", a.spec.follow_prob},
                 {"classes", a.spec.classes},
                 {"span_max", a.spec.span_max}};
    j["outputs"] = {a.out + ".corpus.txt", a.out + ".vocab.txt", a.out + ".classify.tsv",
                    a.out + ".span.tsv"};
    write_json_file(a.out + ".run.json", j);

    int64_t sentences = 0;
    for (const auto& d : corpus.docs) sentences += static_cast<int64_t>(d.size());
    std::cout << "wrote " << a.out << ".corpus.txt (" << corpus.docs.size() << " docs, "
              << sentences << " sentences), " << a.out << ".vocab.txt (" << vocab.size()
              << " tokens), " << a.out << ".classify.tsv (" << classify.size() << "), " << a.out
              << ".span.tsv (" << span.size() << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// count-params

int run_count_params(const ModelFlags& mf, bool as_json) {
    ModelConfig cfg = resolve_config(mf);
    ParamReport r = count_params_analytic(cfg);
    if (as_json)
        std::cout << report_json(r) << "\n";
    else
        std::cout << report_table(r);
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradArgs {
    ModelFlags mf;
    std::string block;  // architecture alias; empty keeps whatever --blstm said
    int64_t seq_len = 4;
    uint64_t seed = 42;
};

BlstmMode block_mode_from(const std::string& s) {
    if (s == "trans") return BlstmMode::None;
    if (s == "trans-blstm-1") return BlstmMode::ReplaceFfn;
    if (s == "trans-blstm-2") return BlstmMode::ParallelSum;
    if (s == "pure-blstm") return BlstmMode::PureBlstm;
    return blstm_mode_from(s);  // the plain mode spellings work too
}

int run_gradcheck(const GradArgs& a) {
    ModelConfig cfg = resolve_config(a.mf);
    if (!a.block.empty()) cfg.blstm_mode = block_mode_from(a.block);
    cfg.dropout = 0.0;  // differencing needs a deterministic forward
    cfg.validate();
    finite_checks() = true;

    ParamStore<double> ps(a.seed);
    EncoderBlock<double> block(ps, "layer0", cfg);
    Pcg32 xrng(derive_seed(a.seed, "gradcheck.x"), 3);
    std::vector<double> xv(static_cast<size_t>(a.seq_len * cfg.hidden));
    for (auto& v : xv) v = xrng.normal();
    auto x = Tensor<double>::from({a.seq_len, cfg.hidden}, std::move(xv));
    auto mask = make_pad_mask<double>(a.seq_len, a.seq_len);

    std::vector<Tensor<double>> inputs;
    for (const auto& [name, e] : ps.entries()) inputs.push_back(e.tensor);
    inputs.push_back(x);
    auto r = check_gradients(inputs, [&](const std::vector<Tensor<double>>&) {
        return block.forward(x, mask, a.seq_len);
    });

    std::cout << "block " << to_string(cfg.blstm_mode) << "/" << to_string(cfg.blstm_width)
              << " (hidden " << cfg.hidden << ", seq " << a.seq_len << ", "
              << inputs.size() - 1 << " parameter tensors): max relative error " << r.max_rel_err
              << "\n";
    if (!r.pass()) {
        std::cout << "FAIL at " << r.worst << " (tolerance 1e-4)\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// pretrain

struct PretrainArgs {
    ModelFlags mf;
    std::string corpus, vocab, out, resume;
    int64_t steps = 1000;
    int64_t batch = 256;
    double lr = 1e-4;
    double mask_rate = 0.15;
    int64_t checkpoint_every = 0;
    uint64_t seed = 42;
};

int run_pretrain(const PretrainArgs& a) {
    ModelConfig cfg = resolve_config(a.mf);

    // Inputs first: a missing corpus or vocabulary must fail before any
    // output file is created.
    Corpus corpus = load_corpus(a.corpus);
    Vocab vocab = a.vocab.empty() ? build_vocab(corpus, static_cast<int>(cfg.vocab_size))
                                  : load_vocab(a.vocab);

    PretrainHyper hyper;
    hyper.steps = a.steps;
    hyper.batch_size = a.batch;
    hyper.max_len = cfg.max_positions;  // sequences fill the position budget
    hyper.lr = a.lr;
    hyper.mask_rate = a.mask_rate;
    hyper.checkpoint_every = a.checkpoint_every;
    hyper.checkpoint_path = a.out + ".ckpt";

    Model<F> model(cfg, a.seed, Task::Pretrain);
    Pretrainer<F> trainer(model, corpus, vocab, hyper, a.seed);
    bool resuming = !a.resume.empty();
    if (resuming) trainer.resume(a.resume);

    write_sidecar(a.out + ".config.json", "pretrain", cfg,
                  {{"batch", a.batch},
                   {"checkpoint_every", a.checkpoint_every},
                   {"corpus", a.corpus},
                   {"lr", a.lr},
                   {"mask_rate", a.mask_rate},
                   {"max_len", hyper.max_len},
                   {"resume", a.resume},
                   {"seed", a.seed},
                   {"steps", a.steps},
                   {"vocab", a.vocab}});
    // A fresh run owns its metrics file; a resumed one appends to the record
    // the interrupted run left behind.
    if (!resuming) std::filesystem::remove(a.out + ".metrics");
    MetricsWriter metrics(a.out + ".metrics");

    auto records = trainer.run(&metrics);
    if (records.empty()) {
        std::cout << "nothing to do: checkpoint already at step " << trainer.steps_done() << "\n";
        return 0;
    }
    std::cout << "pretrained " << records.size() << " steps"
              << (resuming ? " (resumed)" : "") << ": loss " << format_double(records.front().total)
              << " -> " << format_double(records.back().total) << "\n"
              << "wrote " << a.out << ".ckpt, " << a.out << ".metrics, " << a.out
              << ".config.json\n";
    return 0;
}

// ---------------------------------------------------------------------------
// finetune

struct FinetuneArgs {
    std::string task;  // classify | span
    std::string decoder = "linear";
    std::string checkpoint, data, vocab, out;
    int64_t epochs = 2;
    int64_t batch = 12;
    double lr = 3e-5;
    std::optional<int64_t> max_len;
    uint64_t seed = 42;
};

// Task checkpoints record the weights for later eval; fine-tuning never
// resumes mid-run, so the optimizer slot is fresh and the generator states
// are the derived starting points.
template <typename T>
void save_task_checkpoint(const std::string& path, const Model<T>& m, uint64_t seed,
                          int64_t step) {
    Adam<T> opt;
    Pcg32 order(derive_seed(seed, "finetune.order"), 3);
    Pcg32 dropout(derive_seed(seed, "finetune.dropout"), 4);
    save_checkpoint(path, m.cfg, m.params, opt, order, dropout, step);
}

int run_finetune(const FinetuneArgs& a) {
    CheckpointMeta meta = peek_checkpoint(a.checkpoint);
    ModelConfig cfg = meta.config;
    cfg.decoder_mode = decoder_mode_from(a.decoder);

    Vocab vocab = load_vocab(a.vocab);
    FinetuneHyper hyper;
    hyper.lr = a.lr;
    hyper.batch_size = a.batch;
    hyper.epochs = a.epochs;
    hyper.max_len = a.max_len ? *a.max_len : std::min<int64_t>(64, cfg.max_positions);
    if (hyper.max_len > cfg.max_positions)
        throw ConfigError("finetune: max_len " + std::to_string(hyper.max_len) +
                          " exceeds the encoder's " + std::to_string(cfg.max_positions) +
                          " positions");

    nlohmann::json run = {{"batch", a.batch},     {"checkpoint", a.checkpoint},
                          {"data", a.data},       {"epochs", a.epochs},
                          {"lr", a.lr},           {"max_len", hyper.max_len},
                          {"seed", a.seed},       {"task", a.task},
                          {"vocab", a.vocab}};

    auto steps_of = [&](int64_t n) {
        return a.epochs * ((n + a.batch - 1) / a.batch);
    };

    if (a.task == "classify") {
        auto data = load_classify_data(a.data);
        int64_t classes = 2;
        for (const auto& ex : data) classes = std::max<int64_t>(classes, ex.label + 1);
        Model<F> model(cfg, a.seed, Task::Classify, classes);
        int64_t from_step = load_encoder_weights(a.checkpoint, model);
        run["classes"] = classes;
        write_sidecar(a.out + ".config.json", "finetune", cfg, run);
        std::filesystem::remove(a.out + ".metrics");
        MetricsWriter metrics(a.out + ".metrics");
        double acc = finetune_classifier(model, data, vocab, hyper, a.seed, &metrics);
        save_task_checkpoint(a.out + ".ckpt", model, a.seed,
                             steps_of(static_cast<int64_t>(data.size())));
        std::cout << "classify train accuracy " << format_double(acc) << " over " << data.size()
                  << " examples (encoder from step " << from_step << ")\n"
                  << "wrote " << a.out << ".ckpt, " << a.out << ".metrics, " << a.out
                  << ".config.json\n";
    } else {
        auto data = load_span_data(a.data);
        Model<F> model(cfg, a.seed, Task::Span);
        int64_t from_step = load_encoder_weights(a.checkpoint, model);
        write_sidecar(a.out + ".config.json", "finetune", cfg, run);
        std::filesystem::remove(a.out + ".metrics");
        MetricsWriter metrics(a.out + ".metrics");
        double em = finetune_span(model, data, vocab, hyper, a.seed, &metrics);
        save_task_checkpoint(a.out + ".ckpt", model, a.seed,
                             steps_of(static_cast<int64_t>(data.size())));
        std::cout << "span train exact match " << format_double(em) << " over " << data.size()
                  << " examples (encoder from step " << from_step << ")\n"
                  << "wrote " << a.out << ".ckpt, " << a.out << ".metrics, " << a.out
                  << ".config.json\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint, vocab, data, corpus;
    int64_t batches = 8;
    int64_t batch = 32;
    std::optional<int64_t> max_len;
    uint64_t seed = 42;
};

int run_eval(const EvalArgs& a) {
    CheckpointMeta meta = peek_checkpoint(a.checkpoint);
    int64_t classes = 2;
    Task task = checkpoint_task(a.checkpoint, &classes);
    Vocab vocab = load_vocab(a.vocab);

    Model<F> model(meta.config, /*seed=*/1, task, classes);
    Adam<F> opt;
    Pcg32 r1(1, 1), r2(2, 2);
    int64_t step = load_checkpoint(a.checkpoint, meta.config, model.params, opt, r1, r2);

    if (task == Task::Pretrain) {
        if (a.corpus.empty())
            throw ConfigError("eval of a pretraining checkpoint needs --corpus");
        Corpus corpus = load_corpus(a.corpus);
        Pcg32 rng(derive_seed(a.seed, "eval.data"), 1);
        int64_t max_len = a.max_len ? *a.max_len : meta.config.max_positions;
        double mlm = 0, nsp = 0;
        int64_t n = 0;
        for (int64_t b = 0; b < a.batches; ++b) {
            auto examples = sample_pretrain_examples(corpus, vocab, rng, a.batch, max_len);
            for (const auto& ex : examples) {
                auto hidden = model.encode(ex.tokens, ex.segments,
                                           static_cast<int64_t>(ex.tokens.size()));
                mlm += static_cast<double>(
                    model.mlm->loss(hidden, ex.mlm_positions, ex.mlm_labels).item());
                nsp += static_cast<double>(model.nsp->loss(hidden, ex.nsp_label).item());
                ++n;
            }
        }
        std::cout << "pretrain checkpoint at step " << step << ", " << n
                  << " held-out examples: mlm " << format_double(mlm / n) << " nsp "
                  << format_double(nsp / n) << " total " << format_double((mlm + nsp) / n) << "\n";
        return 0;
    }

    if (a.data.empty()) throw ConfigError("eval of a task checkpoint needs --data");
    int64_t max_len = a.max_len ? *a.max_len : std::min<int64_t>(64, meta.config.max_positions);
    if (task == Task::Classify) {
        auto data = load_classify_data(a.data);
        double acc = classify_accuracy(model, data, vocab, max_len);
        std::cout << "classify checkpoint at step " << step << ": accuracy "
                  << format_double(acc) << " over " << data.size() << " examples\n";
    } else {
        auto data = load_span_data(a.data);
        double em = span_exact_match(model, data, vocab, max_len);
        std::cout << "span checkpoint at step " << step << ": exact match " << format_double(em)
                  << " over " << data.size() << " examples\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"transformer + bidirectional-LSTM encoders: corpus generation, pretraining, "
                 "fine-tuning, evaluation, parameter audit, gradient checking"};
    app.require_subcommand(1);
    int rc = 0;

    GenArgs gen;
    auto* g = app.add_subcommand("gen-corpus",
                                 "Write a synthetic corpus, its vocabulary, and labeled task data");
    g->add_option("--out", gen.out, "Output path prefix")->required();
    g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    g->add_option("--words", gen.spec.content_words, "Content word count")->capture_default_str();
    g->add_option("--docs", gen.spec.docs, "Document count")->capture_default_str();
    g->add_option("--sentences", gen.spec.sentences_per_doc, "Sentences per document")
        ->capture_default_str();
    g->add_option("--len-min", gen.spec.len_min, "Shortest sentence")->capture_default_str();
    g->add_option("--len-max", gen.spec.len_max, "Longest sentence")->capture_default_str();
    g->add_option("--follow-prob", gen.spec.follow_prob,
                  "Probability a token follows the hidden successor rule")
        ->capture_default_str();
    g->add_option("--classes", gen.spec.classes, "Classification label count")
        ->capture_default_str();
    g->add_option("--span-max", gen.spec.span_max, "Longest marked span")->capture_default_str();
    g->add_option("--classify-n", gen.classify_n, "Classification examples")
        ->capture_default_str();
    g->add_option("--span-n", gen.span_n, "Span examples")->capture_default_str();
    g->callback([&] { rc = run_gen_corpus(gen); });

    PretrainArgs pre;
    auto* p = app.add_subcommand("pretrain", "Masked-token + sentence-order pretraining");
    add_model_flags(p, pre.mf);
    p->add_option("--corpus", pre.corpus, "Training corpus (blank-line separated documents)")
        ->required();
    p->add_option("--vocab", pre.vocab,
                  "Vocabulary file; omitted, one is induced from the corpus at --vocab-size");
    p->add_option("--out", pre.out, "Output prefix for .ckpt, .metrics, .config.json")
        ->required();
    p->add_option("--checkpoint", pre.resume, "Resume from this checkpoint");
    p->add_option("--steps", pre.steps, "Total optimizer steps")->capture_default_str();
    p->add_option("--batch", pre.batch, "Sentence pairs per step")->capture_default_str();
    p->add_option("--lr", pre.lr, "Peak learning rate")->capture_default_str();
    p->add_option("--mask-rate", pre.mask_rate, "Fraction of maskable positions covered")
        ->capture_default_str();
    p->add_option("--checkpoint-every", pre.checkpoint_every,
                  "Extra checkpoint cadence in steps; 0 saves only at the end")
        ->capture_default_str();
    p->add_option("--seed", pre.seed, "Root seed for init, data order, and dropout")
        ->capture_default_str();
    p->callback([&] { rc = run_pretrain(pre); });

    FinetuneArgs ft;
    auto* f = app.add_subcommand("finetune", "Adapt a pretrained encoder to a labeled task");
    f->add_option("--task", ft.task, "classify or span")
        ->required()
        ->check(CLI::IsMember({"classify", "span"}));
    f->add_option("--decoder", ft.decoder, "Head decoder: linear or blstm2")
        ->capture_default_str()
        ->check(CLI::IsMember({"linear", "blstm2"}));
    f->add_option("--checkpoint", ft.checkpoint, "Pretraining checkpoint to start from")
        ->required();
    f->add_option("--data", ft.data, "Labeled examples (tab-separated, one per line)")
        ->required();
    f->add_option("--vocab", ft.vocab, "Vocabulary file the encoder was pretrained with")
        ->required();
    f->add_option("--out", ft.out, "Output prefix for .ckpt, .metrics, .config.json")
        ->required();
    f->add_option("--epochs", ft.epochs, "Passes over the data")->capture_default_str();
    f->add_option("--batch", ft.batch, "Examples per step")->capture_default_str();
    f->add_option("--lr", ft.lr, "Peak learning rate")->capture_default_str();
    f->add_option("--max-len", ft.max_len,
                  "Longest input sequence (default: 64 capped at the encoder's positions)");
    f->add_option("--seed", ft.seed, "Root seed for head init, data order, and dropout")
        ->capture_default_str();
    f->callback([&] { rc = run_finetune(ft); });

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score a checkpoint on held-out inputs");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint to score")->required();
    e->add_option("--vocab", ev.vocab, "Vocabulary file")->required();
    e->add_option("--data", ev.data, "Labeled examples for task checkpoints");
    e->add_option("--corpus", ev.corpus, "Corpus for pretraining checkpoints");
    e->add_option("--batches", ev.batches, "Evaluation batches (pretraining only)")
        ->capture_default_str();
    e->add_option("--batch", ev.batch, "Examples per batch (pretraining only)")
        ->capture_default_str();
    e->add_option("--max-len", ev.max_len, "Longest input sequence (default: model positions)");
    e->add_option("--seed", ev.seed, "Sampling seed (pretraining only)")->capture_default_str();
    e->callback([&] { rc = run_eval(ev); });

    ModelFlags count_mf;
    bool count_json = false;
    auto* c = app.add_subcommand("count-params", "Analytic parameter audit for a configuration");
    add_model_flags(c, count_mf);
    c->add_flag("--json", count_json, "Emit the report as JSON");
    c->callback([&] { rc = run_count_params(count_mf, count_json); });

    GradArgs gc;
    auto* q = app.add_subcommand("gradcheck",
                                 "Finite-difference one encoder block against the tape");
    add_model_flags(q, gc.mf);
    q->add_option("--block", gc.block,
                  "Architecture alias: trans, trans-blstm-1, trans-blstm-2, pure-blstm "
                  "(overrides --blstm)");
    q->add_option("--seq-len", gc.seq_len, "Sequence length of the probe input")
        ->capture_default_str();
    q->add_option("--seed", gc.seed, "Parameter and probe seed")->capture_default_str();
    q->callback([&] { rc = run_gradcheck(gc); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return rc;
}
