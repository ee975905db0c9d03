#include <cmath>
#include <vector>

#include "doctest.h"
#include "tblstm/gradcheck.hpp"
#include "tblstm/model.hpp"

using namespace tblstm;

namespace {

Tensor<double> randn(Pcg32& rng, std::vector<int64_t> shape) {
    auto t = Tensor<double>::zeros(std::move(shape));
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

void fill(ParamStore<double>& ps, const std::string& name, double value) {
    Tensor<double> t = ps.get(name);
    for (auto& v : t.values()) v = value;
}

void setv(Tensor<double>& t, int64_t r, int64_t c, double value) {
    t.values()[static_cast<size_t>(r * t.dim(1) + c)] = value;
}

void set_entry(ParamStore<double>& ps, const std::string& name, int64_t r, int64_t c,
               double value) {
    Tensor<double> t = ps.get(name);
    setv(t, r, c, value);
}

double erf_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476)); }

// Cross entropy of one logit row against a label, by the direct formula.
double ce_row(const std::vector<double>& logits, int label) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return mx + std::log(sum) - logits[label];
}

}  // namespace

TEST_CASE("mlm head: zeroed transform gives exactly log(V) per masked position") {
    const int64_t h = 4, v = 7;
    ParamStore<double> ps(5);
    auto table = ps.create("embed.token", {v, h}, Init::TruncNormal, true);
    MlmHead<double> head(ps, "mlm", table, h);
    fill(ps, "mlm.transform.w", 0.0);
    fill(ps, "mlm.transform.b", 0.0);

    Pcg32 rng(11);
    auto hidden = randn(rng, {3, h});
    auto loss = head.loss(hidden, {0, 2}, {4, 6});
    CHECK(loss.item() == doctest::Approx(std::log(double(v))).epsilon(1e-12));
}

TEST_CASE("mlm head: large output bias on the true token drives the loss to zero") {
    const int64_t h = 4, v = 7;
    ParamStore<double> ps(5);
    auto table = ps.create("embed.token", {v, h}, Init::TruncNormal, true);
    MlmHead<double> head(ps, "mlm", table, h);
    fill(ps, "mlm.transform.w", 0.0);
    fill(ps, "mlm.transform.b", 0.0);
    {
        Tensor<double> b = ps.get("mlm.bias");
        b.values()[3] = 30.0;
    }
    Pcg32 rng(12);
    auto hidden = randn(rng, {2, h});
    CHECK(head.loss(hidden, {1}, {3}).item() < 1e-6);
}

TEST_CASE("mlm head matches a plain-loop reimplementation on random inputs") {
    const int64_t h = 3, v = 5;
    ParamStore<double> ps(21);
    auto table = ps.create("embed.token", {v, h}, Init::TruncNormal, true);
    MlmHead<double> head(ps, "mlm", table, h);
    // give the zero-initialized bias some texture
    {
        Tensor<double> b = ps.get("mlm.bias");
        Pcg32 r(77);
        for (auto& x : b.values()) x = 0.3 * r.normal();
    }

    Pcg32 rng(13);
    auto hidden = randn(rng, {4, h});
    std::vector<int> positions = {1, 3};
    std::vector<int> labels = {2, 0};

    auto w = ps.get("mlm.transform.w");
    auto b = ps.get("mlm.transform.b");
    auto gamma = ps.get("mlm.norm.gamma");
    auto beta = ps.get("mlm.norm.beta");
    auto bias = ps.get("mlm.bias");

    double expected = 0.0;
    for (size_t p = 0; p < positions.size(); ++p) {
        std::vector<double> t(h);
        for (int64_t o = 0; o < h; ++o) {
            double acc = b.values()[o];
            for (int64_t i = 0; i < h; ++i) acc += hidden.at(positions[p], i) * w.at(i, o);
            t[o] = erf_gelu(acc);
        }
        double mean = 0.0;
        for (double x : t) mean += x;
        mean /= double(h);
        double var = 0.0;
        for (double x : t) var += (x - mean) * (x - mean);
        var /= double(h);
        double rstd = 1.0 / std::sqrt(var + 1e-12);
        std::vector<double> y(h);
        for (int64_t o = 0; o < h; ++o)
            y[o] = gamma.values()[o] * (t[o] - mean) * rstd + beta.values()[o];
        std::vector<double> logits(v);
        for (int64_t tok = 0; tok < v; ++tok) {
            double acc = bias.values()[tok];
            for (int64_t o = 0; o < h; ++o) acc += y[o] * table.at(tok, o);
            logits[tok] = acc;
        }
        expected += ce_row(logits, labels[p]);
    }
    expected /= double(positions.size());

    CHECK(head.loss(hidden, positions, labels).item() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("mlm head error contracts") {
    const int64_t h = 4, v = 7;
    ParamStore<double> ps(5);
    auto table = ps.create("embed.token", {v, h}, Init::TruncNormal, true);
    MlmHead<double> head(ps, "mlm", table, h);
    Pcg32 rng(14);
    auto hidden = randn(rng, {3, h});
    CHECK_THROWS_AS(head.loss(hidden, {}, {}), ContractError);
    CHECK_THROWS_AS(head.loss(hidden, {5}, {0}), VocabError);   // position beyond sequence
    CHECK_THROWS_AS(head.loss(hidden, {0}, {9}), ContractError);  // label beyond vocabulary
}

TEST_CASE("mlm head gradients, including the tied table, pass finite differences") {
    const int64_t h = 3, v = 4;
    ParamStore<double> ps(9);
    auto table = ps.create("embed.token", {v, h}, Init::TruncNormal, true);
    MlmHead<double> head(ps, "mlm", table, h);
    Pcg32 rng(15);
    auto hidden = randn(rng, {3, h});

    std::vector<Tensor<double>> inputs = {hidden,
                                          ps.get("mlm.transform.w"),
                                          ps.get("mlm.transform.b"),
                                          ps.get("mlm.norm.gamma"),
                                          ps.get("mlm.norm.beta"),
                                          table,
                                          ps.get("mlm.bias")};
    auto res = check_gradients(
        inputs, [&](const std::vector<Tensor<double>>& in) {
            return head.loss(in[0], {0, 2}, {1, 3});
        });
    INFO(res.worst);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("nsp head: zeroed classifier sits exactly at log 2") {
    const int64_t h = 4;
    ParamStore<double> ps(3);
    NspHead<double> head(ps, "nsp", h);
    fill(ps, "nsp.out.w", 0.0);
    Pcg32 rng(16);
    auto hidden = randn(rng, {5, h});
    CHECK(head.loss(hidden, 0).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(head.loss(hidden, 1).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("nsp head matches a plain-loop reimplementation and reads only position 0") {
    const int64_t h = 3;
    ParamStore<double> ps(23);
    NspHead<double> head(ps, "nsp", h);
    Pcg32 rng(17);
    auto hidden = randn(rng, {4, h});

    auto wp = ps.get("nsp.pool.dense.w");
    auto bp = ps.get("nsp.pool.dense.b");
    auto wo = ps.get("nsp.out.w");
    auto bo = ps.get("nsp.out.b");
    std::vector<double> pooled(h);
    for (int64_t o = 0; o < h; ++o) {
        double acc = bp.values()[o];
        for (int64_t i = 0; i < h; ++i) acc += hidden.at(0, i) * wp.at(i, o);
        pooled[o] = std::tanh(acc);
    }
    std::vector<double> logits(2);
    for (int64_t c = 0; c < 2; ++c) {
        double acc = bo.values()[c];
        for (int64_t i = 0; i < h; ++i) acc += pooled[i] * wo.at(i, c);
        logits[c] = acc;
    }
    CHECK(head.loss(hidden, 1).item() == doctest::Approx(ce_row(logits, 1)).epsilon(1e-12));

    // rows past 0 are invisible to the pooler
    Tensor<double> copy = Tensor<double>::from(
        {4, h}, std::vector<double>(hidden.values().begin(), hidden.values().end()));
    copy.values()[2 * h + 1] += 10.0;
    CHECK(head.loss(copy, 1).item() == head.loss(hidden, 1).item());
}

TEST_CASE("classifier head: zero weights give log(C), predict takes the argmax") {
    const int64_t h = 4;
    ParamStore<double> ps(3);
    ClassifierHead<double> head(ps, "cls", h, 3);
    fill(ps, "cls.out.w", 0.0);
    Pcg32 rng(18);
    auto hidden = randn(rng, {2, h});
    CHECK(head.loss(hidden, 2).item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    Tensor<double> bo = ps.get("cls.out.b");
    bo.values()[1] = 5.0;
    CHECK(head.predict(hidden) == 1);
    CHECK(head.loss(hidden, 1).item() < 0.02);
    CHECK_THROWS_AS(head.loss(hidden, 3), ContractError);
    CHECK_THROWS_AS(ClassifierHead<double>(ps, "cls2", h, 1), ConfigError);
}

TEST_CASE("span head: uniform logits over 10 positions cost exactly log 10") {
    const int64_t h = 4, s = 10;
    ParamStore<double> ps(3);
    SpanHead<double> head(ps, "span", h, false);
    fill(ps, "span.out.w", 0.0);
    Pcg32 rng(19);
    auto hidden = randn(rng, {s, h});
    CHECK(head.loss(hidden, s, 2, 6).item() == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("span head: crafted features pin start and end, decode recovers them") {
    const int64_t h = 4, s = 10;
    ParamStore<double> ps(3);
    SpanHead<double> head(ps, "span", h, false);
    fill(ps, "span.out.w", 0.0);
    fill(ps, "span.out.b", 0.0);
    set_entry(ps, "span.out.w", 0, 0, 1.0);  // feature 0 votes for start
    set_entry(ps, "span.out.w", 1, 1, 1.0);  // feature 1 votes for end

    auto hidden = Tensor<double>::zeros({s, h});
    setv(hidden, 3, 0, 50.0);
    setv(hidden, 7, 1, 50.0);
    CHECK(head.loss(hidden, s, 3, 7).item() < 1e-6);
    auto [st, en] = head.decode(hidden, s);
    CHECK(st == 3);
    CHECK(en == 7);

    // decode searches only the valid prefix
    auto [st2, en2] = head.decode(hidden, 5);
    CHECK(st2 == 3);
    CHECK(en2 >= 3);
    CHECK(en2 < 5);
}

TEST_CASE("span decode enforces start <= end <= start + max span") {
    const int64_t h = 2, s = 40;
    ParamStore<double> ps(3);
    SpanHead<double> head(ps, "span", h, false);
    fill(ps, "span.out.w", 0.0);
    fill(ps, "span.out.b", 0.0);
    set_entry(ps, "span.out.w", 0, 0, 1.0);
    set_entry(ps, "span.out.w", 1, 1, 1.0);

    auto hidden = Tensor<double>::zeros({s, h});
    // raw argmaxes would pick start 5, end 1: infeasible (end < start)
    setv(hidden, 5, 0, 10.0);
    setv(hidden, 1, 1, 10.0);
    setv(hidden, 6, 1, 4.0);
    auto [st, en] = head.decode(hidden, s);
    CHECK(st <= en);
    CHECK(st == 5);
    CHECK(en == 6);

    // raw argmax end sits 39 - 0 > 30 positions away: span cap binds
    auto far = Tensor<double>::zeros({s, h});
    setv(far, 0, 0, 10.0);
    setv(far, 39, 1, 10.0);
    setv(far, 30, 1, 1.0);
    auto [st3, en3] = head.decode(far, s);
    CHECK(en3 - st3 <= 30);
    CHECK(st3 == 0);
    CHECK(en3 == 30);
}

TEST_CASE("span head label contracts") {
    const int64_t h = 4, s = 6;
    ParamStore<double> ps(3);
    SpanHead<double> head(ps, "span", h, false);
    Pcg32 rng(20);
    auto hidden = randn(rng, {s, h});
    CHECK_THROWS_AS(head.loss(hidden, s, -1, 2), ContractError);
    CHECK_THROWS_AS(head.loss(hidden, s, 4, 2), ContractError);
    CHECK_THROWS_AS(head.loss(hidden, s, 2, 6), ContractError);
    CHECK_NOTHROW(head.loss(hidden, s, 2, 2));
}

TEST_CASE("span decoder stacks exactly two projected recurrent layers") {
    const int64_t h = 4;
    ParamStore<double> ps(31);
    SpanHead<double> head(ps, "span", h, true);
    CHECK(head.decoder.has_value());
    CHECK(ps.has("span.decoder.l1.fwd.wx"));
    CHECK(ps.has("span.decoder.l1.proj.w"));
    CHECK(ps.has("span.decoder.l2.bwd.wh"));
    CHECK(!ps.has("span.decoder.l3.fwd.wx"));
    // full width: each direction h wide, projection 2h -> h
    CHECK(ps.get("span.decoder.l1.fwd.wx").dim(1) == 4 * h);
    CHECK(ps.get("span.decoder.l1.proj.w").dim(0) == 2 * h);
    CHECK(ps.get("span.decoder.l1.proj.w").dim(1) == h);

    Pcg32 rng(21);
    auto hidden = randn(rng, {5, h});
    auto out = head.decoder->forward(hidden, 5);
    CHECK(out.dim(0) == 5);
    CHECK(out.dim(1) == h);
}

TEST_CASE("span loss through the recurrent decoder passes finite differences") {
    const int64_t h = 4, s = 3;
    ParamStore<double> ps(37);
    SpanHead<double> head(ps, "span", h, true);
    Pcg32 rng(22);
    auto hidden = randn(rng, {s, h});

    std::vector<Tensor<double>> inputs = {hidden};
    for (const auto& [name, entry] : ps.entries()) inputs.push_back(entry.tensor);
    auto res = check_gradients(
        inputs, [&](const std::vector<Tensor<double>>& in) {
            return head.loss(in[0], s, 0, 2);
        });
    INFO(res.worst);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("pretrain model ties the output projection to the embedding table") {
    auto cfg = preset("toy");
    cfg.dropout = 0.0;
    Model<double> m(cfg, 42, Task::Pretrain);

    CHECK(m.mlm.has_value());
    CHECK(m.nsp.has_value());
    CHECK(!m.classifier.has_value());
    CHECK(!m.span.has_value());
    CHECK(m.mlm->tied_table.storage_id() == m.params.get("embed.token").storage_id());
    CHECK(m.params.has("mlm.bias"));
    CHECK(m.params.get("mlm.bias").dim(0) == cfg.vocab_size);
    // the table itself is registered once, under the embedding name only
    CHECK(!m.params.has("mlm.table"));

    // a masked-token loss alone sends gradient into the shared table
    std::vector<int> ids = {2, 9, 17, 3, 25, 3};
    std::vector<int> segs = {0, 0, 0, 0, 1, 1};
    Tape<double> tape;
    auto hidden = m.encode(ids, segs, 6);
    auto loss = m.mlm->loss(hidden, {1, 4}, {30, 31});
    tape.backward(loss);
    auto g = m.params.get("embed.token").grad();
    double total = 0.0;
    for (double v : g) total += std::abs(v);
    CHECK(total > 0.0);
}

TEST_CASE("task selection builds exactly the heads the task needs") {
    auto cfg = preset("toy");
    Model<double> cls(cfg, 1, Task::Classify, 4);
    CHECK(cls.classifier.has_value());
    CHECK(cls.classifier->num_classes == 4);
    CHECK(!cls.mlm.has_value());
    CHECK(!cls.span.has_value());

    cfg.decoder_mode = DecoderMode::Linear;
    Model<double> sp_lin(cfg, 1, Task::Span);
    CHECK(sp_lin.span.has_value());
    CHECK(!sp_lin.span->decoder.has_value());

    cfg.decoder_mode = DecoderMode::Blstm2;
    Model<double> sp_rec(cfg, 1, Task::Span);
    CHECK(sp_rec.span->decoder.has_value());
}

TEST_CASE("pretraining losses run end to end through a toy encoder") {
    auto cfg = preset("toy");
    cfg.dropout = 0.0;
    Model<double> m(cfg, 7, Task::Pretrain);

    std::vector<int> ids = {2, 9, 4, 3, 25, 3};
    std::vector<int> segs = {0, 0, 0, 0, 1, 1};
    Tape<double> tape;
    auto hidden = m.encode(ids, segs, 6);
    auto mlm = m.mlm->loss(hidden, {2}, {40});
    auto nsp = m.nsp->loss(hidden, 1);
    auto total = ops::add(mlm, nsp);
    CHECK(std::isfinite(total.item()));
    CHECK(mlm.item() > 0.0);
    CHECK(nsp.item() > 0.0);
    tape.backward(total);
    auto g = m.params.get("layer0.attn.wq.w").grad();
    double sum = 0.0;
    for (double v : g) sum += std::abs(v);
    CHECK(sum > 0.0);
}
