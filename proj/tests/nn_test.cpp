#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "offrec/checkpoint.hpp"
#include "offrec/grad_check.hpp"
#include "offrec/graph.hpp"
#include "offrec/layers.hpp"

using namespace offrec;
using namespace offrec::nn;

TEST_CASE("dense_forward identity") {
    Graph g;
    Ref x = g.input(Tensor::matrix(1, 2, {1, 0}));
    Ref w = g.input(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    Ref b = g.input(Tensor::row({0, 0}));
    Ref y = dense_forward(g, x, w, b);
    CHECK(g.value(y)(0, 0) == doctest::Approx(1.0));
    CHECK(g.value(y)(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("dense_forward zero input passes bias") {
    Graph g;
    Ref x = g.input(Tensor::matrix(1, 2, {0, 0}));
    Ref w = g.input(Tensor::matrix(2, 2, {5, -2, 7, 3}));
    Ref b = g.input(Tensor::row({3, 4}));
    Ref y = dense_forward(g, x, w, b);
    CHECK(g.value(y)(0, 0) == doctest::Approx(3.0));
    CHECK(g.value(y)(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("dense_forward hand matrix multiply") {
    Graph g;
    Ref x = g.input(Tensor::matrix(1, 2, {1, 2}));
    Ref w = g.input(Tensor::matrix(2, 2, {1, 1, 1, 1}));
    Ref b = g.input(Tensor::row({0, 0}));
    Ref y = dense_forward(g, x, w, b);
    CHECK(g.value(y)(0, 0) == doctest::Approx(3.0));
    CHECK(g.value(y)(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("dense_forward shape mismatch throws") {
    Graph g;
    Ref x = g.input(Tensor::matrix(1, 3, {1, 2, 3}));
    Ref w = g.input(Tensor::matrix(2, 2, {1, 1, 1, 1}));
    Ref b = g.input(Tensor::row({0, 0}));
    CHECK_THROWS_AS(dense_forward(g, x, w, b), DimensionError);
}

TEST_CASE("gru_cell zero everything is a fixed point") {
    ParamStore store;
    store.create("gru.Wzr", 3 + 2, 4);
    store.create("gru.bzr", 1, 4);
    store.create("gru.Wn", 3 + 2, 2);
    store.create("gru.bn", 1, 2);
    Graph g;
    Ref x = g.input(Tensor(1, 3));
    Ref h = g.input(Tensor(1, 2));
    Ref out = gru_cell(g, x, h, store, "gru");
    CHECK(g.value(out)(0, 0) == doctest::Approx(0.0));
    CHECK(g.value(out)(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("gru_cell saturated update gate returns candidate") {
    Rng rng(7);
    ParamStore store;
    gru_init(store, "gru", 2, 2, 0.3, rng);
    // saturate the update-gate half of bzr
    Tensor& bzr = store.value("gru.bzr");
    bzr.values[0] = 50.0;
    bzr.values[1] = 50.0;

    Graph g;
    Tensor xin = Tensor::matrix(1, 2, {0.4, -0.7});
    Tensor hin = Tensor::matrix(1, 2, {0.2, 0.1});
    Ref x = g.input(xin);
    Ref h = g.input(hin);
    Ref out = gru_cell(g, x, h, store, "gru");

    // hand-compute the candidate with the same reset gate
    const Tensor& Wzr = store.value("gru.Wzr");
    const Tensor& Wn = store.value("gru.Wn");
    const Tensor& bn = store.value("gru.bn");
    double xh[4] = {xin(0, 0), xin(0, 1), hin(0, 0), hin(0, 1)};
    double r[2];
    for (int j = 0; j < 2; ++j) {
        double pre = bzr.values[2 + j];
        for (int i = 0; i < 4; ++i) pre += xh[i] * Wzr(i, 2 + j);
        r[j] = 1.0 / (1.0 + std::exp(-pre));
    }
    double xrh[4] = {xin(0, 0), xin(0, 1), r[0] * hin(0, 0), r[1] * hin(0, 1)};
    for (int j = 0; j < 2; ++j) {
        double pre = bn.values[j];
        for (int i = 0; i < 4; ++i) pre += xrh[i] * Wn(i, j);
        double cand = std::tanh(pre);
        CHECK(g.value(out)(0, j) == doctest::Approx(cand).epsilon(1e-9));
    }
}

TEST_CASE("gru_cell outputs stay in (-1, 1)") {
    Rng rng(11);
    ParamStore store;
    gru_init(store, "gru", 3, 4, 2.0, rng);
    Graph g;
    Tensor xin(2, 3);
    Tensor hin(2, 4);
    for (double& v : xin.values) v = rng.uniform(-3, 3);
    for (double& v : hin.values) v = rng.uniform(-0.9, 0.9);
    Ref out = gru_cell(g, g.input(xin), g.input(hin), store, "gru");
    for (double v : g.value(out).values) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("gru_cell gradient matches finite differences") {
    Rng rng(13);
    ParamStore store;
    gru_init(store, "gru", 2, 3, 0.4, rng);
    Tensor xin(2, 2);
    Tensor hin(2, 3);
    for (double& v : xin.values) v = rng.uniform(-1, 1);
    for (double& v : hin.values) v = rng.uniform(-0.5, 0.5);

    auto loss_fn = [&](ParamStore& s) {
        Graph g;
        Ref out = gru_cell(g, g.input(xin), g.input(hin), s, "gru");
        Ref loss = g.sum_all(out);
        g.backward(loss);
        return g.scalar_value(loss);
    };
    CHECK(grad_check(loss_fn, store, 1e-5) < 1e-4);
}

TEST_CASE("adam_step zero grads leaves parameters, bumps counter") {
    ParamStore store;
    store.create("p", Tensor::row({1.0, -2.0}));
    store.at("p").has_grad = true;  // populated, all-zero grad
    store.adam_step(0.1);
    CHECK(store.value("p").values[0] == doctest::Approx(1.0));
    CHECK(store.value("p").values[1] == doctest::Approx(-2.0));
    CHECK(store.step_count() == 1);
}

TEST_CASE("adam_step first update is lr-sized after bias correction") {
    ParamStore store;
    store.create("p", Tensor::scalar(0.0));
    store.accumulate_grad("p", Tensor::scalar(1.0));
    store.adam_step(0.1);
    CHECK(store.value("p").values[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam_step missing grad is a usage error") {
    ParamStore store;
    store.create("p", Tensor::scalar(0.0));
    CHECK_THROWS_AS(store.adam_step(0.1), UsageError);
}

TEST_CASE("adam runs are bitwise deterministic") {
    auto run = [] {
        Rng rng(42);
        ParamStore store;
        store.create_uniform("w", 3, 3, 0.5, rng);
        for (int step = 0; step < 20; ++step) {
            Graph g;
            Ref w = g.param(store, "w");
            Ref loss = g.mean_all(g.square(w));
            g.backward(loss);
            store.adam_step(1e-2);
        }
        return store.value("w").values;
    };
    auto a = run();
    auto b = run();
    CHECK(a == b);
}

TEST_CASE("grad_check quadratic loss is exact to rounding") {
    Rng rng(3);
    ParamStore store;
    store.create_uniform("p", 2, 3, 1.0, rng);
    auto loss_fn = [](ParamStore& s) {
        Graph g;
        Ref p = g.param(s, "p");
        Ref loss = g.sum_all(g.square(p));
        g.backward(loss);
        return g.scalar_value(loss);
    };
    CHECK(grad_check(loss_fn, store, 1e-5) < 1e-8);
}

TEST_CASE("log_softmax is shift invariant and stable") {
    Graph g;
    Ref a = g.input(Tensor::matrix(1, 3, {1, 0, 0}));
    Ref b = g.input(Tensor::matrix(1, 3, {1001, 1000, 1000}));
    Ref la = g.log_softmax_rows(a);
    Ref lb = g.log_softmax_rows(b);
    for (int c = 0; c < 3; ++c)
        CHECK(g.value(la)(0, c) == doctest::Approx(g.value(lb)(0, c)).epsilon(1e-12));
    // hand softmax: exp(1)/(exp(1)+2) etc.
    double z = std::exp(1.0) + 2.0;
    CHECK(std::exp(g.value(la)(0, 0)) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
    CHECK(std::exp(g.value(la)(0, 1)) == doctest::Approx(1.0 / z).epsilon(1e-12));
}

TEST_CASE("logsumexp matches direct computation and gradients flow") {
    ParamStore store;
    store.create("x", Tensor::matrix(1, 3, {0.3, -1.2, 2.0}));
    auto loss_fn = [](ParamStore& s) {
        Graph g;
        Ref x = g.param(s, "x");
        Ref loss = g.sum_all(g.logsumexp_rows(x));
        g.backward(loss);
        return g.scalar_value(loss);
    };
    double direct = std::log(std::exp(0.3) + std::exp(-1.2) + std::exp(2.0));
    ParamStore probe = store.clone_values();
    Graph g;
    Ref v = g.logsumexp_rows(g.param(probe, "x"));
    CHECK(g.scalar_value(v) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(grad_check(loss_fn, store, 1e-6) < 1e-8);
}

TEST_CASE("composite graph gradient: softmax cross-entropy") {
    Rng rng(5);
    ParamStore store;
    store.create_uniform("fc.W", 4, 3, 0.8, rng);
    store.create_uniform("fc.b", 1, 3, 0.1, rng);
    Tensor x(2, 4);
    for (double& v : x.values) v = rng.uniform(-1, 1);
    std::vector<int> labels = {2, 0};
    auto loss_fn = [&](ParamStore& s) {
        Graph g;
        Ref logits = dense_forward(g, g.input(x), s, "fc");
        Ref lp = g.log_softmax_rows(logits);
        Ref picked = g.gather_cols(lp, labels);
        Ref loss = g.scale(g.mean_all(picked), -1.0);
        g.backward(loss);
        return g.scalar_value(loss);
    };
    CHECK(grad_check(loss_fn, store, 1e-5) < 1e-6);
}

TEST_CASE("checkpoint round trip preserves names, shapes, bits") {
    Rng rng(9);
    ParamStore store;
    store.create_uniform("enc.W", 5, 4, 1.0, rng);
    store.create_uniform("head.b", 1, 7, 2.0, rng);
    auto path = std::filesystem::temp_directory_path() / "offrec_ckpt_test.orec";
    save_checkpoint(store, path.string());
    ParamStore back = load_checkpoint(path.string());
    REQUIRE(back.count() == 2);
    CHECK(back.value("enc.W").shape == store.value("enc.W").shape);
    CHECK(back.value("enc.W").values == store.value("enc.W").values);
    CHECK(back.value("head.b").values == store.value("head.b").values);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects corrupt magic") {
    auto path = std::filesystem::temp_directory_path() / "offrec_ckpt_bad.orec";
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        std::fputs("NOTACKPT", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("embedding lookup scatter gradients") {
    ParamStore store;
    store.create("emb", Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
    Graph g;
    Ref e = g.embedding(store, "emb", {2, 0, 2});
    CHECK(g.value(e)(0, 0) == doctest::Approx(5));
    CHECK(g.value(e)(2, 1) == doctest::Approx(6));
    Ref loss = g.sum_all(e);
    g.backward(loss);
    const Tensor& grad = store.at("emb").grad;
    CHECK(grad(0, 0) == doctest::Approx(1));  // used once
    CHECK(grad(1, 0) == doctest::Approx(0));  // unused
    CHECK(grad(2, 0) == doctest::Approx(2));  // used twice
}

TEST_CASE("rng streams are independent of sibling consumption") {
    Rng a = Rng::stream(123, "actor");
    Rng b = Rng::stream(123, "critic");
    double a1 = a.uniform();
    Rng a2 = Rng::stream(123, "actor");
    (void)b.uniform();
    (void)b.uniform();
    CHECK(a2.uniform() == a1);
}
