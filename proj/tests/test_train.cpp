#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "jrlab/errors.hpp"
#include "jrlab/grad.hpp"
#include "jrlab/jacreg.hpp"
#include "jrlab/loss.hpp"
#include "jrlab/train.hpp"

using namespace jrlab;
using namespace jrlab::testing;

namespace {

bool models_identical(const Mlp& a, const Mlp& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weight.data != b.layers[l].weight.data) return false;
        if (a.layers[l].bias.data != b.layers[l].bias.data) return false;
    }
    return true;
}

TrainConfig quick_config() {
    TrainConfig cfg;
    cfg.eta0 = 0.05;
    cfg.total_iters = 60;
    cfg.quench_every = 1000;
    cfg.full_batch = true;
    cfg.log_every = 20;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("per-class subsampling is balanced, seeded, and label-faithful") {
    Dataset ds = tiny_blobs(3, 8, 10, 55);
    Dataset s1 = subsample_per_class(ds, 4, 99);
    Dataset s2 = subsample_per_class(ds, 4, 99);
    Dataset s3 = subsample_per_class(ds, 4, 100);
    REQUIRE(s1.size() == 12);
    CHECK(s1.classes == 3);
    CHECK(s1.pre.mean == ds.pre.mean);
    s1.validate();
    CHECK(models_identical(linear_model(s1.images), linear_model(s2.images)));
    CHECK(s1.labels == s2.labels);
    bool differs = s1.labels != s3.labels;
    for (std::size_t i = 0; i < s1.images.size() && !differs; ++i)
        differs = s1.images.data[i] != s3.images.data[i];
    CHECK(differs);

    std::vector<int> counts(3, 0);
    for (int y : s1.labels) counts[static_cast<std::size_t>(y)]++;
    for (int c : counts) CHECK(c == 4);

    // every sampled row is a verbatim row of the source with its label
    for (std::size_t i = 0; i < s1.size(); ++i) {
        bool found = false;
        for (std::size_t j = 0; j < ds.size() && !found; ++j) {
            if (ds.labels[j] != s1.labels[i]) continue;
            bool same = true;
            for (std::size_t c = 0; c < ds.width() && same; ++c)
                same = ds.images.at(j, c) == s1.images.at(i, c);
            found = same;
        }
        CHECK(found);
    }

    CHECK_THROWS_AS(subsample_per_class(ds, 0, 1), ConfigError);
    CHECK_THROWS_AS(subsample_per_class(ds, 11, 1), DataError);
}

TEST_CASE("subsampling exactly one per class") {
    Dataset ds = tiny_blobs(4, 8, 3, 56);
    Dataset one = subsample_per_class(ds, 1, 7);
    REQUIRE(one.size() == 4);
    std::vector<int> seen(4, 0);
    for (int y : one.labels) seen[static_cast<std::size_t>(y)]++;
    for (int c : seen) CHECK(c == 1);
}

TEST_CASE("sgd step without momentum is plain decayed descent") {
    Mlp model = linear_model(Tensor::from({1, 2}, {1.0, -2.0}), Tensor::from({1}, {0.5}));
    ParamGrads vel = ParamGrads::zeros_like(model);
    ParamGrads g = ParamGrads::zeros_like(model);
    g.weight[0].data = {0.2, -0.4};
    g.bias[0].data = {1.0};
    sgd_step(model, vel, g, 0.1, 0.0, 0.0);
    CHECK(model.layers[0].weight.data[0] == doctest::Approx(1.0 - 0.1 * 0.2).epsilon(1e-15));
    CHECK(model.layers[0].weight.data[1] == doctest::Approx(-2.0 + 0.1 * 0.4).epsilon(1e-15));
    CHECK(model.layers[0].bias.data[0] == doctest::Approx(0.5 - 0.1).epsilon(1e-15));
}

TEST_CASE("momentum compounds the previous velocity") {
    Mlp model = linear_model(Tensor::from({1, 1}, {0.0}));
    ParamGrads vel = ParamGrads::zeros_like(model);
    ParamGrads g = ParamGrads::zeros_like(model);
    g.weight[0].data = {1.0};
    sgd_step(model, vel, g, 0.1, 0.9, 0.0);  // v = -0.1,   w = -0.1
    sgd_step(model, vel, g, 0.1, 0.9, 0.0);  // v = -0.19,  w = -0.29
    CHECK(model.layers[0].weight.data[0] == doctest::Approx(-0.29).epsilon(1e-14));
    CHECK(vel.weight[0].data[0] == doctest::Approx(-0.19).epsilon(1e-14));
}

TEST_CASE("weight decay shrinks weights and biases alike") {
    Mlp model = linear_model(Tensor::from({1, 1}, {2.0}), Tensor::from({1}, {-4.0}));
    ParamGrads vel = ParamGrads::zeros_like(model);
    ParamGrads g = ParamGrads::zeros_like(model);  // zero task gradient
    sgd_step(model, vel, g, 0.1, 0.0, 0.5);
    // theta' = theta (1 - eta lambda)
    CHECK(model.layers[0].weight.data[0] == doctest::Approx(2.0 * 0.95).epsilon(1e-15));
    CHECK(model.layers[0].bias.data[0] == doctest::Approx(-4.0 * 0.95).epsilon(1e-15));

    ParamGrads wrong;
    CHECK_THROWS_AS(sgd_step(model, vel, wrong, 0.1, 0.0, 0.0), DimensionError);
}

TEST_CASE("learning rate quenches tenfold on schedule") {
    TrainConfig cfg;
    cfg.eta0 = 0.5;
    cfg.quench_every = 10;
    CHECK(lr_at(cfg, 0) == 0.5);
    CHECK(lr_at(cfg, 9) == 0.5);
    CHECK(lr_at(cfg, 10) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(lr_at(cfg, 19) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(lr_at(cfg, 25) == doctest::Approx(0.005).epsilon(1e-15));
}

TEST_CASE("adversarial augmentation respects budget and crop") {
    Mlp model = random_tanh({4, 6, 3}, 61);
    Tensor raw = Tensor::from({2, 4}, {0.0, 0.2, 0.9, 1.0, 0.5, 0.01, 0.99, 0.4});
    std::vector<int> labels = {0, 2};
    Preprocess pre;  // canonical stats

    Rng rng(62);
    Tensor same = fgsm_augment(raw, labels, model, pre, 0.0, rng);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(same.data[i] == raw.data[i]);

    const double eps_max = 0.3;
    Tensor adv = fgsm_augment(raw, labels, model, pre, eps_max, rng);
    bool moved = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(adv.data[i] >= 0.0);
        CHECK(adv.data[i] <= 1.0);
        // displacement before cropping is at most eps_max per pixel
        CHECK(std::fabs(adv.data[i] - raw.data[i]) <= eps_max + 1e-15);
        if (adv.data[i] != raw.data[i]) moved = true;
    }
    CHECK(moved);

    Rng r2(63);
    CHECK_THROWS_AS(fgsm_augment(raw, labels, model, pre, -0.1, r2), ConfigError);
    std::vector<int> short_labels = {0};
    CHECK_THROWS_AS(fgsm_augment(raw, short_labels, model, pre, 0.1, r2), DimensionError);
}

TEST_CASE("joint objective gradient matches finite differences") {
    Mlp model = random_tanh({4, 6, 3}, 65);
    Tensor X = random_batch(3, 4, 66);
    std::vector<int> labels = {0, 2, 1};

    TrainConfig cfg;
    cfg.lambda_jr = 0.7;
    cfg.n_proj = 2;

    SUBCASE("estimated penalty, no dropout") {}
    SUBCASE("exact penalty, no dropout") { cfg.exact_reg = true; }
    SUBCASE("estimated penalty with dropout") {
        cfg.dropout_rate = 0.4;
        model.layers[1].dropout_input = true;
    }

    Rng drop(70), proj(71);
    Rng drop_probe = drop, proj_probe = proj;
    ParamGrads got = ParamGrads::zeros_like(model);
    StepOutcome out = joint_loss_and_grads(model, X, labels, cfg, drop, proj, got);
    CHECK(std::isfinite(out.joint_loss));
    CHECK(out.joint_loss
          == doctest::Approx(out.supervised_loss + 0.5 * cfg.lambda_jr * out.reg_value)
                 .epsilon(1e-14));

    ParamGrads want = finite_diff_param_grads(model, [&](const Mlp& m) {
        Rng d = drop_probe, p = proj_probe;
        ParamGrads scratch = ParamGrads::zeros_like(m);
        return joint_loss_and_grads(m, X, labels, cfg, d, p, scratch).joint_loss;
    });
    CHECK(grad_max_rel_error(got, want) < 1e-5);
}

TEST_CASE("regularizer ignores the dropout mask") {
    // With dropout active the penalty is evaluated on a fresh clean trace:
    // its value must equal the exact clean-graph penalty.
    Mlp model = random_tanh({4, 5, 3}, 72);
    model.layers[1].dropout_input = true;
    Tensor X = random_batch(4, 4, 73);
    std::vector<int> labels = {0, 1, 2, 0};

    TrainConfig cfg;
    cfg.lambda_jr = 1.0;
    cfg.exact_reg = true;
    cfg.dropout_rate = 0.5;

    Rng drop(74), proj(75);
    ParamGrads scratch = ParamGrads::zeros_like(model);
    StepOutcome out = joint_loss_and_grads(model, X, labels, cfg, drop, proj, scratch);
    JacobianResult clean = jacreg_exact(model, X);
    CHECK(out.reg_value == doctest::Approx(clean.value).epsilon(1e-14));
}

TEST_CASE("training fits small synthetic blobs") {
    Dataset train_ds = tiny_blobs(3, 8, 7, 80);
    Dataset test_ds = tiny_blobs(3, 8, 5, 81);
    Mlp model = xavier_init({64, 16, 3}, Activation::Tanh, 5);

    TrainConfig cfg;
    cfg.eta0 = 0.05;
    cfg.total_iters = 300;
    cfg.quench_every = 200;
    cfg.full_batch = true;
    cfg.momentum = 0.9;
    cfg.lambda_jr = 0.01;
    cfg.n_proj = 1;
    cfg.log_every = 50;
    cfg.seed = 3;

    TrainResult res = train(model, train_ds, cfg, &test_ds);
    CHECK(test_accuracy(res.model, train_ds) >= 90.0);

    REQUIRE(res.history.rows.size() >= 3);
    CHECK(res.history.rows.front().loss > res.history.rows.back().loss);
    CHECK(res.history.train_size == 21);
    for (const HistoryRow& row : res.history.rows) {
        CHECK(std::isfinite(row.loss));
        CHECK(row.reg_value >= 0.0);
        CHECK(row.test_acc >= 0.0);
        CHECK(row.test_acc <= 100.0);
        CHECK(row.jf_norm >= 0.0);
    }
}

TEST_CASE("history rows follow the logging cadence") {
    Dataset ds = tiny_blobs(2, 8, 4, 82);
    Mlp model = xavier_init({64, 8, 2}, Activation::Tanh, 6);

    TrainConfig cfg = quick_config();
    cfg.total_iters = 25;
    cfg.log_every = 10;
    TrainResult res = train(model, ds, cfg, nullptr);

    REQUIRE(res.history.rows.size() == 4);
    CHECK(res.history.rows[0].iteration == 0);
    CHECK(res.history.rows[1].iteration == 10);
    CHECK(res.history.rows[2].iteration == 20);
    CHECK(res.history.rows[3].iteration == 25);
    // no test set: those columns are NaN, the rest are real
    for (const HistoryRow& row : res.history.rows) {
        CHECK(std::isnan(row.test_acc));
        CHECK(std::isnan(row.jf_norm));
        CHECK(std::isnan(row.reg_value));  // lambda_jr = 0
        CHECK(row.lr > 0.0);
    }
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    Dataset ds = tiny_blobs(2, 8, 6, 83);
    Mlp m1 = xavier_init({64, 8, 2}, Activation::Tanh, 9);
    Mlp m2 = xavier_init({64, 8, 2}, Activation::Tanh, 9);

    TrainConfig cfg = quick_config();
    cfg.full_batch = false;
    cfg.batch_size = 4;
    cfg.lambda_jr = 0.05;
    cfg.dropout_rate = 0.2;
    m1.layers[1].dropout_input = true;
    m2.layers[1].dropout_input = true;

    TrainResult r1 = train(m1, ds, cfg, nullptr);
    TrainResult r2 = train(m2, ds, cfg, nullptr);
    CHECK(models_identical(r1.model, r2.model));

    cfg.seed = 4;
    Mlp m3 = xavier_init({64, 8, 2}, Activation::Tanh, 9);
    TrainResult r3 = train(m3, ds, cfg, nullptr);
    CHECK(!models_identical(r1.model, r3.model));
}

TEST_CASE("penalty-free runs ignore projection settings") {
    Dataset ds = tiny_blobs(2, 8, 4, 84);
    TrainConfig cfg = quick_config();
    cfg.total_iters = 30;
    cfg.lambda_jr = 0.0;

    cfg.n_proj = 1;
    TrainResult a = train(xavier_init({64, 8, 2}, Activation::Tanh, 9), ds, cfg, nullptr);
    cfg.n_proj = 7;
    TrainResult b = train(xavier_init({64, 8, 2}, Activation::Tanh, 9), ds, cfg, nullptr);
    cfg.exact_reg = true;
    TrainResult c = train(xavier_init({64, 8, 2}, Activation::Tanh, 9), ds, cfg, nullptr);
    CHECK(models_identical(a.model, b.model));
    CHECK(models_identical(a.model, c.model));
}

TEST_CASE("per-class subsampling inside training shrinks the epoch") {
    Dataset ds = tiny_blobs(2, 8, 6, 85);
    TrainConfig cfg = quick_config();
    cfg.total_iters = 5;
    cfg.samples_per_class = 2;
    TrainResult res = train(xavier_init({64, 8, 2}, Activation::Tanh, 9), ds, cfg, nullptr);
    CHECK(res.history.train_size == 4);
}

TEST_CASE("divergence raises a typed error naming the iteration") {
    Dataset ds = tiny_blobs(2, 8, 3, 86);
    TrainConfig cfg = quick_config();
    cfg.eta0 = 1e200;
    cfg.lambda_wd = 1.0;
    cfg.total_iters = 50;
    try {
        train(xavier_init({64, 8, 2}, Activation::Tanh, 9), ds, cfg, nullptr);
        FAIL("expected divergence");
    } catch (const TrainDivergence& e) {
        CHECK(e.iteration < 50);
        CHECK(!std::isfinite(e.loss));
        CHECK(std::string(e.what()).find("diverged") != std::string::npos);
    }
}

TEST_CASE("config validation rejects out-of-range fields") {
    TrainConfig cfg;
    cfg.lambda_jr = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.eta0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.total_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.n_proj = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.exact_reg = true;  // n_proj unused on the exact path
    cfg.validate();
    cfg = TrainConfig{};
    cfg.dropout_rate = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.full_batch = true;  // batch_size unused when full-batch
    cfg.validate();
}

TEST_CASE("width mismatch between model and data is rejected") {
    Dataset ds = tiny_blobs(2, 8, 3, 87);
    TrainConfig cfg = quick_config();
    cfg.total_iters = 1;
    Mlp narrow = xavier_init({32, 4, 2}, Activation::Tanh, 9);
    CHECK_THROWS_AS(train(narrow, ds, cfg, nullptr), DimensionError);
}

TEST_CASE("accuracy and Jacobian summaries agree with first principles") {
    // identity model on one-hot rows: prediction equals the hot index
    Dataset ds;
    ds.images = Tensor::from({3, 3}, {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
    ds.labels = {0, 1, 2};
    ds.classes = 3;
    ds.pre = plain_pre();
    Mlp id = identity_model(3);
    CHECK(test_accuracy(id, ds) == 100.0);
    ds.labels = {0, 1, 1};
    CHECK(test_accuracy(id, ds) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(test_accuracy(id, ds, 2) == 100.0);

    // linear model: ||J||_F is constant, the mean is exact
    Tensor W = Tensor::from({2, 3}, {1.0, 2.0, -2.0, 0.5, 1.0, 0.0});
    Mlp lin = linear_model(W);
    double frob = 0.0;
    for (double v : W.data) frob += v * v;
    frob = std::sqrt(frob);
    CHECK(mean_jacobian_frobenius(lin, ds) == doctest::Approx(frob).epsilon(1e-12));

    // the summary measures the model-space Jacobian: preprocessing stats
    // move the evaluation points, not the linear map's derivative
    ds.pre.std_dev = 0.5;
    CHECK(mean_jacobian_frobenius(lin, ds) == doctest::Approx(frob).epsilon(1e-12));
}
