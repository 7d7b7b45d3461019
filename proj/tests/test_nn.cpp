#include <cstring>

#include <catch2/catch_amalgamated.hpp>

#include "dif/model.hpp"
#include "dif/nn.hpp"

using namespace dif;
using Catch::Approx;

namespace {

Mlp identity_net(int dim) {
    Rng rng(0);
    Mlp m = Mlp::make({dim, dim}, {Activation::Identity}, rng);
    for (auto& x : m.layers[0].w) x = 0.0;
    for (int i = 0; i < dim; ++i) m.layers[0].w[i * dim + i] = 1.0;
    std::fill(m.layers[0].b.begin(), m.layers[0].b.end(), 0.0);
    return m;
}

bool params_equal(const Mlp& a, const Mlp& b) {
    auto fa = flatten_params(a), fb = flatten_params(b);
    return fa.size() == fb.size() &&
           std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("forward: identity and relu behavior", "[nn]") {
    Mlp id = identity_net(3);
    auto [y, cache] = mlp_forward(id, {1.0, -2.0, 3.0});
    CHECK(y == std::vector<double>{1.0, -2.0, 3.0});

    Rng rng(1);
    Mlp relu = Mlp::make({3, 3}, {Activation::Relu}, rng);
    for (auto& x : relu.layers[0].w) x = 0.0;
    for (int i = 0; i < 3; ++i) relu.layers[0].w[i * 3 + i] = 1.0;
    std::fill(relu.layers[0].b.begin(), relu.layers[0].b.end(), 0.0);
    auto [yr, cr] = mlp_forward(relu, {1.0, -2.0, 3.0});
    CHECK(yr == std::vector<double>{1.0, 0.0, 3.0});
}

TEST_CASE("forward matches an independent straight-line re-evaluation", "[nn][oracle]") {
    Rng rng(77);
    Mlp net = Mlp::make({4, 5, 3}, {Activation::Tanh, Activation::Identity}, rng);
    std::vector<double> x = {0.3, -0.8, 1.2, 0.05};
    auto [y, cache] = mlp_forward(net, x);

    // plain re-evaluation against the same parameters
    std::vector<double> h(5, 0.0);
    for (int o = 0; o < 5; ++o) {
        double acc = net.layers[0].b[o];
        for (int i = 0; i < 4; ++i) acc += net.layers[0].w[o * 4 + i] * x[i];
        h[o] = std::tanh(acc);
    }
    for (int o = 0; o < 3; ++o) {
        double acc = net.layers[1].b[o];
        for (int i = 0; i < 5; ++i) acc += net.layers[1].w[o * 5 + i] * h[i];
        CHECK(y[o] == Approx(acc).margin(1e-14));
    }
}

TEST_CASE("backward: linear outer-product case", "[nn]") {
    Rng rng(5);
    Mlp net = Mlp::make({3, 2}, {Activation::Identity}, rng);
    std::vector<double> x = {0.5, -1.0, 2.0};
    std::vector<double> dy = {2.0, -3.0};
    auto [y, cache] = mlp_forward(net, x);
    auto [grads, dx] = mlp_backward(net, cache, dy);
    for (int o = 0; o < 2; ++o)
        for (int i = 0; i < 3; ++i) CHECK(grads.dw[0][o * 3 + i] == Approx(dy[o] * x[i]).margin(1e-15));
    CHECK(grads.db[0][0] == 2.0);
    CHECK(grads.db[0][1] == -3.0);
}

TEST_CASE("backward: zero output gradient gives zero parameter gradients", "[nn]") {
    Rng rng(6);
    Mlp net = Mlp::make({4, 8, 2}, {Activation::Relu, Activation::Identity}, rng);
    auto [y, cache] = mlp_forward(net, {0.1, 0.2, 0.3, 0.4});
    auto [grads, dx] = mlp_backward(net, cache, {0.0, 0.0});
    for (const auto& v : grads.dw)
        for (double g : v) CHECK(g == 0.0);
    for (const auto& v : grads.db)
        for (double g : v) CHECK(g == 0.0);
}

TEST_CASE("backward rejects mismatched cache", "[nn]") {
    Rng rng(8);
    Mlp a = Mlp::make({3, 4, 1}, {Activation::Relu, Activation::Identity}, rng);
    Mlp b = Mlp::make({5, 4, 1}, {Activation::Relu, Activation::Identity}, rng);
    auto [y, cache] = mlp_forward(a, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(mlp_backward(b, cache, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mlp_forward(a, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("gradient check passes on fresh networks", "[nn][oracle]") {
    Rng rng(9);
    Mlp net = Mlp::make({4, 16, 16, 2}, {Activation::Relu, Activation::Relu, Activation::Identity},
                        rng);
    std::vector<double> x = {0.3, -0.2, 0.9, -0.5};
    GradCheckReport rep = grad_check(net, x, 1e-4);
    INFO(rep.worst_coordinate);
    CHECK(rep.pass);
    CHECK(rep.max_rel_err < 1e-4);

    GradCheckReport id_rep = grad_check(identity_net(3), {0.4, -0.7, 0.2}, 1e-4);
    CHECK(id_rep.max_rel_err < 1e-9);
}

TEST_CASE("gradient checker flags a corrupted backward", "[nn]") {
    Rng rng(10);
    Mlp net = Mlp::make({3, 8, 1}, {Activation::Tanh, Activation::Identity}, rng);
    std::vector<double> x = {0.2, 0.4, -0.6};
    std::vector<double> dy = {1.0};
    auto [y, cache] = mlp_forward(net, x);
    auto [grads, dx] = mlp_backward(net, cache, dy);
    MlpGrads fd = fd_gradients(net, x, dy);

    // sign-flip one substantial coordinate and re-compare
    std::size_t worst = 0;
    for (std::size_t i = 0; i < grads.dw[0].size(); ++i)
        if (std::abs(grads.dw[0][i]) > std::abs(grads.dw[0][worst])) worst = i;
    REQUIRE(std::abs(grads.dw[0][worst]) > 1e-3);
    grads.dw[0][worst] = -grads.dw[0][worst];

    double max_err = 0;
    for (std::size_t i = 0; i < grads.dw[0].size(); ++i)
        max_err = std::max(max_err, scaled_rel_err(grads.dw[0][i], fd.dw[0][i]));
    CHECK(max_err > 1e-4); // corruption detected
}

TEST_CASE("all three artifact architectures pass the gradient check", "[nn][oracle]") {
    Rng rng(11);
    Mlp predictor = make_predictor(rng);
    Mlp rectifier = make_rectifier(rng);
    // exercise the rectifier with a non-degenerate final layer too
    Mlp rectifier_live = Mlp::make({10, 64, 64, 1},
                                   {Activation::Relu, Activation::Relu, Activation::Identity}, rng);
    Mlp baseline = make_baseline(rng);

    std::vector<double> f7 = {0.1, 0.7, -0.7, 0.2, -0.9, 0.3, 0.05};
    std::vector<double> f10 = {0.4, 0.5, 0.3, 0.1, 0.7, -0.7, 0.2, -0.9, 0.3, 0.05};

    CHECK(grad_check(predictor, f7, 1e-4).pass);
    CHECK(grad_check(rectifier, f10, 1e-4).pass);
    CHECK(grad_check(rectifier_live, f10, 1e-4).pass);
    CHECK(grad_check(baseline, f7, 1e-4).pass);
}

TEST_CASE("adam: zero gradients leave parameters untouched", "[nn]") {
    Rng rng(12);
    Mlp net = Mlp::make({2, 4, 1}, {Activation::Relu, Activation::Identity}, rng);
    Mlp before = net;
    AdamState st = AdamState::init(net);
    adam_step_inplace(st, net, MlpGrads::zeros_like(net));
    CHECK(params_equal(net, before));
}

TEST_CASE("adam: first step moves by about lr in the gradient sign", "[nn]") {
    Rng rng(13);
    Mlp net = Mlp::make({1, 1}, {Activation::Identity}, rng);
    double before = net.layers[0].w[0];
    AdamHyper hp;
    hp.lr = 1e-4;
    AdamState st = AdamState::init(net, hp);
    MlpGrads g = MlpGrads::zeros_like(net);
    g.dw[0][0] = 0.5;
    adam_step_inplace(st, net, g);
    CHECK(net.layers[0].w[0] == Approx(before - 1e-4).margin(1e-9));
}

TEST_CASE("adam trajectories are bitwise reproducible", "[nn]") {
    auto run = [] {
        Rng rng(14);
        Mlp net = Mlp::make({3, 8, 1}, {Activation::Tanh, Activation::Identity}, rng);
        AdamState st = AdamState::init(net);
        Rng grng(15);
        for (int step = 0; step < 25; ++step) {
            MlpGrads g = MlpGrads::zeros_like(net);
            for (auto& v : g.dw)
                for (auto& x : v) x = grng.normal();
            for (auto& v : g.db)
                for (auto& x : v) x = grng.normal();
            adam_step_inplace(st, net, g);
        }
        return net;
    };
    CHECK(params_equal(run(), run()));
}

TEST_CASE("pure adam_step agrees with the in-place variant", "[nn]") {
    Rng rng(16);
    Mlp net = Mlp::make({2, 3, 1}, {Activation::Relu, Activation::Identity}, rng);
    AdamState st = AdamState::init(net);
    MlpGrads g = MlpGrads::zeros_like(net);
    g.dw[0][0] = 1.0;
    g.db[1][0] = -2.0;

    auto [net2, st2] = adam_step(st, net, g);
    adam_step_inplace(st, net, g);
    CHECK(params_equal(net, net2));
    CHECK(st.step == st2.step);
}

TEST_CASE("reparameterized sampling", "[nn]") {
    OccDistribution d{0.5, 0.6};
    CHECK(reparam_sample(d, 0.0) == 0.5);
    CHECK(reparam_sample(d, 1.0) == Approx(1.1).margin(1e-12));

    Rng rng(17);
    double sum = 0, sq = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double s = reparam_sample(d, rng.normal());
        sum += s;
        sq += s * s;
    }
    double mean = sum / n;
    double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean - d.mu) / d.mu < 0.01);
    CHECK(std::abs(sd - d.sigma) / d.sigma < 0.01);
}

TEST_CASE("reparameterization gradient contract via finite differences", "[nn]") {
    double eps = 0.73;
    double h = 1e-6;
    OccDistribution d{0.4, 0.3};
    double dmu_fd =
        (reparam_sample({d.mu + h, d.sigma}, eps) - reparam_sample({d.mu - h, d.sigma}, eps)) /
        (2 * h);
    double dsig_fd =
        (reparam_sample({d.mu, d.sigma + h}, eps) - reparam_sample({d.mu, d.sigma - h}, eps)) /
        (2 * h);
    CHECK(dmu_fd == Approx(1.0).epsilon(1e-6));
    CHECK(dsig_fd == Approx(eps).epsilon(1e-6));
}

TEST_CASE("param flattening round-trips", "[nn]") {
    Rng rng(18);
    Mlp net = Mlp::make({3, 5, 2}, {Activation::Relu, Activation::Identity}, rng);
    std::vector<double> flat = flatten_params(net);
    Mlp other = Mlp::make({3, 5, 2}, {Activation::Relu, Activation::Identity}, rng);
    assign_params(other, flat);
    CHECK(params_equal(net, other));
    CHECK_THROWS_AS(assign_params(other, std::vector<double>(3, 0.0)), std::invalid_argument);
}
