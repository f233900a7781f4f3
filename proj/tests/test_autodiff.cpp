#include <doctest.h>

#include <cmath>
#include <cstddef>

#include "lesionnet/autodiff.hpp"
#include "lesionnet/ops.hpp"
#include "lesionnet/rng.hpp"
#include "oracles.hpp"

using namespace lesionnet;
using test_support::central_diff;
using test_support::random_tensor;
using test_support::rel_err;

namespace {

// Compares every element of the analytic gradient for `leaf` against central
// differences of `eval`, which must recompute the loss from the same storage.
void check_grad_against_fd(const Tensor& analytic, Tensor& leaf, const std::function<double()>& eval,
                           double tol = 1e-6) {
    REQUIRE(analytic.shape == leaf.shape);
    for (std::size_t i = 0; i < leaf.size(); ++i) {
        const double numeric = central_diff(leaf.data[i], eval);
        CHECK_MESSAGE(rel_err(analytic.data[i], numeric) <= tol,
                      "element ", i, ": analytic=", analytic.data[i], " numeric=", numeric);
    }
}

}  // namespace

TEST_CASE("sum backward is all ones") {
    Graph g;
    const NodeId x = g.parameter(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), true);
    const NodeId loss = g.sum(x);
    CHECK(g.scalar_value(loss) == 21.0);
    g.backward(loss);
    CHECK(g.grad(x).data == std::vector<double>(6, 1.0));
}

TEST_CASE("scale backward multiplies by the factor") {
    Graph g;
    const NodeId x = g.parameter(Tensor({3}, {1, -1, 4}), true);
    const NodeId loss = g.scale(g.sum(x), 2.5);
    CHECK(g.scalar_value(loss) == 10.0);
    g.backward(loss);
    CHECK(g.grad(x).data == std::vector<double>(3, 2.5));
}

TEST_CASE("scale by zero still materializes zero gradients") {
    Graph g;
    const NodeId x = g.parameter(Tensor({2}, {3, 4}), true);
    g.backward(g.scale(g.sum(x), 0.0));
    CHECK(g.grad(x).data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("add routes the upstream gradient to both operands") {
    Graph g;
    const NodeId a = g.parameter(Tensor({2}, {1, 2}), true);
    const NodeId b = g.parameter(Tensor({2}, {10, 20}), true);
    g.backward(g.scale(g.sum(g.add(a, b)), 3.0));
    CHECK(g.grad(a).data == std::vector<double>{3.0, 3.0});
    CHECK(g.grad(b).data == std::vector<double>{3.0, 3.0});
}

TEST_CASE("concat splits the gradient at the seam") {
    Graph g;
    const NodeId a = g.parameter(Tensor({2}, {0.1, 0.2}), true);
    const NodeId b = g.parameter(Tensor({3}, {0.3, 0.4, 0.5}), true);
    const NodeId w = g.input(Tensor({1, 5}, {1, 2, 3, 4, 5}));
    const NodeId loss = g.sum(g.dense(g.concat(a, b), w, g.input(Tensor::zeros({1}))));
    g.backward(loss);
    CHECK(g.grad(a).data == std::vector<double>{1.0, 2.0});
    CHECK(g.grad(b).data == std::vector<double>{3.0, 4.0, 5.0});
}

TEST_CASE("concat rejects non-vector operands") {
    Graph g;
    const NodeId m = g.input(Tensor::zeros({2, 2}));
    const NodeId v = g.input(Tensor::zeros({2}));
    CHECK_THROWS_WITH_AS(g.concat(m, v), doctest::Contains("concat"), Error);
}

TEST_CASE("add rejects shape mismatches") {
    Graph g;
    const NodeId a = g.input(Tensor::zeros({2}));
    const NodeId b = g.input(Tensor::zeros({3}));
    CHECK_THROWS_WITH_AS(g.add(a, b), doctest::Contains("add"), Error);
}

TEST_CASE("relu subgradient is zero at and below the origin") {
    Graph g;
    const NodeId x = g.parameter(Tensor({4}, {-2.0, 0.0, 0.7, 3.0}), true);
    g.backward(g.sum(g.relu(x)));
    CHECK(g.grad(x).data == std::vector<double>{0.0, 0.0, 1.0, 1.0});
}

TEST_CASE("maxpool tie subgradient selects the first element in row-major order") {
    Graph g;
    const NodeId x = g.parameter(Tensor({1, 2, 2}, {5, 5, 5, 5}), true);
    g.backward(g.sum(g.maxpool2(x)));
    CHECK(g.grad(x).data == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("softmax plus cross entropy has the classic closed-form gradient") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor logits = random_tensor({4}, rng, -3, 3);
        const int label = rng.uniform_int(4);
        Graph g;
        const NodeId z = g.parameter(logits, true);
        const NodeId p = g.softmax(z);
        g.backward(g.cross_entropy(p, label));
        const Tensor probs = ops::softmax(logits);
        for (int k = 0; k < 4; ++k) {
            const double expect = probs.data[static_cast<std::size_t>(k)] - (k == label ? 1.0 : 0.0);
            CHECK(std::abs(g.grad(z).data[static_cast<std::size_t>(k)] - expect) <= 1e-12);
        }
    }
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(32);
    Tensor logits = random_tensor({5}, rng, -2, 2);
    const int label = 3;
    Graph g;
    const NodeId z = g.parameter(logits, true);
    g.backward(g.cross_entropy(g.softmax(z), label));
    const Tensor analytic = g.grad(z);
    check_grad_against_fd(analytic, logits,
                          [&]() { return ops::cross_entropy(ops::softmax(logits), label); });
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(33);
    Tensor x = random_tensor({5}, rng);
    Tensor w = random_tensor({3, 5}, rng);
    Tensor b = random_tensor({3}, rng);
    const int label = 1;
    const auto eval = [&]() { return ops::cross_entropy(ops::softmax(ops::dense(x, w, b)), label); };

    Graph g;
    const NodeId xn = g.parameter(x, true);
    const NodeId wn = g.parameter(w, true);
    const NodeId bn = g.parameter(b, true);
    g.backward(g.cross_entropy(g.softmax(g.dense(xn, wn, bn)), label));

    check_grad_against_fd(g.grad(xn), x, eval);
    check_grad_against_fd(g.grad(wn), w, eval);
    check_grad_against_fd(g.grad(bn), b, eval);
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(34);
    Tensor x = random_tensor({2, 4, 3}, rng);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor w = random_tensor({3, 3}, rng);
    Tensor wb = random_tensor({3}, rng);
    const int label = 2;
    // Smooth chain (no relu/maxpool) so central differences are clean.
    const auto eval = [&]() {
        const Tensor pooled = ops::global_avg_pool(ops::conv2d(x, k, b));
        return ops::cross_entropy(ops::softmax(ops::dense(pooled, w, wb)), label);
    };

    Graph g;
    const NodeId xn = g.parameter(x, true);
    const NodeId kn = g.parameter(k, true);
    const NodeId bn = g.parameter(b, true);
    const NodeId wn = g.input(w);
    const NodeId wbn = g.input(wb);
    const NodeId logits = g.dense(g.global_avg_pool(g.conv2d(xn, kn, bn)), wn, wbn);
    g.backward(g.cross_entropy(g.softmax(logits), label));

    check_grad_against_fd(g.grad(xn), x, eval);
    check_grad_against_fd(g.grad(kn), k, eval);
    check_grad_against_fd(g.grad(bn), b, eval);
}

TEST_CASE("maxpool gradients match finite differences away from ties") {
    Rng rng(35);
    Tensor x = Tensor::zeros({1, 4, 4});
    // Well-separated values keep the argmax stable under the probe step.
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = static_cast<double>(i) * 0.37 + rng.uniform(0, 0.05);
    Tensor w = random_tensor({2, 1}, rng);
    Tensor wb = random_tensor({2}, rng);
    const auto eval = [&]() {
        const Tensor pooled = ops::global_avg_pool(ops::maxpool2(x));
        return ops::cross_entropy(ops::softmax(ops::dense(pooled, w, wb)), 0);
    };

    Graph g;
    const NodeId xn = g.parameter(x, true);
    const NodeId pooled = g.global_avg_pool(g.maxpool2(xn));
    g.backward(g.cross_entropy(g.softmax(g.dense(pooled, g.input(w), g.input(wb))), 0));
    check_grad_against_fd(g.grad(xn), x, eval);
}

TEST_CASE("relu gradients match finite differences away from the kink") {
    Rng rng(36);
    Tensor x = random_tensor({6}, rng);
    for (double& v : x.data) {
        if (std::abs(v) < 0.01) v = 0.5;  // keep probes away from the kink
    }
    Tensor w = random_tensor({2, 6}, rng);
    Tensor wb = random_tensor({2}, rng);
    const auto eval = [&]() {
        return ops::cross_entropy(ops::softmax(ops::dense(ops::relu(x), w, wb)), 1);
    };
    Graph g;
    const NodeId xn = g.parameter(x, true);
    g.backward(g.cross_entropy(g.softmax(g.dense(g.relu(xn), g.input(w), g.input(wb))), 1));
    check_grad_against_fd(g.grad(xn), x, eval);
}

TEST_CASE("global_avg_pool spreads gradient uniformly") {
    Graph g;
    const NodeId x = g.parameter(Tensor::full({2, 2, 2}, 1.0), true);
    g.backward(g.sum(g.global_avg_pool(x)));
    for (double v : g.grad(x).data) CHECK(v == 0.25);
}

TEST_CASE("trainable leaf with no path to the loss reports a zero gradient") {
    Graph g;
    const NodeId used = g.parameter(Tensor({2}, {1, 2}), true);
    const NodeId orphan = g.parameter(Tensor({2, 2}, {1, 2, 3, 4}), true);
    g.backward(g.sum(used));
    CHECK(g.grad(orphan).shape == std::vector<int>{2, 2});
    CHECK(g.grad(orphan).data == std::vector<double>(4, 0.0));
}

TEST_CASE("frozen parameters are pruned from backward") {
    Graph g;
    const NodeId frozen = g.parameter(Tensor({2}, {1, 2}), false);
    const NodeId live = g.parameter(Tensor({2}, {3, 4}), true);
    const NodeId combined = g.add(frozen, live);
    CHECK(g.requires_grad(combined));
    CHECK_FALSE(g.requires_grad(frozen));
    g.backward(g.sum(combined));
    CHECK(g.grad(live).data == std::vector<double>{1.0, 1.0});
    CHECK_THROWS_WITH_AS(g.grad(frozen), doctest::Contains("does not require gradients"), Error);
}

TEST_CASE("a loss with no trainable inputs backpropagates nothing") {
    Graph g;
    const NodeId x = g.input(Tensor({3}, {1, 2, 3}));
    const NodeId loss = g.sum(x);
    CHECK_FALSE(g.requires_grad(loss));
    g.backward(loss);  // legal no-op
    CHECK_THROWS_WITH_AS(g.grad(x), doctest::Contains("does not require gradients"), Error);
}

TEST_CASE("graph lifecycle contract") {
    Graph g;
    const NodeId x = g.parameter(Tensor({2}, {1, 2}), true);
    const NodeId loss = g.sum(x);
    CHECK_THROWS_WITH_AS(g.grad(x), doctest::Contains("only available after backward"), Error);
    CHECK_THROWS_WITH_AS(g.backward(x), doctest::Contains("loss must be scalar"), Error);

    Graph g2;
    const NodeId y = g2.parameter(Tensor({2}, {1, 2}), true);
    const NodeId loss2 = g2.sum(y);
    g2.backward(loss2);
    CHECK_THROWS_WITH_AS(g2.backward(loss2), doctest::Contains("backward may run only once"), Error);
    CHECK_THROWS_WITH_AS(g2.sum(y), doctest::Contains("cannot extend a graph after backward"), Error);
    (void)loss;
}

TEST_CASE("node values match the eager ops they were built from") {
    Rng rng(37);
    const Tensor x = random_tensor({2, 4, 4}, rng);
    const Tensor k = random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    Graph g;
    const NodeId conv = g.conv2d(g.input(x), g.input(k), g.input(b));
    const Tensor direct = ops::conv2d(x, k, b);
    CHECK(g.value(conv).data == direct.data);
    CHECK(g.node_count() == 4);
}
