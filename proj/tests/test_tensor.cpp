#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"

#include "driftguard/rng.hpp"
#include "driftguard/tensor.hpp"

using namespace dg;

namespace {

Tensor leaf(std::vector<double> v, Shape s) {
    Tensor t = Tensor::from(std::move(v), std::move(s));
    t.set_requires_grad(true);
    return t;
}

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

} // namespace

TEST_CASE("log_softmax and cross_entropy match frozen reference values") {
    // reference computed independently from the definition
    const Tensor logits = Tensor::from({1.0, 2.0, 0.5, 0.1, -0.3, 0.2}, {2, 3});
    const Tensor ls = log_softmax(logits);
    CHECK(ls.data()[0] == doctest::Approx(-1.464368784107945).epsilon(1e-12));
    CHECK(ls.data()[1] == doctest::Approx(-0.4643687841079449).epsilon(1e-12));
    CHECK(ls.data()[2] == doctest::Approx(-1.964368784107945).epsilon(1e-12));
    CHECK(ls.data()[3] == doctest::Approx(-1.0208276555532594).epsilon(1e-12));
    CHECK(ls.data()[4] == doctest::Approx(-1.4208276555532593).epsilon(1e-12));
    CHECK(ls.data()[5] == doctest::Approx(-0.9208276555532594).epsilon(1e-12));

    const Tensor ce = cross_entropy(logits, {2, 0});
    CHECK(ce.item() == doctest::Approx(1.4925982198306023).epsilon(1e-12));

    // rows of exp(log_softmax) are probability vectors
    for (std::size_t r = 0; r < 2; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 3; ++c) total += std::exp(ls.data()[r * 3 + c]);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("log_softmax is shift-invariant and stable under large logits") {
    const Tensor a = Tensor::from({1000.0, 1001.0, 999.0}, {1, 3});
    const Tensor b = Tensor::from({0.0, 1.0, -1.0}, {1, 3});
    const Tensor la = log_softmax(a), lb = log_softmax(b);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(la.data()[i] == doctest::Approx(lb.data()[i]).epsilon(1e-12));
        CHECK(std::isfinite(la.data()[i]));
    }
}

TEST_CASE("cosine distance values at the canonical angles") {
    const Tensor parallel = Tensor::from({1.0, 0.0, 2.0, 0.0}, {2, 2});
    CHECK(cosine_distance_mean(parallel, Tensor::from({2.0, 0.0, 4.0, 0.0}, {2, 2})).item() ==
          doctest::Approx(0.0).epsilon(1e-12));

    const Tensor x = Tensor::from({1.0, 0.0}, {1, 2});
    CHECK(cosine_distance_mean(x, Tensor::from({0.0, 3.0}, {1, 2})).item() ==
          doctest::Approx(1.0).epsilon(1e-12)); // orthogonal
    CHECK(cosine_distance_mean(x, Tensor::from({-5.0, 0.0}, {1, 2})).item() ==
          doctest::Approx(2.0).epsilon(1e-12)); // opposite

    // scale invariance in the first argument
    Rng rng(5);
    const std::vector<double> v = random_vec(6, rng);
    std::vector<double> v3(v);
    for (double& e : v3) e *= 3.0;
    const Tensor t = Tensor::from(random_vec(6, rng), {2, 3});
    const double d1 = cosine_distance_mean(Tensor::from(v, {2, 3}), t).item();
    const double d2 = cosine_distance_mean(Tensor::from(v3, {2, 3}), t).item();
    CHECK(std::fabs(d1 - d2) < 1e-12);
}

TEST_CASE("zero-norm rows in cosine distance contribute distance 1 and warn") {
    std::string warned;
    set_warn_handler([&](const std::string& m) { warned = m; });
    Tensor pred = leaf({0.0, 0.0}, {1, 2});
    const Tensor loss = cosine_distance_mean(pred, Tensor::from({1.0, 0.0}, {1, 2}));
    CHECK(loss.item() == doctest::Approx(1.0));
    backward(loss);
    CHECK(pred.grad()[0] == 0.0);
    CHECK(pred.grad()[1] == 0.0);
    CHECK(!warned.empty());
    set_warn_handler(nullptr);
}

TEST_CASE("finite differences confirm every primitive's gradient") {
    Rng rng(42);

    // generic harness: loss = sum(weights * op(x...)) as a function of one
    // leaf's flat values
    auto check_op = [&](std::size_t n_inputs, const Shape& shape,
                        const std::function<Tensor(const std::vector<Tensor>&)>& op,
                        double tol = 1e-6) {
        std::size_t numel = 1;
        for (std::size_t s : shape) numel *= s;
        std::vector<std::vector<double>> values;
        for (std::size_t i = 0; i < n_inputs; ++i) values.push_back(random_vec(numel, rng));

        for (std::size_t target = 0; target < n_inputs; ++target) {
            auto loss_at = [&](const std::vector<double>& x) {
                NoGradGuard ng;
                std::vector<Tensor> inputs;
                for (std::size_t i = 0; i < n_inputs; ++i) {
                    inputs.push_back(Tensor::from(i == target ? x : values[i], shape));
                }
                return op(inputs).item();
            };

            std::vector<Tensor> inputs;
            for (std::size_t i = 0; i < n_inputs; ++i) inputs.push_back(leaf(values[i], shape));
            backward(op(inputs));
            const double err =
                testutil::max_rel_err(inputs[target].grad(), testutil::fd_grad(loss_at, values[target]));
            INFO("input ", target);
            CHECK(err < tol);
        }
    };

    check_op(2, {2, 3}, [](const auto& in) { return sum(add(in[0], in[1])); });
    check_op(2, {2, 3}, [](const auto& in) { return sum(mul(sub(in[0], in[1]), in[0])); });
    check_op(1, {2, 3}, [](const auto& in) { return mean(mul(in[0], in[0])); });
    check_op(1, {6}, [](const auto& in) { return l2_norm(in[0]); });
    check_op(2, {6}, [](const auto& in) { return dot(in[0], in[1]); });
    check_op(1, {2, 3}, [](const auto& in) { return scale(sum(in[0]), -1.75); });
    check_op(1, {2, 4}, [](const auto& in) { return sum(mul(log_softmax(in[0]), log_softmax(in[0]))); });
    check_op(1, {2, 4}, [](const auto& in) { return cross_entropy(in[0], {3, 1}); });

    // the cosine target is held constant by the op, so only probe the left input
    const std::vector<double> anchor = random_vec(12, rng);
    check_op(1, {3, 4}, [&](const auto& in) {
        return cosine_distance_mean(in[0], Tensor::from(anchor, {3, 4}));
    });
}

TEST_CASE("finite differences confirm matmul and bias-broadcast gradients") {
    Rng rng(43);
    const std::vector<double> a0 = random_vec(6, rng);
    const std::vector<double> b0 = random_vec(12, rng);
    const std::vector<double> bias0 = random_vec(4, rng);
    const std::vector<double> w = random_vec(8, rng);

    auto loss_tensors = [&](const Tensor& a, const Tensor& b, const Tensor& bias) {
        const Tensor y = add(matmul(a, b), bias); // (2x3)(3x4) + bias(4)
        return sum(mul(y, Tensor::from(w, {2, 4})));
    };

    Tensor a = leaf(a0, {2, 3}), b = leaf(b0, {3, 4}), bias = leaf(bias0, {4});
    backward(loss_tensors(a, b, bias));

    auto fd_for = [&](int which) {
        auto at = [&, which](const std::vector<double>& x) {
            NoGradGuard ng;
            const Tensor ta = Tensor::from(which == 0 ? x : a0, {2, 3});
            const Tensor tb = Tensor::from(which == 1 ? x : b0, {3, 4});
            const Tensor tc = Tensor::from(which == 2 ? x : bias0, {4});
            return loss_tensors(ta, tb, tc).item();
        };
        return at;
    };
    CHECK(testutil::max_rel_err(a.grad(), testutil::fd_grad(fd_for(0), a0)) < 1e-6);
    CHECK(testutil::max_rel_err(b.grad(), testutil::fd_grad(fd_for(1), b0)) < 1e-6);
    CHECK(testutil::max_rel_err(bias.grad(), testutil::fd_grad(fd_for(2), bias0)) < 1e-6);
}

TEST_CASE("relu gradient away from the kink") {
    const std::vector<double> x0 = {1.5, -2.0, 0.75, -0.25, 3.0, -1.0};
    Tensor x = leaf(x0, {6});
    backward(sum(relu(x)));
    CHECK(x.grad() == std::vector<double>{1, 0, 1, 0, 1, 0});
}

TEST_CASE("concat_flat routes gradients back to each part") {
    Tensor a = leaf({1.0, 2.0}, {2});
    Tensor b = leaf({3.0, 4.0, 5.0, 6.0}, {2, 2});
    const Tensor joined = concat_flat({a, b});
    CHECK(joined.shape() == Shape{6});
    backward(dot(joined, Tensor::from({10, 20, 30, 40, 50, 60}, {6})));
    CHECK(a.grad() == std::vector<double>{10, 20});
    CHECK(b.grad() == std::vector<double>{30, 40, 50, 60});
}

TEST_CASE("gradients accumulate across backward passes until zeroed") {
    Tensor x = leaf({2.0}, {1});
    backward(mul(x, x)); // d/dx x^2 = 4
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    backward(mul(x, x));
    CHECK(x.grad()[0] == doctest::Approx(8.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("diamond-shaped graphs accumulate through both paths") {
    Tensor x = leaf({3.0}, {1});
    const Tensor y = mul(x, x);     // x^2
    backward(add(y, y));            // 2x^2 -> d/dx = 4x = 12
    CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("NoGradGuard suppresses taping") {
    Tensor x = leaf({1.0, 2.0}, {2});
    {
        NoGradGuard ng;
        CHECK_FALSE(grad_enabled());
        const Tensor y = mul(x, x);
        CHECK_FALSE(y.requires_grad());
        backward(sum(y)); // nothing taped, so nothing flows
        CHECK(x.grad() == std::vector<double>{0.0, 0.0});
    }
    CHECK(grad_enabled());
    backward(sum(mul(x, x)));
    CHECK(x.grad() == std::vector<double>{2.0, 4.0});
}

TEST_CASE("backward demands a scalar root") {
    Tensor x = leaf({1.0, 2.0}, {2});
    CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
}

TEST_CASE("shape violations are rejected") {
    const Tensor a = Tensor::from({1, 2, 3, 4}, {2, 2});
    const Tensor b = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3});
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(mul(a, b), ShapeError);
    CHECK_THROWS_AS(matmul(b, b), ShapeError);
    CHECK_THROWS_AS(cross_entropy(a, {0, 1, 0}), ShapeError);
    CHECK_THROWS_AS(cross_entropy(a, {0, 5}), IndexError);
    CHECK_THROWS_AS(cross_entropy(Tensor::from({}, {0, 2}), {}), ContractError);
    CHECK_THROWS_AS(Tensor::from({1, 2, 3}, {2, 2}), ShapeError);
    CHECK_THROWS_AS(a.item(), ContractError);
}

TEST_CASE("detach copies values and drops the tape") {
    Tensor x = leaf({1.0, 2.0}, {2});
    const Tensor y = x.detach();
    CHECK_FALSE(y.requires_grad());
    CHECK(y.data() == x.data());
    x.data()[0] = 99.0;
    CHECK(y.data()[0] == 1.0);
}
