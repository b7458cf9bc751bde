#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "grad_check.hpp"
#include "transopt/tensor.hpp"

using namespace transopt;
using transopt::testing::grad_check;
using transopt::testing::random_leaf;
using transopt::testing::scalarize;

TEST_CASE("matmul forward") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    Tensor r = matmul(Tensor::matrix(Eigen::MatrixXd::Identity(2, 2)),
                      Tensor::matrix(a));
    CHECK(r.value().isApprox(a));

    Eigen::MatrixXd row(1, 2), col(2, 1);
    row << 1, 2;
    col << 3, 4;
    CHECK(matmul(Tensor::matrix(row), Tensor::matrix(col)).value()(0, 0) ==
          doctest::Approx(11.0));

    CHECK_THROWS_AS(matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3)),
                    std::invalid_argument);
}

TEST_CASE("matmul gradient vs finite differences") {
    for (int c = 0; c < 20; ++c) {
        SplitRng rng(1000 + c);
        Tensor a = random_leaf(3, 4, rng);
        Tensor b = random_leaf(4, 2, rng);
        double err = grad_check(
            [&]() { return scalarize(matmul(a, b), 7 + c); }, {a, b});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("add broadcasting") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    Eigen::RowVectorXd b(2);
    b << 10, 20;
    Eigen::MatrixXd expect(2, 2);
    expect << 11, 22, 13, 24;
    CHECK(add(Tensor::matrix(a), Tensor::row(b)).value().isApprox(expect));

    Tensor x = Tensor::matrix(a);
    CHECK(add(x, Tensor::zeros(2, 2)).value().isApprox(a));

    CHECK_THROWS_AS(add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)),
                    std::invalid_argument);

    for (int c = 0; c < 10; ++c) {
        SplitRng rng(2000 + c);
        Tensor m = random_leaf(3, 4, rng);
        Tensor v = random_leaf(1, 4, rng);
        double err = grad_check(
            [&]() { return scalarize(add(m, v), 11 + c); }, {m, v});
        CHECK(err < 1e-4);
        Tensor col = random_leaf(3, 1, rng);
        err = grad_check(
            [&]() { return scalarize(add(m, col), 13 + c); }, {m, col});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("relu forward and gradient") {
    Eigen::RowVectorXd v(3);
    v << -1, 0, 2;
    Eigen::RowVectorXd expect(3);
    expect << 0, 0, 2;
    CHECK(relu(Tensor::row(v)).value().isApprox(expect.matrix(), 0.0));

    Eigen::RowVectorXd pos(3);
    pos << 1, 2, 3;
    CHECK(relu(Tensor::row(pos)).value().isApprox(pos.matrix()));

    for (int c = 0; c < 10; ++c) {
        SplitRng rng(3000 + c);
        // offset away from the kink at 0
        Tensor a = random_leaf(3, 3, rng);
        a.value_mut().array() += (a.value().array() > 0).cast<double>() * 0.5 -
                                 (a.value().array() <= 0).cast<double>() * 0.5;
        double err =
            grad_check([&]() { return scalarize(relu(a), 17 + c); }, {a});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("softmax rows") {
    Eigen::RowVectorXd v(2);
    v << 0, 0;
    Tensor s = softmax_rows(Tensor::row(v));
    CHECK(s.value()(0, 0) == doctest::Approx(0.5));
    CHECK(s.value()(0, 1) == doctest::Approx(0.5));

    Eigen::RowVectorXd big(2);
    big << 1000, 0;
    Tensor sb = softmax_rows(Tensor::row(big));
    CHECK(sb.value().allFinite());
    CHECK(sb.value()(0, 0) == doctest::Approx(1.0));
    CHECK(sb.value()(0, 1) == doctest::Approx(0.0));

    SplitRng rng(42);
    for (int c = 0; c < 50; ++c) {
        Eigen::MatrixXd m(4, 6);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 6; ++j) m(i, j) = rng.uniform(-1000.0, 1000.0);
        Eigen::MatrixXd y = softmax_rows(Tensor::matrix(m)).value();
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(y.row(i).sum() - 1.0) < 1e-12);
    }

    for (int c = 0; c < 10; ++c) {
        SplitRng r2(4000 + c);
        Tensor a = random_leaf(3, 5, r2, 4.0);
        double err = grad_check(
            [&]() { return scalarize(softmax_rows(a), 19 + c); }, {a});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("layer norm") {
    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(1, 4, 3.0);
    Tensor gain = Tensor::row(Eigen::RowVectorXd::Ones(4));
    Tensor bias = Tensor::row(Eigen::RowVectorXd::Zero(4));
    Tensor out = layer_norm(Tensor::matrix(constant), gain, bias);
    CHECK(out.value().cwiseAbs().maxCoeff() < 1e-9);

    Eigen::MatrixXd two(1, 2);
    two << 1, 3;
    Tensor g2 = Tensor::row(Eigen::RowVectorXd::Ones(2));
    Tensor b2 = Tensor::row(Eigen::RowVectorXd::Zero(2));
    Tensor out2 = layer_norm(Tensor::matrix(two), g2, b2);
    CHECK(out2.value()(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out2.value()(0, 1) == doctest::Approx(1.0).epsilon(1e-4));

    for (int c = 0; c < 10; ++c) {
        SplitRng rng(5000 + c);
        Tensor a = random_leaf(3, 5, rng, 2.0);
        Tensor g = random_leaf(1, 5, rng);
        Tensor b = random_leaf(1, 5, rng);
        double err = grad_check(
            [&]() { return scalarize(layer_norm(a, g, b), 23 + c); },
            {a, g, b});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("dropout") {
    SplitRng rng(7);
    Tensor x = Tensor::matrix(Eigen::MatrixXd::Ones(10, 10));
    CHECK(dropout(x, 0.0, true, rng).value().isApprox(x.value()));
    CHECK(dropout(x, 0.5, false, rng).value().isApprox(x.value()));

    // law of large numbers: inverted dropout preserves the mean
    Tensor big = Tensor::matrix(Eigen::MatrixXd::Ones(1000, 100));
    SplitRng rng2(12345);
    double mean = dropout(big, 0.5, true, rng2).value().mean();
    CHECK(std::abs(mean - 1.0) < 0.02);

    // with a replayed mask, dropout is linear in its input
    for (int c = 0; c < 5; ++c) {
        SplitRng r3(6000 + c);
        Tensor a = random_leaf(4, 4, r3);
        double err = grad_check(
            [&]() {
                SplitRng mask_rng(c);
                return scalarize(dropout(a, 0.3, true, mask_rng), 29 + c);
            },
            {a});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("reduce statistics") {
    Eigen::MatrixXd m(2, 1);
    m << 1, 3;
    Tensor t = Tensor::matrix(m);
    CHECK(reduce(t, Stat::Min).value()(0, 0) == doctest::Approx(1.0));
    CHECK(reduce(t, Stat::Max).value()(0, 0) == doctest::Approx(3.0));
    CHECK(reduce(t, Stat::Mean).value()(0, 0) == doctest::Approx(2.0));
    CHECK(reduce(t, Stat::Std).value()(0, 0) == doctest::Approx(1.0));

    Eigen::MatrixXd single(1, 3);
    single << 4, 5, 6;
    Tensor ts = Tensor::matrix(single);
    CHECK(reduce(ts, Stat::Min).value().isApprox(single));
    CHECK(reduce(ts, Stat::Max).value().isApprox(single));
    CHECK(reduce(ts, Stat::Mean).value().isApprox(single));
    CHECK(reduce(ts, Stat::Std).value().cwiseAbs().maxCoeff() < 1e-5);

    for (int c = 0; c < 10; ++c) {
        SplitRng rng(7000 + c);
        Tensor a = random_leaf(5, 3, rng, 2.0);
        for (Stat stat : {Stat::Mean, Stat::Std, Stat::Min, Stat::Max}) {
            double err = grad_check(
                [&]() { return scalarize(reduce(a, stat), 31 + c); }, {a});
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("concat") {
    Eigen::RowVectorXd a(2), b(1);
    a << 1, 2;
    b << 3;
    Tensor r = concat({Tensor::row(a), Tensor::row(b)}, 0);
    CHECK(r.rank() == 1);
    CHECK(r.cols() == 3);
    CHECK(r.value()(0, 2) == doctest::Approx(3.0));

    std::vector<Tensor> four(4, Tensor::row(Eigen::RowVectorXd::Ones(5)));
    CHECK(concat(four, 0).cols() == 20);

    for (int c = 0; c < 10; ++c) {
        SplitRng rng(8000 + c);
        Tensor x = random_leaf(1, 3, rng);
        Tensor y = random_leaf(1, 4, rng);
        double err = grad_check(
            [&]() { return scalarize(concat({x, y}, 1), 37 + c); }, {x, y});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("slice_cols gradient") {
    for (int c = 0; c < 10; ++c) {
        SplitRng rng(8500 + c);
        Tensor a = random_leaf(4, 6, rng);
        double err = grad_check(
            [&]() { return scalarize(slice_cols(a, 2, 3), 41 + c); }, {a});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("cross entropy logits") {
    Tensor uniform = Tensor::row(Eigen::RowVectorXd::Zero(24));
    CHECK(cross_entropy_logits(uniform, {5}).item() ==
          doctest::Approx(std::log(24.0)));

    Eigen::RowVectorXd confident = Eigen::RowVectorXd::Zero(24);
    confident[3] = 30.0;
    CHECK(cross_entropy_logits(Tensor::row(confident), {3}).item() <
          1e-10);

    for (int c = 0; c < 10; ++c) {
        SplitRng rng(9000 + c);
        Tensor logits = random_leaf(4, 24, rng, 4.0);
        std::vector<int> labels{1, 5, 23, 0};
        double err = grad_check(
            [&]() { return cross_entropy_logits(logits, labels); }, {logits});
        CHECK(err < 1e-4);
    }

    CHECK_THROWS_AS(cross_entropy_logits(uniform, {24}),
                    std::invalid_argument);
}

TEST_CASE("backward basics") {
    Eigen::RowVectorXd v(2);
    v << 1, 2;
    Tensor x = Tensor::row(v, true);
    backward(sum(x));
    CHECK(x.grad().isApprox(Eigen::MatrixXd::Ones(1, 2)));

    x.zero_grad();
    backward(sum(mul(x, x)));
    Eigen::MatrixXd expect(1, 2);
    expect << 2, 4;
    CHECK(x.grad().isApprox(expect));

    // repeated backward without zeroing accumulates
    backward(sum(mul(x, x)));
    CHECK(x.grad().isApprox(2 * expect));

    CHECK_THROWS_AS(backward(Tensor::row(v)), std::invalid_argument);
}

TEST_CASE("diamond graph sums both paths") {
    for (int c = 0; c < 10; ++c) {
        SplitRng rng(9500 + c);
        Tensor x = random_leaf(3, 3, rng);
        auto fwd = [&]() {
            Tensor a = relu(x);
            Tensor b = scale(x, 2.0);
            return scalarize(add(a, b), 43 + c);
        };
        CHECK(grad_check(fwd, {x}) < 1e-4);
    }
}

TEST_CASE("composite mlp graph vs finite differences") {
    for (int c = 0; c < 10; ++c) {
        SplitRng rng(9700 + c);
        Tensor x = random_leaf(4, 3, rng);
        Tensor w1 = random_leaf(3, 5, rng);
        Tensor b1 = random_leaf(1, 5, rng);
        Tensor w2 = random_leaf(5, 2, rng);
        Tensor b2 = random_leaf(1, 2, rng);
        auto fwd = [&]() {
            Tensor h = relu(add(matmul(x, w1), b1));
            Tensor out = add(matmul(h, w2), b2);
            return cross_entropy_logits(out, {0, 1, 0, 1});
        };
        CHECK(grad_check(fwd, {x, w1, b1, w2, b2}) < 1e-4);
    }
}

TEST_CASE("no nan or inf on in-range inputs") {
    SplitRng rng(31337);
    for (int c = 0; c < 20; ++c) {
        Tensor a = random_leaf(4, 4, rng, 20.0);
        CHECK(relu(a).value().allFinite());
        CHECK(softmax_rows(a).value().allFinite());
        Tensor g = Tensor::row(Eigen::RowVectorXd::Ones(4));
        Tensor b = Tensor::row(Eigen::RowVectorXd::Zero(4));
        CHECK(layer_norm(a, g, b).value().allFinite());
        for (Stat s : {Stat::Min, Stat::Max, Stat::Mean, Stat::Std})
            CHECK(reduce(a, s).value().allFinite());
    }
}

TEST_CASE("split rng streams do not collide") {
    SplitRng parent(99);
    SplitRng s1 = parent.split(1);
    SplitRng s2 = parent.split(2);
    int same = 0;
    for (int i = 0; i < 1000; ++i)
        if (s1.next_u64() == s2.next_u64()) ++same;
    CHECK(same == 0);
}
