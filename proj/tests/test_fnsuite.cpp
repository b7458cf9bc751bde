#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "transopt/fnsuite.hpp"
#include "transopt/rng.hpp"
#include "transopt/sampling.hpp"

using namespace transopt;

namespace {

ProblemInstance forced_zero_instance(int class_id, int dim) {
    // identity rotation, x_opt = 0, f_opt = 0: exposes the base formula
    ProblemInstance inst{{ClassId(class_id), 1, dim},
                         Eigen::VectorXd::Zero(dim),
                         0.0,
                         Eigen::MatrixXd::Identity(dim, dim),
                         false,
                         {}};
    if (class_id == 21 || class_id == 22) {
        inst.peaks.push_back(
            {10.0, Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)});
    }
    return inst;
}

}  // namespace

TEST_CASE("class id validation") {
    CHECK_THROWS_AS(ClassId(0), std::invalid_argument);
    CHECK_THROWS_AS(ClassId(25), std::invalid_argument);
    CHECK(ClassId(24).value() == 24);
}

TEST_CASE("instance spec validation") {
    CHECK_THROWS_AS(make_instance({ClassId(1), 0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(make_instance({ClassId(1), 1, 1}), std::invalid_argument);
}

TEST_CASE("make_instance is deterministic") {
    ProblemInstance a = make_instance({ClassId(1), 7, 3});
    ProblemInstance b = make_instance({ClassId(1), 7, 3});
    CHECK((a.x_opt.array() == b.x_opt.array()).all());
    CHECK(a.f_opt == b.f_opt);
    CHECK((a.rotation.array() == b.rotation.array()).all());

    ProblemInstance c = make_instance({ClassId(1), 8, 3});
    CHECK_FALSE((a.x_opt.array() == c.x_opt.array()).all());
}

TEST_CASE("rotation orthogonality") {
    ProblemInstance inst = make_instance({ClassId(10), 1, 5});
    Eigen::MatrixXd err = inst.rotation.transpose() * inst.rotation -
                          Eigen::MatrixXd::Identity(5, 5);
    CHECK(err.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(inst.rotated);
}

TEST_CASE("class 5 optimum sits on the boundary") {
    ProblemInstance inst = make_instance({ClassId(5), 3, 4});
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(inst.x_opt[i]) == doctest::Approx(5.0));
}

TEST_CASE("x_opt stays within [-4, 4] for non-boundary classes") {
    for (int cls = 1; cls <= 24; ++cls) {
        if (cls == 5) continue;
        ProblemInstance inst = make_instance({ClassId(cls), 11, 6});
        CHECK(inst.x_opt.cwiseAbs().maxCoeff() <= 4.0);
    }
}

TEST_CASE("f_opt is in range and rounded to 2 decimals") {
    for (int i = 1; i <= 50; ++i) {
        ProblemInstance inst = make_instance({ClassId(3), i, 3});
        CHECK(inst.f_opt >= -100.0);
        CHECK(inst.f_opt <= 100.0);
        CHECK(inst.f_opt == doctest::Approx(std::round(inst.f_opt * 100) / 100)
                                .epsilon(1e-12));
    }
}

TEST_CASE("sphere closed form") {
    ProblemInstance inst = make_instance({ClassId(1), 2, 3});
    CHECK(inst.evaluate(inst.x_opt) == doctest::Approx(inst.f_opt));

    ProblemInstance forced = forced_zero_instance(1, 3);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(3);
    CHECK(forced.evaluate(x) == doctest::Approx(3.0));
}

TEST_CASE("discus closed form") {
    ProblemInstance forced = forced_zero_instance(11, 2);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
    CHECK(forced.evaluate(x) == doctest::Approx(1000001.0));
}

TEST_CASE("schwefel constants satisfy c sin(sqrt(c)) = k") {
    // independent check of the constant pair before trusting evaluate()
    const double c = 420.9687462275036;
    const double k = 418.9828872724339;
    double v = (100.0 * 0.0 + c);
    CHECK(std::abs(v * std::sin(std::sqrt(std::abs(v))) - k) < 1e-12);

    ProblemInstance inst = make_instance({ClassId(20), 4, 5});
    CHECK(std::abs(inst.evaluate(inst.x_opt) - inst.f_opt) < 1e-6 * 5);
}

TEST_CASE("evaluate rejects bad input") {
    ProblemInstance inst = make_instance({ClassId(1), 1, 3});
    CHECK_THROWS_AS(inst.evaluate(Eigen::VectorXd::Zero(4)),
                    std::invalid_argument);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(inst.evaluate(bad), std::invalid_argument);
}

TEST_CASE("suite table") {
    const auto& table = suite_table();
    REQUIRE(table.size() == 24);
    for (int i = 0; i < 24; ++i) CHECK(table[i].id == i + 1);
    CHECK(table[0].name == "Sphere");
    CHECK_FALSE(table[0].uses_rotation);
    CHECK(table[14].name == "Rastrigin (rotated)");
    CHECK(table[14].uses_rotation);
}

TEST_CASE("all classes: optimum value and finiteness") {
    SplitRng rng(2024);
    for (int cls = 1; cls <= 24; ++cls) {
        for (int inst_id = 1; inst_id <= 20; ++inst_id) {
            ProblemInstance inst = make_instance({ClassId(cls), inst_id, 3});
            double tol = (cls == 20) ? 1e-6 * 3 : 1e-6;
            CHECK(std::abs(inst.evaluate(inst.x_opt) - inst.f_opt) < tol);
            for (int k = 0; k < 20; ++k) {
                Eigen::VectorXd x(3);
                for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-5.0, 5.0);
                CHECK(std::isfinite(inst.evaluate(x)));
            }
        }
    }
}

TEST_CASE("gallagher peak counts") {
    CHECK(make_instance({ClassId(21), 1, 3}).peaks.size() == 101);
    CHECK(make_instance({ClassId(22), 1, 3}).peaks.size() == 21);
    const auto& peaks = make_instance({ClassId(21), 1, 3}).peaks;
    CHECK(peaks[0].weight == doctest::Approx(10.0));
    CHECK(peaks[0].center.cwiseAbs().maxCoeff() == 0.0);
    for (size_t k = 1; k < peaks.size(); ++k) {
        CHECK(peaks[k].weight >= 1.1);
        CHECK(peaks[k].weight <= 9.1);
        CHECK(peaks[k].conditioning.minCoeff() >= 1.0);
        CHECK(peaks[k].conditioning.maxCoeff() <= 1e3);
    }
}

// Loose separation check; the real distinguishability evidence is
// end-to-end classification accuracy.
TEST_CASE("classes are pairwise distinguishable from scaled samples") {
    const int d = 3, n_inst = 100;
    std::vector<Eigen::VectorXd> signature(25);
    std::vector<double> spread(25, 0.0);
    for (int cls = 1; cls <= 24; ++cls) {
        std::vector<Eigen::VectorXd> sorted_ys;
        for (int i = 1; i <= n_inst; ++i) {
            ProblemInstance inst = make_instance({ClassId(cls), i, d});
            DesignMatrix design =
                build_design(inst, 50, mix_seed(555, cls, i));
            Eigen::VectorXd y = design.y;
            std::sort(y.data(), y.data() + y.size());
            sorted_ys.push_back(y);
        }
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(sorted_ys[0].size());
        for (const auto& y : sorted_ys) mean += y;
        mean /= n_inst;
        double var = 0.0;
        for (const auto& y : sorted_ys) var += (y - mean).squaredNorm();
        signature[cls] = mean;
        spread[cls] = std::sqrt(var / n_inst / mean.size());
    }
    int separated = 0;
    for (int a = 1; a <= 24; ++a)
        for (int b = a + 1; b <= 24; ++b) {
            double gap = (signature[a] - signature[b]).cwiseAbs().maxCoeff();
            double noise = std::max(spread[a], spread[b]);
            if (gap > noise) ++separated;
        }
    CHECK(separated >= 20);
}
