#include "transopt/sampling.hpp"

#include <stdexcept>
#include <vector>

#include "transopt/rng.hpp"

namespace transopt {

Eigen::MatrixXd DesignMatrix::input() const {
    Eigen::MatrixXd m(s, d + 1);
    m.leftCols(d) = x;
    m.col(d) = y;
    return m;
}

Eigen::MatrixXd lhs_sample(int d, int s, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("lhs_sample: d must be >= 1");
    if (s < 1) throw std::invalid_argument("lhs_sample: s must be >= 1");

    Eigen::MatrixXd out(s, d);
    std::vector<int> perm(s);
    for (int j = 0; j < d; ++j) {
        SplitRng rng(seed, static_cast<std::uint64_t>(j));
        for (int i = 0; i < s; ++i) perm[i] = i;
        for (int i = s - 1; i > 0; --i) {
            int k = static_cast<int>(rng.next_below(i + 1));
            std::swap(perm[i], perm[k]);
        }
        for (int i = 0; i < s; ++i) {
            double u = rng.next_double();
            out(i, j) = -5.0 + 10.0 * (perm[i] + u) / s;
        }
    }
    return out;
}

Eigen::VectorXd minmax_scale(const Eigen::VectorXd& y_raw) {
    if (y_raw.size() < 1)
        throw std::invalid_argument("minmax_scale: empty input");
    if (!y_raw.allFinite())
        throw std::invalid_argument("minmax_scale: non-finite input");
    double lo = y_raw.minCoeff();
    double hi = y_raw.maxCoeff();
    if (hi == lo) return Eigen::VectorXd::Zero(y_raw.size());
    return (y_raw.array() - lo) / (hi - lo);
}

DesignMatrix build_design(const ProblemInstance& inst, int multiplier,
                          std::uint64_t seed, bool allow_any_multiplier) {
    if (!allow_any_multiplier && multiplier != 50 && multiplier != 100)
        throw std::invalid_argument(
            "build_design: multiplier must be 50 or 100 (got " +
            std::to_string(multiplier) + "); pass the override flag for others");
    if (multiplier < 1)
        throw std::invalid_argument("build_design: multiplier must be >= 1");

    DesignMatrix design;
    design.d = inst.spec.dim;
    design.s = multiplier * design.d;
    design.class_label = inst.spec.class_id.value();
    design.x = lhs_sample(design.d, design.s, seed);
    design.y_raw.resize(design.s);
    for (int i = 0; i < design.s; ++i)
        design.y_raw[i] = inst.evaluate(design.x.row(i).transpose());
    design.y = minmax_scale(design.y_raw);
    return design;
}

}  // namespace transopt
