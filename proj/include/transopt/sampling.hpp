#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "transopt/fnsuite.hpp"

namespace transopt {

// One ML training example: s Latin Hypercube points in [-5,5]^d plus their
// min-max scaled objective values.
struct DesignMatrix {
    Eigen::MatrixXd x;       // [s, d]
    Eigen::VectorXd y_raw;   // [s]
    Eigen::VectorXd y;       // [s], scaled to [0,1]
    int class_label = 0;     // 1..24
    int s = 0;
    int d = 0;

    // The [s, d+1] matrix fed to the model (x columns, then y).
    Eigen::MatrixXd input() const;
};

// Each axis of [-5,5] is split into s equal strata holding exactly one
// point; row assignment is an independent seeded permutation per axis.
Eigen::MatrixXd lhs_sample(int d, int s, std::uint64_t seed);

// (y - min) / (max - min); constant input maps to all zeros.
Eigen::VectorXd minmax_scale(const Eigen::VectorXd& y_raw);

// s = multiplier * dim. Multipliers other than 50/100 require the explicit
// override flag.
DesignMatrix build_design(const ProblemInstance& inst, int multiplier,
                          std::uint64_t seed, bool allow_any_multiplier = false);

}  // namespace transopt
