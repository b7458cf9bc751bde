#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace transopt {

// Label of one of the 24 problem classes; validated at construction.
class ClassId {
public:
    explicit ClassId(int value);
    int value() const { return value_; }
    friend bool operator==(ClassId a, ClassId b) { return a.value_ == b.value_; }

private:
    int value_;
};

struct InstanceSpec {
    ClassId class_id;
    int instance_id;  // >= 1
    int dim;          // >= 2

    void validate() const;
};

struct GallagherPeak {
    double weight;
    Eigen::VectorXd center;        // in shifted-rotated space
    Eigen::VectorXd conditioning;  // diagonal of the quadratic form
};

// A concrete shifted/rotated/offset transformation of a problem class.
// Immutable after construction; evaluation is thread-safe.
struct ProblemInstance {
    InstanceSpec spec;
    Eigen::VectorXd x_opt;
    double f_opt = 0.0;
    Eigen::MatrixXd rotation;  // identity for unrotated classes
    bool rotated = false;
    std::vector<GallagherPeak> peaks;  // classes 21/22 only

    double evaluate(const Eigen::VectorXd& x) const;
};

// Deterministic in spec: the same (class, instance, dim) triple always
// yields bit-identical transformation parameters.
ProblemInstance make_instance(const InstanceSpec& spec);

struct ClassDescriptor {
    int id;
    std::string name;
    bool uses_rotation;
};

const std::vector<ClassDescriptor>& suite_table();

}  // namespace transopt
