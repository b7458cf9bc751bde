#include "transopt/fnsuite.hpp"

#include <cmath>
#include <stdexcept>

#include "transopt/rng.hpp"

namespace transopt {

namespace {

constexpr std::uint64_t kSuiteSeedTag = 0x7472616E736F7074ULL;  // "transopt"

// Classes whose landscape archetype depends on axis alignment keep R = I.
bool class_uses_rotation(int id) {
    switch (id) {
        case 1: case 2: case 3: case 4: case 5: case 7: case 8: case 20:
            return false;
        default:
            return true;
    }
}

double conditioning_coeff(int i, int d, double exponent_scale) {
    // 10^{exponent_scale * (i-1)/(d-1)}, i is 1-based; requires d >= 2.
    return std::pow(10.0, exponent_scale * static_cast<double>(i - 1) /
                              static_cast<double>(d - 1));
}

double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

double rastrigin(const Eigen::VectorXd& w) {
    int d = static_cast<int>(w.size());
    double cos_sum = 0.0;
    for (int i = 0; i < d; ++i) cos_sum += std::cos(2.0 * M_PI * w[i]);
    return 10.0 * (d - cos_sum) + w.squaredNorm();
}

double weierstrass_w0() {
    double w0 = 0.0;
    double pk = 1.0;  // 2^-k
    double tk = 1.0;  // 3^k
    for (int k = 0; k <= 11; ++k) {
        w0 += pk * std::cos(M_PI * tk);
        pk *= 0.5;
        tk *= 3.0;
    }
    return w0;
}

double schaffers_f7(const Eigen::VectorXd& z) {
    int d = static_cast<int>(z.size());
    double acc = 0.0;
    for (int i = 0; i < d - 1; ++i) {
        double u = std::sqrt(z[i] * z[i] + z[i + 1] * z[i + 1]);
        double t = std::sin(50.0 * std::pow(u, 0.2));
        acc += std::sqrt(u) * (1.0 + t * t);
    }
    acc /= static_cast<double>(d - 1);
    return acc * acc;
}

double gallagher(const ProblemInstance& inst, const Eigen::VectorXd& z) {
    int d = static_cast<int>(z.size());
    double best = 0.0;
    for (const GallagherPeak& p : inst.peaks) {
        Eigen::VectorXd diff = z - p.center;
        double q = diff.cwiseProduct(p.conditioning).dot(diff);
        double v = p.weight * std::exp(-q / (2.0 * d));
        if (v > best) best = v;
    }
    double r = 10.0 - best;
    return r * r;
}

double base_value(const ProblemInstance& inst, const Eigen::VectorXd& z,
                  const Eigen::VectorXd& x) {
    const int d = static_cast<int>(z.size());
    const int cls = inst.spec.class_id.value();
    switch (cls) {
        case 1:
            return z.squaredNorm();
        case 2:
        case 10: {
            double acc = 0.0;
            for (int i = 0; i < d; ++i)
                acc += conditioning_coeff(i + 1, d, 6.0) * z[i] * z[i];
            return acc;
        }
        case 3:
            return rastrigin(z);
        case 4: {
            Eigen::VectorXd w(d);
            for (int i = 0; i < d; ++i) {
                double s = conditioning_coeff(i + 1, d, 0.5);
                if ((i + 1) % 2 == 1 && z[i] > 0) s *= 10.0;
                w[i] = s * z[i];
            }
            return rastrigin(w);
        }
        case 5: {
            // Linear slope works on raw x with boundary clipping at the
            // optimum corner.
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                double sgn = sign_of(inst.x_opt[i]);
                double s = sgn * conditioning_coeff(i + 1, d, 1.0);
                double zi = (sgn * x[i] < 5.0) ? x[i] : inst.x_opt[i];
                acc += 5.0 * std::abs(s) - s * zi;
            }
            return acc;
        }
        case 6: {
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                double w = (z[i] * inst.x_opt[i] > 0) ? 100.0 : 1.0;
                acc += (w * z[i]) * (w * z[i]);
            }
            return acc;
        }
        case 7: {
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                double stepped = std::floor(z[i] + 0.5);
                acc += conditioning_coeff(i + 1, d, 6.0) * stepped * stepped;
            }
            return acc + 1e-4 * z.squaredNorm();
        }
        case 8:
        case 9: {
            double acc = 0.0;
            for (int i = 0; i < d - 1; ++i) {
                double ui = z[i] + 1.0;
                double un = z[i + 1] + 1.0;
                double a = ui * ui - un;
                acc += 100.0 * a * a + (ui - 1.0) * (ui - 1.0);
            }
            return acc;
        }
        case 11: {
            double acc = 1e6 * z[0] * z[0];
            for (int i = 1; i < d; ++i) acc += z[i] * z[i];
            return acc;
        }
        case 12: {
            double acc = z[0] * z[0];
            for (int i = 1; i < d; ++i) acc += 1e6 * z[i] * z[i];
            return acc;
        }
        case 13: {
            double tail = 0.0;
            for (int i = 1; i < d; ++i) tail += z[i] * z[i];
            return z[0] * z[0] + 100.0 * std::sqrt(tail);
        }
        case 14: {
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                double p = 2.0 + 4.0 * static_cast<double>(i) /
                                     static_cast<double>(d - 1);
                acc += std::pow(std::abs(z[i]), p);
            }
            return std::sqrt(acc);
        }
        case 15:
            return rastrigin(z);
        case 16: {
            static const double w0 = weierstrass_w0();
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                double vi = 0.01 * z[i];
                double pk = 1.0, tk = 1.0;
                for (int k = 0; k <= 11; ++k) {
                    acc += pk * std::cos(2.0 * M_PI * tk * (vi + 0.5));
                    pk *= 0.5;
                    tk *= 3.0;
                }
            }
            return acc - d * w0;
        }
        case 17:
            return schaffers_f7(z);
        case 18: {
            Eigen::VectorXd zh(d);
            for (int i = 0; i < d; ++i)
                zh[i] = conditioning_coeff(i + 1, d, 3.0) * z[i];
            return schaffers_f7(zh);
        }
        case 19: {
            double acc = 0.0;
            for (int i = 0; i < d - 1; ++i) {
                double ui = z[i] + 1.0;
                double un = z[i + 1] + 1.0;
                double a = ui * ui - un;
                double r = 100.0 * a * a + (ui - 1.0) * (ui - 1.0);
                acc += r / 4000.0 - std::cos(r);
            }
            return 10.0 / static_cast<double>(d - 1) * acc + 10.0;
        }
        case 20: {
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                double v = 100.0 * z[i] + 420.9687462275036;
                acc += v * std::sin(std::sqrt(std::abs(v)));
            }
            return 418.9828872724339 * d - acc;
        }
        case 21:
        case 22:
            return gallagher(inst, z);
        case 23: {
            double prod = 1.0;
            double d12 = std::pow(static_cast<double>(d), 1.2);
            for (int i = 0; i < d; ++i) {
                double sum = 0.0;
                double p2 = 2.0;
                for (int j = 1; j <= 32; ++j) {
                    double t = p2 * z[i];
                    sum += std::abs(t - std::round(t)) / p2;
                    p2 *= 2.0;
                }
                prod *= std::pow(1.0 + (i + 1) * sum, 10.0 / d12);
            }
            return 10.0 / (d * d) * (prod - 1.0);
        }
        case 24: {
            const double mu0 = 2.5;
            double s = 1.0 - 1.0 / (2.0 * std::sqrt(d + 20.0) - 8.2);
            double mu1 = -std::sqrt((mu0 * mu0 - 1.0) / s);
            double sum0 = 0.0, sum1 = 0.0, cos_sum = 0.0;
            for (int i = 0; i < d; ++i) {
                double u = z[i] + mu0;
                sum0 += (u - mu0) * (u - mu0);
                sum1 += (u - mu1) * (u - mu1);
                cos_sum += std::cos(2.0 * M_PI * (u - mu0));
            }
            return std::min(sum0, d + s * sum1) + 10.0 * (d - cos_sum);
        }
        default:
            throw std::logic_error("unknown class id");
    }
}

Eigen::MatrixXd random_rotation(int d, SplitRng rng) {
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.next_gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix column signs so R has positive diagonal; makes Q unique.
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

}  // namespace

ClassId::ClassId(int value) : value_(value) {
    if (value < 1 || value > 24)
        throw std::invalid_argument("class_id must be in [1, 24], got " +
                                    std::to_string(value));
}

void InstanceSpec::validate() const {
    if (instance_id < 1)
        throw std::invalid_argument("instance_id must be >= 1, got " +
                                    std::to_string(instance_id));
    if (dim < 2)
        throw std::invalid_argument("dim must be >= 2, got " +
                                    std::to_string(dim));
}

ProblemInstance make_instance(const InstanceSpec& spec) {
    spec.validate();
    const int d = spec.dim;
    const int cls = spec.class_id.value();
    const std::uint64_t base =
        mix_seed(kSuiteSeedTag, static_cast<std::uint64_t>(cls),
                 static_cast<std::uint64_t>(spec.instance_id),
                 static_cast<std::uint64_t>(d));

    ProblemInstance inst{spec, Eigen::VectorXd(d), 0.0,
                         Eigen::MatrixXd::Identity(d, d), false, {}};

    SplitRng xopt_rng(base, 1);
    if (cls == 5) {
        for (int i = 0; i < d; ++i)
            inst.x_opt[i] = (xopt_rng.next_u64() & 1) ? 5.0 : -5.0;
    } else {
        for (int i = 0; i < d; ++i) inst.x_opt[i] = xopt_rng.uniform(-4.0, 4.0);
    }

    SplitRng fopt_rng(base, 2);
    inst.f_opt = std::round(fopt_rng.uniform(-100.0, 100.0) * 100.0) / 100.0;

    if (class_uses_rotation(cls)) {
        inst.rotation = random_rotation(d, SplitRng(base, 3));
        inst.rotated = true;
    }

    if (cls == 21 || cls == 22) {
        const int n_peaks = (cls == 21) ? 101 : 21;
        const double cond_hi = (cls == 21) ? 1e3 : 1e6;
        SplitRng peak_rng(base, 4);
        inst.peaks.reserve(n_peaks);
        inst.peaks.push_back(
            {10.0, Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)});
        for (int k = 2; k <= n_peaks; ++k) {
            GallagherPeak p;
            p.weight = 1.1 + 8.0 * static_cast<double>(k - 2) /
                                 static_cast<double>(n_peaks - 2);
            p.center.resize(d);
            for (int i = 0; i < d; ++i)
                p.center[i] = peak_rng.uniform(-4.9, 4.9);
            p.conditioning.resize(d);
            for (int i = 0; i < d; ++i)
                p.conditioning[i] =
                    std::exp(peak_rng.next_double() * std::log(cond_hi));
            inst.peaks.push_back(std::move(p));
        }
    }

    return inst;
}

double ProblemInstance::evaluate(const Eigen::VectorXd& x) const {
    if (x.size() != spec.dim)
        throw std::invalid_argument(
            "evaluate: x has length " + std::to_string(x.size()) +
            ", expected " + std::to_string(spec.dim));
    if (!x.allFinite())
        throw std::invalid_argument("evaluate: x contains non-finite values");

    Eigen::VectorXd z;
    if (spec.class_id.value() == 5) {
        z = x;  // class 5 ignores the shift/rotation transform
    } else if (rotated) {
        z = rotation * (x - x_opt);
    } else {
        z = x - x_opt;
    }
    return base_value(*this, z, x) + f_opt;
}

const std::vector<ClassDescriptor>& suite_table() {
    static const std::vector<ClassDescriptor> table = {
        {1, "Sphere", false},
        {2, "Ellipsoid", false},
        {3, "Rastrigin", false},
        {4, "Buche-Rastrigin", false},
        {5, "Linear Slope", false},
        {6, "Attractive Sector", true},
        {7, "Step Ellipsoid", false},
        {8, "Rosenbrock", false},
        {9, "Rosenbrock (rotated)", true},
        {10, "Ellipsoid (rotated)", true},
        {11, "Discus", true},
        {12, "Bent Cigar", true},
        {13, "Sharp Ridge", true},
        {14, "Different Powers", true},
        {15, "Rastrigin (rotated)", true},
        {16, "Weierstrass", true},
        {17, "Schaffers F7", true},
        {18, "Schaffers F7 (ill-conditioned)", true},
        {19, "Griewank-Rosenbrock", true},
        {20, "Schwefel", false},
        {21, "Gallagher 101 Peaks", true},
        {22, "Gallagher 21 Peaks", true},
        {23, "Katsuura", true},
        {24, "Lunacek bi-Rastrigin", true},
    };
    return table;
}

}  // namespace transopt
