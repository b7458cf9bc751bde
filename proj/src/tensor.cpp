#include "transopt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace transopt {

namespace {

using GradSink = std::function<void(TensorNode*, const Eigen::MatrixXd&)>;

bool participates(const NodePtr& n) {
    return n->requires_grad || static_cast<bool>(n->backward_fn);
}

Tensor make_op(Eigen::MatrixXd value, int rank, std::vector<NodePtr> parents,
               std::function<void(const Eigen::MatrixXd&, const GradSink&)> bf) {
    auto node = std::make_shared<TensorNode>();
    node->value = std::move(value);
    node->rank = rank;
    bool any = false;
    for (const auto& p : parents)
        if (participates(p)) any = true;
    if (any) {
        node->parents = std::move(parents);
        node->backward_fn = std::move(bf);
    }
    return Tensor(std::move(node));
}

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Tensor Tensor::matrix(Eigen::MatrixXd v, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->value = std::move(v);
    node->rank = 2;
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::vector(const Eigen::VectorXd& v, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->value = v.transpose();
    node->rank = 1;
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::row(Eigen::RowVectorXd v, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->value = std::move(v);
    node->rank = 1;
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) {
    Eigen::RowVectorXd m(1);
    m[0] = v;
    return Tensor::row(m, false);
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
    return Tensor::matrix(Eigen::MatrixXd::Zero(rows, cols), requires_grad);
}

Eigen::MatrixXd& Tensor::grad() {
    if (n_->grad.size() == 0)
        n_->grad = Eigen::MatrixXd::Zero(n_->value.rows(), n_->value.cols());
    return n_->grad;
}

void Tensor::zero_grad() {
    n_->grad = Eigen::MatrixXd::Zero(n_->value.rows(), n_->value.cols());
}

double Tensor::item() const {
    check(n_->value.size() == 1, "item: tensor is not a scalar");
    return n_->value(0, 0);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.cols() == b.rows(), "matmul: inner extents differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    int rank = (a.rank() == 1) ? 1 : 2;
    auto an = a.node();
    auto bn = b.node();
    return make_op(
        an->value * bn->value, rank, {an, bn},
        [an, bn](const Eigen::MatrixXd& g, const GradSink& sink) {
            if (participates(an)) sink(an.get(), g * bn->value.transpose());
            if (participates(bn)) sink(bn.get(), an->value.transpose() * g);
        });
}

Tensor add(const Tensor& a, const Tensor& b) {
    auto an = a.node();
    auto bn = b.node();
    const auto& av = an->value;
    const auto& bv = bn->value;

    enum class Mode { Same, RowOverA, ColOverA, RowOverB, ColOverB };
    Mode mode;
    if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
        mode = Mode::Same;
    } else if (bv.rows() == 1 && bv.cols() == av.cols()) {
        mode = Mode::RowOverA;
    } else if (bv.cols() == 1 && bv.rows() == av.rows()) {
        mode = Mode::ColOverA;
    } else if (av.rows() == 1 && av.cols() == bv.cols()) {
        mode = Mode::RowOverB;
    } else if (av.cols() == 1 && av.rows() == bv.rows()) {
        mode = Mode::ColOverB;
    } else {
        throw std::invalid_argument("add: shapes are not broadcast-compatible");
    }

    Eigen::MatrixXd out;
    switch (mode) {
        case Mode::Same: out = av + bv; break;
        case Mode::RowOverA: out = av.rowwise() + bv.row(0); break;
        case Mode::ColOverA: out = av.colwise() + bv.col(0); break;
        case Mode::RowOverB: out = bv.rowwise() + av.row(0); break;
        case Mode::ColOverB: out = bv.colwise() + av.col(0); break;
    }
    int rank = std::max(a.rank(), b.rank());
    if (out.rows() > 1) rank = 2;

    return make_op(
        std::move(out), rank, {an, bn},
        [an, bn, mode](const Eigen::MatrixXd& g, const GradSink& sink) {
            auto reduce_to = [&](const TensorNode* n) -> Eigen::MatrixXd {
                if (n->value.rows() == g.rows() && n->value.cols() == g.cols())
                    return g;
                if (n->value.rows() == 1) return g.colwise().sum();
                return g.rowwise().sum();
            };
            (void)mode;
            if (participates(an)) sink(an.get(), reduce_to(an.get()));
            if (participates(bn)) sink(bn.get(), reduce_to(bn.get()));
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.rows() == b.rows() && a.cols() == b.cols(),
          "mul: shapes differ");
    auto an = a.node();
    auto bn = b.node();
    return make_op(
        an->value.cwiseProduct(bn->value), std::max(a.rank(), b.rank()),
        {an, bn}, [an, bn](const Eigen::MatrixXd& g, const GradSink& sink) {
            if (participates(an)) sink(an.get(), g.cwiseProduct(bn->value));
            if (participates(bn)) sink(bn.get(), g.cwiseProduct(an->value));
        });
}

Tensor scale(const Tensor& a, double c) {
    auto an = a.node();
    return make_op(an->value * c, a.rank(), {an},
                   [an, c](const Eigen::MatrixXd& g, const GradSink& sink) {
                       sink(an.get(), g * c);
                   });
}

Tensor transpose(const Tensor& a) {
    auto an = a.node();
    return make_op(an->value.transpose(), 2, {an},
                   [an](const Eigen::MatrixXd& g, const GradSink& sink) {
                       sink(an.get(), g.transpose());
                   });
}

Tensor relu(const Tensor& a) {
    auto an = a.node();
    return make_op(an->value.cwiseMax(0.0), a.rank(), {an},
                   [an](const Eigen::MatrixXd& g, const GradSink& sink) {
                       // subgradient at 0 is 0
                       Eigen::MatrixXd mask =
                           (an->value.array() > 0.0).cast<double>();
                       sink(an.get(), g.cwiseProduct(mask));
                   });
}

Tensor softmax_rows(const Tensor& a) {
    auto an = a.node();
    Eigen::MatrixXd out(an->value.rows(), an->value.cols());
    for (long i = 0; i < out.rows(); ++i) {
        double m = an->value.row(i).maxCoeff();
        Eigen::ArrayXd e = (an->value.row(i).array() - m).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    auto out_copy = std::make_shared<Eigen::MatrixXd>(out);
    return make_op(
        std::move(out), a.rank(), {an},
        [an, out_copy](const Eigen::MatrixXd& g, const GradSink& sink) {
            const Eigen::MatrixXd& y = *out_copy;
            Eigen::MatrixXd da(g.rows(), g.cols());
            for (long i = 0; i < g.rows(); ++i) {
                double dot = g.row(i).dot(y.row(i));
                da.row(i) =
                    (y.row(i).array() * (g.row(i).array() - dot)).matrix();
            }
            sink(an.get(), da);
        });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
    check(gain.rank() == 1 && bias.rank() == 1,
          "layer_norm: gain/bias must be rank-1");
    check(gain.cols() == a.cols() && bias.cols() == a.cols(),
          "layer_norm: gain/bias length must match row width");
    constexpr double eps = 1e-5;
    auto an = a.node();
    auto gn = gain.node();
    auto bn = bias.node();

    const long m = a.rows(), n = a.cols();
    auto xhat = std::make_shared<Eigen::MatrixXd>(m, n);
    auto inv_std = std::make_shared<Eigen::VectorXd>(m);
    Eigen::MatrixXd out(m, n);
    for (long i = 0; i < m; ++i) {
        double mu = an->value.row(i).mean();
        Eigen::RowVectorXd centered = an->value.row(i).array() - mu;
        double var = centered.squaredNorm() / static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        xhat->row(i) = centered * is;
        out.row(i) =
            xhat->row(i).cwiseProduct(gn->value.row(0)) + bn->value.row(0);
    }
    return make_op(
        std::move(out), a.rank(), {an, gn, bn},
        [an, gn, bn, xhat, inv_std, n](const Eigen::MatrixXd& g,
                                       const GradSink& sink) {
            if (participates(an)) {
                Eigen::MatrixXd da(g.rows(), g.cols());
                for (long i = 0; i < g.rows(); ++i) {
                    Eigen::RowVectorXd gh =
                        g.row(i).cwiseProduct(gn->value.row(0));
                    double mean_gh = gh.mean();
                    double mean_ghx =
                        gh.cwiseProduct(xhat->row(i)).sum() / n;
                    da.row(i) = ((*inv_std)[i] *
                                 (gh.array() - mean_gh -
                                  xhat->row(i).array() * mean_ghx))
                                    .matrix();
                }
                sink(an.get(), da);
            }
            if (participates(gn))
                sink(gn.get(), g.cwiseProduct(*xhat).colwise().sum());
            if (participates(bn)) sink(bn.get(), g.colwise().sum());
        });
}

Tensor dropout(const Tensor& a, double p, bool training, SplitRng& rng) {
    check(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
    if (!training || p == 0.0) return a;
    auto an = a.node();
    auto mask = std::make_shared<Eigen::MatrixXd>(a.rows(), a.cols());
    const double keep_scale = 1.0 / (1.0 - p);
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j)
            (*mask)(i, j) = (rng.next_double() < p) ? 0.0 : keep_scale;
    return make_op(an->value.cwiseProduct(*mask), a.rank(), {an},
                   [an, mask](const Eigen::MatrixXd& g, const GradSink& sink) {
                       sink(an.get(), g.cwiseProduct(*mask));
                   });
}

Tensor reduce(const Tensor& a, Stat stat) {
    check(a.rows() >= 1 && a.cols() >= 1, "reduce: empty input");
    auto an = a.node();
    const long s = a.rows(), e = a.cols();

    switch (stat) {
        case Stat::Min:
        case Stat::Max: {
            auto args = std::make_shared<std::vector<long>>(e);
            Eigen::RowVectorXd out(e);
            for (long j = 0; j < e; ++j) {
                long best = 0;
                for (long i = 1; i < s; ++i) {
                    double v = an->value(i, j), b = an->value(best, j);
                    if (stat == Stat::Min ? v < b : v > b) best = i;
                }
                (*args)[j] = best;  // ties keep the lowest row index
                out[j] = an->value(best, j);
            }
            return make_op(out, 1, {an},
                           [an, args](const Eigen::MatrixXd& g,
                                      const GradSink& sink) {
                               Eigen::MatrixXd da = Eigen::MatrixXd::Zero(
                                   an->value.rows(), an->value.cols());
                               for (long j = 0; j < g.cols(); ++j)
                                   da((*args)[j], j) = g(0, j);
                               sink(an.get(), da);
                           });
        }
        case Stat::Mean: {
            Eigen::RowVectorXd out = an->value.colwise().mean();
            return make_op(out, 1, {an},
                           [an, s](const Eigen::MatrixXd& g,
                                   const GradSink& sink) {
                               sink(an.get(),
                                    (Eigen::VectorXd::Ones(s) * g.row(0)) / s);
                           });
        }
        case Stat::Std: {
            constexpr double eps = 1e-12;
            auto mu = std::make_shared<Eigen::RowVectorXd>(
                an->value.colwise().mean());
            auto sigma = std::make_shared<Eigen::RowVectorXd>(e);
            for (long j = 0; j < e; ++j) {
                double ssd = (an->value.col(j).array() - (*mu)[j])
                                 .square()
                                 .sum();
                (*sigma)[j] = std::sqrt(ssd / s + eps);
            }
            return make_op(
                *sigma, 1, {an},
                [an, mu, sigma, s](const Eigen::MatrixXd& g,
                                   const GradSink& sink) {
                    Eigen::MatrixXd da(an->value.rows(), an->value.cols());
                    for (long j = 0; j < g.cols(); ++j)
                        da.col(j) = (g(0, j) *
                                     (an->value.col(j).array() - (*mu)[j]) /
                                     (s * (*sigma)[j]))
                                        .matrix();
                    sink(an.get(), da);
                });
        }
    }
    throw std::logic_error("reduce: unknown stat");
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    check(!parts.empty(), "concat: no inputs");
    check(axis == 0 || axis == 1, "concat: axis must be 0 or 1");

    bool all_rank1 = true;
    for (const auto& t : parts)
        if (t.rank() != 1) all_rank1 = false;

    // Rank-1 tensors concatenate along their only axis (horizontally).
    int storage_axis = all_rank1 ? 1 : axis;

    long rows, cols;
    if (storage_axis == 0) {
        cols = parts[0].cols();
        rows = 0;
        for (const auto& t : parts) {
            check(t.cols() == cols, "concat: column counts differ");
            rows += t.rows();
        }
    } else {
        rows = parts[0].rows();
        cols = 0;
        for (const auto& t : parts) {
            check(t.rows() == rows, "concat: row counts differ");
            cols += t.cols();
        }
    }

    Eigen::MatrixXd out(rows, cols);
    std::vector<NodePtr> nodes;
    auto offsets = std::make_shared<std::vector<long>>();
    long off = 0;
    for (const auto& t : parts) {
        offsets->push_back(off);
        if (storage_axis == 0) {
            out.middleRows(off, t.rows()) = t.value();
            off += t.rows();
        } else {
            out.middleCols(off, t.cols()) = t.value();
            off += t.cols();
        }
        nodes.push_back(t.node());
    }

    int rank = all_rank1 ? 1 : 2;
    auto nodes_copy = std::make_shared<std::vector<NodePtr>>(nodes);
    return make_op(
        std::move(out), rank, nodes,
        [nodes_copy, offsets, storage_axis](const Eigen::MatrixXd& g,
                                            const GradSink& sink) {
            for (size_t i = 0; i < nodes_copy->size(); ++i) {
                const NodePtr& n = (*nodes_copy)[i];
                if (!participates(n)) continue;
                long off = (*offsets)[i];
                if (storage_axis == 0)
                    sink(n.get(), g.middleRows(off, n->value.rows()));
                else
                    sink(n.get(), g.middleCols(off, n->value.cols()));
            }
        });
}

Tensor slice_cols(const Tensor& a, int start, int count) {
    check(start >= 0 && count >= 1 && start + count <= a.cols(),
          "slice_cols: range out of bounds");
    auto an = a.node();
    return make_op(an->value.middleCols(start, count), a.rank(), {an},
                   [an, start, count](const Eigen::MatrixXd& g,
                                      const GradSink& sink) {
                       Eigen::MatrixXd da = Eigen::MatrixXd::Zero(
                           an->value.rows(), an->value.cols());
                       da.middleCols(start, count) = g;
                       sink(an.get(), da);
                   });
}

Tensor sum(const Tensor& a) {
    auto an = a.node();
    Eigen::RowVectorXd out(1);
    out[0] = an->value.sum();
    return make_op(out, 1, {an},
                   [an](const Eigen::MatrixXd& g, const GradSink& sink) {
                       sink(an.get(),
                            Eigen::MatrixXd::Constant(an->value.rows(),
                                                      an->value.cols(),
                                                      g(0, 0)));
                   });
}

Tensor cross_entropy_logits(const Tensor& logits,
                            const std::vector<int>& labels) {
    const long b = logits.rows(), n = logits.cols();
    check(static_cast<long>(labels.size()) == b,
          "cross_entropy_logits: label count must equal batch size");
    for (int lab : labels)
        check(lab >= 0 && lab < n, "cross_entropy_logits: label out of range");

    auto ln = logits.node();
    auto probs = std::make_shared<Eigen::MatrixXd>(b, n);
    double total = 0.0;
    for (long i = 0; i < b; ++i) {
        double m = ln->value.row(i).maxCoeff();
        Eigen::ArrayXd e = (ln->value.row(i).array() - m).exp();
        double lse = m + std::log(e.sum());
        probs->row(i) = (e / e.sum()).matrix();
        total += lse - ln->value(i, labels[i]);
    }
    Eigen::RowVectorXd out(1);
    out[0] = total / b;

    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    return make_op(out, 1, {ln},
                   [ln, probs, labels_copy, b](const Eigen::MatrixXd& g,
                                               const GradSink& sink) {
                       Eigen::MatrixXd da = *probs;
                       for (long i = 0; i < b; ++i)
                           da(i, (*labels_copy)[i]) -= 1.0;
                       sink(ln.get(), da * (g(0, 0) / b));
                   });
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar");

    // Post-order DFS over parents gives a topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::unordered_map<TensorNode*, NodePtr> keep_alive;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    TensorNode* root = loss.node().get();
    keep_alive[root] = loss.node();
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodePtr p = node->parents[idx++];
            if (visited.insert(p.get()).second) {
                keep_alive[p.get()] = p;
                stack.emplace_back(p.get(), 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Per-sweep gradient storage keeps repeated backward calls independent;
    // only leaf accumulators persist.
    std::unordered_map<TensorNode*, Eigen::MatrixXd> grads;
    grads[root] = Eigen::MatrixXd::Ones(1, 1);
    GradSink sink = [&grads](TensorNode* n, const Eigen::MatrixXd& g) {
        auto it = grads.find(n);
        if (it == grads.end())
            grads.emplace(n, g);
        else
            it->second += g;
    };

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        auto git = grads.find(node);
        if (git == grads.end()) continue;
        if (node->backward_fn) node->backward_fn(git->second, sink);
        if (node->requires_grad) {
            if (node->grad.size() == 0)
                node->grad = Eigen::MatrixXd::Zero(node->value.rows(),
                                                   node->value.cols());
            node->grad += git->second;
        }
    }
}

}  // namespace transopt
