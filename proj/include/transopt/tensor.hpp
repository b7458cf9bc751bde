#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "transopt/rng.hpp"

namespace transopt {

// Reverse-mode autodiff over dense 64-bit float tensors of rank 1 or 2.
// Rank-1 tensors are stored as 1xN row matrices; a scalar is a rank-1
// tensor of length 1. Each op builds a graph node whose backward hook
// scatters the incoming gradient to its parents.

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
    Eigen::MatrixXd value;
    int rank = 2;
    bool requires_grad = false;   // set on leaves only
    Eigen::MatrixXd grad;         // persistent accumulator for leaves
    std::vector<NodePtr> parents;
    // Receives this node's output gradient and the per-sweep gradient sink.
    std::function<void(const Eigen::MatrixXd&,
                       const std::function<void(TensorNode*, const Eigen::MatrixXd&)>&)>
        backward_fn;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor matrix(Eigen::MatrixXd v, bool requires_grad = false);
    static Tensor vector(const Eigen::VectorXd& v, bool requires_grad = false);
    static Tensor row(Eigen::RowVectorXd v, bool requires_grad = false);
    static Tensor scalar(double v);
    static Tensor zeros(int rows, int cols, bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const Eigen::MatrixXd& value() const { return n_->value; }
    Eigen::MatrixXd& value_mut() { return n_->value; }
    int rank() const { return n_->rank; }
    long rows() const { return n_->value.rows(); }
    long cols() const { return n_->value.cols(); }
    long numel() const { return n_->value.size(); }
    bool requires_grad() const { return n_->requires_grad; }

    // Leaf gradient accumulator (allocated zero on first access).
    Eigen::MatrixXd& grad();
    void zero_grad();

    double item() const;

    NodePtr node() const { return n_; }
    explicit Tensor(NodePtr n) : n_(std::move(n)) {}

private:
    NodePtr n_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
// Broadcasting: same shape, row vector over rows, or column over columns.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor scale(const Tensor& a, double c);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);
Tensor dropout(const Tensor& a, double p, bool training, SplitRng& rng);

enum class Stat { Min, Max, Mean, Std };
// Column-wise statistic over the sample axis; [s, e] -> rank-1 [e].
Tensor reduce(const Tensor& a, Stat stat);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_cols(const Tensor& a, int start, int count);
Tensor sum(const Tensor& a);

// Mean over the batch of -log softmax(logits)[label]; fused stable form.
Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels);

// Reverse topological sweep from a scalar loss; leaf grads accumulate
// across calls until explicitly zeroed.
void backward(const Tensor& loss);

}  // namespace transopt
