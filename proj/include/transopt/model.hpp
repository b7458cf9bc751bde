#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "transopt/sampling.hpp"
#include "transopt/tensor.hpp"

namespace transopt {

struct ModelConfig {
    int d = 3;             // problem dimension; model input width is d+1
    int e = 30;            // embedding size
    int h = 1;             // attention heads, must divide e
    int L = 1;             // encoder layers
    int ffn_mult = 4;
    double dropout_p = 0.1;
    int head_hidden = 64;
    int n_classes = 24;

    void validate() const;
};

struct EncoderLayer {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gain, ln1_bias;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor ln2_gain, ln2_bias;
};

// Set encoder + statistics pooling + classification head. Rows of the
// input are treated as an unordered sample set: no positional encoding,
// so eval-mode logits are invariant to row permutation.
class TransOptModel {
public:
    static TransOptModel init(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }

    // input is the [s, d+1] design matrix; returns [s, e].
    Tensor encode(const Eigen::MatrixXd& input, SplitRng* rng = nullptr) const;

    // Raw logits of length n_classes.
    Tensor classify(const Eigen::MatrixXd& input, SplitRng* rng = nullptr) const;
    Tensor classify(const DesignMatrix& design, SplitRng* rng = nullptr) const;

    std::vector<std::pair<std::string, Tensor>> parameters() const;
    long parameter_count() const;

    void zero_grads();
    TransOptModel clone() const;  // deep copy of parameters

    // Snapshot/restore of parameter values (for best-epoch restoration).
    std::vector<Eigen::MatrixXd> snapshot() const;
    void restore(const std::vector<Eigen::MatrixXd>& snap);

private:
    ModelConfig cfg_;
    Tensor in_w_, in_b_;
    std::vector<EncoderLayer> layers_;
    Tensor head_w1_, head_b1_, head_w2_, head_b2_;
    bool training_ = false;
};

// concat(min, max, mean, std) over the sample axis; [s, e] -> [4e].
Tensor pool_stats(const Tensor& encoded);

// "TOPT1" flat binary container; bit-exact round-trip.
void save_checkpoint(const TransOptModel& model, const std::string& path);
TransOptModel load_checkpoint(const std::string& path);

}  // namespace transopt
