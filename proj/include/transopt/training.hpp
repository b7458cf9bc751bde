#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "transopt/model.hpp"
#include "transopt/sampling.hpp"

namespace transopt {

struct TrainConfig {
    double lr = 0.001;
    int max_epochs = 200;
    int patience = 5;
    double min_delta = 0.001;
    int batch_size = 32;
    int folds = 10;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Within each class, members are shuffled and dealt round-robin, so
// per-class fold counts differ by at most one. Returns fold index per item.
std::vector<int> stratified_kfold(const std::vector<int>& labels, int k,
                                  std::uint64_t seed);

// Pure early-stopping rule: stop once the validation loss has failed to
// improve on the running best by at least min_delta for patience epochs.
struct EarlyStopping {
    double min_delta;
    int patience;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;

    // Returns true when training should stop after this epoch.
    bool observe(double val_loss) {
        if (val_loss < best - min_delta)
            stale = 0;
        else
            ++stale;
        if (val_loss < best) best = val_loss;
        return stale >= patience;
    }
};

// Standard Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
public:
    explicit Adam(double lr) : lr_(lr) {}

    void step(std::vector<std::pair<std::string, Tensor>>& params);
    int steps_taken() const { return t_; }

private:
    double lr_;
    int t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

struct FoldResult {
    int fold_index = 0;
    double test_accuracy = 0.0;
    int epochs_run = 0;
    std::vector<double> train_loss_curve;
    std::vector<double> val_loss_curve;
    double best_val_loss = 0.0;
};

struct CVReport {
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    Eigen::MatrixXi confusion;  // [24, 24], rows = true class
};

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels);

// Argmax with lowest-index tie-break.
int argmax_class(const Eigen::MatrixXd& logits);

FoldResult train_fold(const ModelConfig& model_cfg,
                      const std::vector<DesignMatrix>& dataset,
                      const std::vector<int>& fold_assignment, int fold_index,
                      const TrainConfig& train_cfg,
                      Eigen::MatrixXi* confusion = nullptr,
                      TransOptModel* best_model_out = nullptr);

// jobs > 1 trains folds on a worker pool; per-fold computation is
// sequential and seeded per fold, so results do not depend on jobs.
CVReport cross_validate(const ModelConfig& model_cfg,
                        const std::vector<DesignMatrix>& dataset,
                        const TrainConfig& train_cfg, int jobs = 1);

}  // namespace transopt
