#include "transopt/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

#include "transopt/rng.hpp"

namespace transopt {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void seeded_shuffle(std::vector<int>& v, SplitRng& rng) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        int k = static_cast<int>(rng.next_below(i + 1));
        std::swap(v[i], v[k]);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("train config: lr must be > 0");
    if (patience < 1)
        throw std::invalid_argument("train config: patience must be >= 1");
    if (folds < 2)
        throw std::invalid_argument("train config: folds must be >= 2");
    if (val_fraction <= 0.0 || val_fraction >= 0.5)
        throw std::invalid_argument(
            "train config: val_fraction must be in (0, 0.5)");
    if (max_epochs < 1 || batch_size < 1)
        throw std::invalid_argument(
            "train config: max_epochs and batch_size must be >= 1");
}

std::vector<int> stratified_kfold(const std::vector<int>& labels, int k,
                                  std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
    std::map<int, std::vector<int>> by_class;
    for (size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(static_cast<int>(i));

    std::vector<int> assignment(labels.size(), -1);
    for (auto& [cls, members] : by_class) {
        if (static_cast<int>(members.size()) < k)
            throw std::invalid_argument(
                "stratified_kfold: class " + std::to_string(cls) + " has " +
                std::to_string(members.size()) + " members, fewer than k=" +
                std::to_string(k));
        SplitRng rng(mix_seed(seed, static_cast<std::uint64_t>(cls)), 0);
        seeded_shuffle(members, rng);
        for (size_t i = 0; i < members.size(); ++i)
            assignment[members[i]] = static_cast<int>(i % k);
    }
    return assignment;
}

void Adam::step(std::vector<std::pair<std::string, Tensor>>& params) {
    if (m_.empty()) {
        for (auto& [name, t] : params) {
            m_.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
            v_.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("adam: parameter list size changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i].second;
        const Eigen::MatrixXd& g = p.grad();
        if (g.rows() != p.rows() || g.cols() != p.cols())
            throw std::invalid_argument("adam: gradient shape mismatch for " +
                                        params[i].first);
        m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
        v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
        Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
        Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
        p.value_mut().array() -= lr_ * m_hat / (v_hat.sqrt() + kEps);
    }
}

int argmax_class(const Eigen::MatrixXd& logits) {
    int best = 0;
    for (int j = 1; j < logits.size(); ++j)
        if (logits(0, j) > logits(0, best)) best = j;
    return best;
}

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || labels.empty())
        throw std::invalid_argument("accuracy: size mismatch or empty input");
    int correct = 0;
    for (size_t i = 0; i < labels.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

FoldResult train_fold(const ModelConfig& model_cfg,
                      const std::vector<DesignMatrix>& dataset,
                      const std::vector<int>& fold_assignment, int fold_index,
                      const TrainConfig& train_cfg, Eigen::MatrixXi* confusion,
                      TransOptModel* best_model_out) {
    train_cfg.validate();
    if (fold_assignment.size() != dataset.size())
        throw std::invalid_argument("train_fold: assignment size mismatch");
    if (fold_index < 0 || fold_index >= train_cfg.folds)
        throw std::invalid_argument("train_fold: fold index out of range");

    const std::uint64_t base = mix_seed(train_cfg.seed,
                                        static_cast<std::uint64_t>(fold_index));

    std::vector<int> test_idx, rest_idx;
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (fold_assignment[i] == fold_index)
            test_idx.push_back(static_cast<int>(i));
        else
            rest_idx.push_back(static_cast<int>(i));
    }
    if (test_idx.empty() || rest_idx.empty())
        throw std::invalid_argument("train_fold: empty train or test split");

    // Stratified validation split carved from the training portion (the
    // held-out CV fold is never used for early stopping).
    std::map<int, std::vector<int>> rest_by_class;
    for (int i : rest_idx) rest_by_class[dataset[i].class_label].push_back(i);
    std::vector<int> train_idx, val_idx;
    for (auto& [cls, members] : rest_by_class) {
        SplitRng rng(mix_seed(base, 4, static_cast<std::uint64_t>(cls)), 0);
        seeded_shuffle(members, rng);
        int n_val = std::max(
            1, static_cast<int>(std::llround(
                   train_cfg.val_fraction * static_cast<double>(members.size()))));
        if (n_val >= static_cast<int>(members.size()))
            throw std::invalid_argument(
                "train_fold: class " + std::to_string(cls) +
                " too small for a validation split");
        for (size_t i = 0; i < members.size(); ++i)
            (static_cast<int>(i) < n_val ? val_idx : train_idx)
                .push_back(members[i]);
    }

    TransOptModel model = TransOptModel::init(model_cfg, mix_seed(base, 1));
    Adam opt(train_cfg.lr);
    SplitRng shuffle_rng(base, 2);
    SplitRng dropout_rng(base, 3);
    auto params = model.parameters();

    auto eval_loss = [&](const std::vector<int>& idx) {
        model.set_training(false);
        double total = 0.0;
        for (int i : idx) {
            Tensor logits = model.classify(dataset[i]);
            total += cross_entropy_logits(logits,
                                          {dataset[i].class_label - 1})
                         .item();
        }
        return total / static_cast<double>(idx.size());
    };

    FoldResult result;
    result.fold_index = fold_index;
    EarlyStopping stopper{train_cfg.min_delta, train_cfg.patience};
    double best_raw = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> best_snapshot = model.snapshot();

    std::vector<int> order = train_idx;
    for (int epoch = 0; epoch < train_cfg.max_epochs; ++epoch) {
        model.set_training(true);
        seeded_shuffle(order, shuffle_rng);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size();
             start += train_cfg.batch_size) {
            size_t stop = std::min(order.size(),
                                   start + static_cast<size_t>(
                                               train_cfg.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            model.zero_grads();
            for (size_t i = start; i < stop; ++i) {
                const DesignMatrix& design = dataset[order[i]];
                Tensor logits = model.classify(design, &dropout_rng);
                Tensor loss = cross_entropy_logits(
                    logits, {design.class_label - 1});
                epoch_loss += loss.item();
                backward(scale(loss, inv_batch));
            }
            opt.step(params);
        }
        result.train_loss_curve.push_back(
            epoch_loss / static_cast<double>(order.size()));

        double val_loss = eval_loss(val_idx);
        result.val_loss_curve.push_back(val_loss);
        result.epochs_run = epoch + 1;
        if (val_loss < best_raw) {
            best_raw = val_loss;
            best_snapshot = model.snapshot();
        }
        if (stopper.observe(val_loss)) break;
    }
    result.best_val_loss = best_raw;
    model.restore(best_snapshot);

    model.set_training(false);
    std::vector<int> preds, labs;
    for (int i : test_idx) {
        Tensor logits = model.classify(dataset[i]);
        preds.push_back(argmax_class(logits.value()) + 1);
        labs.push_back(dataset[i].class_label);
        if (confusion)
            (*confusion)(dataset[i].class_label - 1,
                         argmax_class(logits.value())) += 1;
    }
    result.test_accuracy = accuracy(preds, labs);
    if (best_model_out) *best_model_out = model;
    return result;
}

CVReport cross_validate(const ModelConfig& model_cfg,
                        const std::vector<DesignMatrix>& dataset,
                        const TrainConfig& train_cfg, int jobs) {
    train_cfg.validate();
    model_cfg.validate();
    std::vector<int> labels;
    labels.reserve(dataset.size());
    for (const auto& d : dataset) labels.push_back(d.class_label);
    std::vector<int> assignment =
        stratified_kfold(labels, train_cfg.folds, train_cfg.seed);

    CVReport report;
    report.model_cfg = model_cfg;
    report.train_cfg = train_cfg;
    report.folds.resize(train_cfg.folds);
    std::vector<Eigen::MatrixXi> confusions(
        train_cfg.folds,
        Eigen::MatrixXi::Zero(model_cfg.n_classes, model_cfg.n_classes));

    if (jobs < 1) jobs = 1;
    std::atomic<int> next_fold{0};
    auto worker = [&]() {
        for (;;) {
            int fold = next_fold.fetch_add(1);
            if (fold >= train_cfg.folds) break;
            report.folds[fold] =
                train_fold(model_cfg, dataset, assignment, fold, train_cfg,
                           &confusions[fold]);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        int n_threads = std::min(jobs, train_cfg.folds);
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Ordered reduction by fold index.
    report.confusion =
        Eigen::MatrixXi::Zero(model_cfg.n_classes, model_cfg.n_classes);
    double mean = 0.0;
    for (int f = 0; f < train_cfg.folds; ++f) {
        report.confusion += confusions[f];
        mean += report.folds[f].test_accuracy;
    }
    mean /= train_cfg.folds;
    double var = 0.0;
    for (const auto& fr : report.folds) {
        double diff = fr.test_accuracy - mean;
        var += diff * diff;
    }
    report.mean_accuracy = mean;
    report.std_accuracy = std::sqrt(var / train_cfg.folds);
    return report;
}

}  // namespace transopt
