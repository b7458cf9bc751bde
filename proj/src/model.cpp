#include "transopt/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace transopt {

namespace {

Tensor glorot(int fan_in, int fan_out, SplitRng& rng) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
        for (int j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-limit, limit);
    return Tensor::matrix(std::move(w), true);
}

Tensor zeros_row(int n) {
    return Tensor::row(Eigen::RowVectorXd::Zero(n), true);
}

Tensor ones_row(int n) {
    return Tensor::row(Eigen::RowVectorXd::Ones(n), true);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), b);
}

}  // namespace

void ModelConfig::validate() const {
    if (e < 1 || h < 1 || L < 1 || ffn_mult < 1 || head_hidden < 1)
        throw std::invalid_argument("model config: sizes must be >= 1");
    if (d < 1) throw std::invalid_argument("model config: d must be >= 1");
    if (e % h != 0)
        throw std::invalid_argument(
            "model config: embedding size " + std::to_string(e) +
            " is not divisible by head count " + std::to_string(h));
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw std::invalid_argument("model config: dropout_p must be in [0, 1)");
}

TransOptModel TransOptModel::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    TransOptModel m;
    m.cfg_ = cfg;
    SplitRng rng(seed, 0x6D6F64656CULL);  // "model"

    m.in_w_ = glorot(cfg.d + 1, cfg.e, rng);
    m.in_b_ = zeros_row(cfg.e);

    m.layers_.resize(cfg.L);
    for (int l = 0; l < cfg.L; ++l) {
        EncoderLayer& lay = m.layers_[l];
        lay.wq = glorot(cfg.e, cfg.e, rng);
        lay.bq = zeros_row(cfg.e);
        lay.wk = glorot(cfg.e, cfg.e, rng);
        lay.bk = zeros_row(cfg.e);
        lay.wv = glorot(cfg.e, cfg.e, rng);
        lay.bv = zeros_row(cfg.e);
        lay.wo = glorot(cfg.e, cfg.e, rng);
        lay.bo = zeros_row(cfg.e);
        lay.ln1_gain = ones_row(cfg.e);
        lay.ln1_bias = zeros_row(cfg.e);
        lay.ffn_w1 = glorot(cfg.e, cfg.ffn_mult * cfg.e, rng);
        lay.ffn_b1 = zeros_row(cfg.ffn_mult * cfg.e);
        lay.ffn_w2 = glorot(cfg.ffn_mult * cfg.e, cfg.e, rng);
        lay.ffn_b2 = zeros_row(cfg.e);
        lay.ln2_gain = ones_row(cfg.e);
        lay.ln2_bias = zeros_row(cfg.e);
    }

    m.head_w1_ = glorot(4 * cfg.e, cfg.head_hidden, rng);
    m.head_b1_ = zeros_row(cfg.head_hidden);
    m.head_w2_ = glorot(cfg.head_hidden, cfg.n_classes, rng);
    m.head_b2_ = zeros_row(cfg.n_classes);
    return m;
}

Tensor TransOptModel::encode(const Eigen::MatrixXd& input,
                             SplitRng* rng) const {
    if (input.cols() != cfg_.d + 1)
        throw std::invalid_argument(
            "encode: input width " + std::to_string(input.cols()) +
            " does not match d+1 = " + std::to_string(cfg_.d + 1));
    if (training_ && cfg_.dropout_p > 0.0 && rng == nullptr)
        throw std::invalid_argument("encode: training mode needs an rng");

    SplitRng dummy(0);
    SplitRng& r = rng ? *rng : dummy;
    const int dk = cfg_.e / cfg_.h;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));

    Tensor x = linear(Tensor::matrix(input), in_w_, in_b_);
    for (const EncoderLayer& lay : layers_) {
        Tensor q = linear(x, lay.wq, lay.bq);
        Tensor k = linear(x, lay.wk, lay.bk);
        Tensor v = linear(x, lay.wv, lay.bv);
        std::vector<Tensor> heads;
        heads.reserve(cfg_.h);
        for (int i = 0; i < cfg_.h; ++i) {
            Tensor qi = slice_cols(q, i * dk, dk);
            Tensor ki = slice_cols(k, i * dk, dk);
            Tensor vi = slice_cols(v, i * dk, dk);
            Tensor att =
                softmax_rows(scale(matmul(qi, transpose(ki)), att_scale));
            heads.push_back(matmul(att, vi));
        }
        Tensor merged = (cfg_.h == 1) ? heads[0] : concat(heads, 1);
        Tensor att_out = linear(merged, lay.wo, lay.bo);
        att_out = dropout(att_out, cfg_.dropout_p, training_, r);
        x = layer_norm(add(x, att_out), lay.ln1_gain, lay.ln1_bias);

        Tensor f = relu(linear(x, lay.ffn_w1, lay.ffn_b1));
        f = dropout(f, cfg_.dropout_p, training_, r);
        f = linear(f, lay.ffn_w2, lay.ffn_b2);
        x = layer_norm(add(x, f), lay.ln2_gain, lay.ln2_bias);
    }
    return x;
}

Tensor pool_stats(const Tensor& encoded) {
    if (encoded.rows() < 1)
        throw std::invalid_argument("pool_stats: empty input");
    return concat({reduce(encoded, Stat::Min), reduce(encoded, Stat::Max),
                   reduce(encoded, Stat::Mean), reduce(encoded, Stat::Std)},
                  0);
}

Tensor TransOptModel::classify(const Eigen::MatrixXd& input,
                               SplitRng* rng) const {
    SplitRng dummy(0);
    SplitRng& r = rng ? *rng : dummy;
    Tensor pooled = pool_stats(encode(input, rng));
    Tensor hidden = relu(linear(pooled, head_w1_, head_b1_));
    hidden = dropout(hidden, cfg_.dropout_p, training_, r);
    return linear(hidden, head_w2_, head_b2_);
}

Tensor TransOptModel::classify(const DesignMatrix& design,
                               SplitRng* rng) const {
    if (design.d != cfg_.d)
        throw std::invalid_argument("classify: design dimension mismatch");
    return classify(design.input(), rng);
}

std::vector<std::pair<std::string, Tensor>> TransOptModel::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("input.w", in_w_);
    out.emplace_back("input.b", in_b_);
    for (size_t l = 0; l < layers_.size(); ++l) {
        const EncoderLayer& lay = layers_[l];
        std::string p = "layer" + std::to_string(l) + ".";
        out.emplace_back(p + "wq", lay.wq);
        out.emplace_back(p + "bq", lay.bq);
        out.emplace_back(p + "wk", lay.wk);
        out.emplace_back(p + "bk", lay.bk);
        out.emplace_back(p + "wv", lay.wv);
        out.emplace_back(p + "bv", lay.bv);
        out.emplace_back(p + "wo", lay.wo);
        out.emplace_back(p + "bo", lay.bo);
        out.emplace_back(p + "ln1.gain", lay.ln1_gain);
        out.emplace_back(p + "ln1.bias", lay.ln1_bias);
        out.emplace_back(p + "ffn.w1", lay.ffn_w1);
        out.emplace_back(p + "ffn.b1", lay.ffn_b1);
        out.emplace_back(p + "ffn.w2", lay.ffn_w2);
        out.emplace_back(p + "ffn.b2", lay.ffn_b2);
        out.emplace_back(p + "ln2.gain", lay.ln2_gain);
        out.emplace_back(p + "ln2.bias", lay.ln2_bias);
    }
    out.emplace_back("head.w1", head_w1_);
    out.emplace_back("head.b1", head_b1_);
    out.emplace_back("head.w2", head_w2_);
    out.emplace_back("head.b2", head_b2_);
    return out;
}

long TransOptModel::parameter_count() const {
    long n = 0;
    for (const auto& [name, t] : parameters()) n += t.numel();
    return n;
}

void TransOptModel::zero_grads() {
    for (auto& [name, t] : parameters()) const_cast<Tensor&>(t).zero_grad();
}

TransOptModel TransOptModel::clone() const {
    TransOptModel copy = TransOptModel::init(cfg_, 0);
    auto src = parameters();
    auto dst = copy.parameters();
    for (size_t i = 0; i < src.size(); ++i)
        dst[i].second.value_mut() = src[i].second.value();
    copy.training_ = training_;
    return copy;
}

std::vector<Eigen::MatrixXd> TransOptModel::snapshot() const {
    std::vector<Eigen::MatrixXd> snap;
    for (const auto& [name, t] : parameters()) snap.push_back(t.value());
    return snap;
}

void TransOptModel::restore(const std::vector<Eigen::MatrixXd>& snap) {
    auto params = parameters();
    if (snap.size() != params.size())
        throw std::invalid_argument("restore: snapshot size mismatch");
    for (size_t i = 0; i < params.size(); ++i)
        params[i].second.value_mut() = snap[i];
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
    return v;
}

}  // namespace

void save_checkpoint(const TransOptModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write("TOPT1", 5);
    const ModelConfig& c = model.config();
    write_pod<std::int32_t>(out, c.d);
    write_pod<std::int32_t>(out, c.e);
    write_pod<std::int32_t>(out, c.h);
    write_pod<std::int32_t>(out, c.L);
    write_pod<std::int32_t>(out, c.ffn_mult);
    write_pod<std::int32_t>(out, c.head_hidden);
    write_pod<std::int32_t>(out, c.n_classes);
    write_pod<double>(out, c.dropout_p);

    auto params = model.parameters();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
        // Row-major element order.
        for (long i = 0; i < t.rows(); ++i)
            for (long j = 0; j < t.cols(); ++j)
                write_pod<double>(out, t.value()(i, j));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

TransOptModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "TOPT1", 5) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    ModelConfig c;
    c.d = read_pod<std::int32_t>(in);
    c.e = read_pod<std::int32_t>(in);
    c.h = read_pod<std::int32_t>(in);
    c.L = read_pod<std::int32_t>(in);
    c.ffn_mult = read_pod<std::int32_t>(in);
    c.head_hidden = read_pod<std::int32_t>(in);
    c.n_classes = read_pod<std::int32_t>(in);
    c.dropout_p = read_pod<double>(in);

    TransOptModel model = TransOptModel::init(c, 0);
    auto params = model.parameters();
    std::uint32_t count = read_pod<std::uint32_t>(in);
    if (count != params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& [name, t] : params) {
        std::uint32_t len = read_pod<std::uint32_t>(in);
        std::string stored(len, '\0');
        in.read(stored.data(), len);
        if (stored != name)
            throw std::runtime_error("checkpoint: parameter name mismatch (" +
                                     stored + " vs " + name + ")");
        read_pod<std::uint32_t>(in);  // rank, implied by the config
        std::uint64_t rows = read_pod<std::uint64_t>(in);
        std::uint64_t cols = read_pod<std::uint64_t>(in);
        if (rows != static_cast<std::uint64_t>(t.rows()) ||
            cols != static_cast<std::uint64_t>(t.cols()))
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        Tensor& tm = const_cast<Tensor&>(t);
        for (long i = 0; i < t.rows(); ++i)
            for (long j = 0; j < t.cols(); ++j)
                tm.value_mut()(i, j) = read_pod<double>(in);
    }
    return model;
}

}  // namespace transopt
