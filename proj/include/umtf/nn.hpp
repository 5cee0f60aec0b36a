#pragma once
// Small training toolkit shared by the visual embedding and the graph
// network: flat parameter views, Adam/SGD, batch normalization with
// current-batch statistics, activations, init helpers.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "umtf/common.hpp"

namespace umtf {

struct TensorView {
    std::string name;
    double* data = nullptr;
    Eigen::Index size = 0;
};

inline TensorView view_of(const std::string& name, Eigen::MatrixXd& m) {
    return {name, m.data(), m.size()};
}
inline TensorView view_of(const std::string& name, Eigen::VectorXd& v) {
    return {name, v.data(), v.size()};
}

class AdamOptimizer {
  public:
    AdamOptimizer(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<TensorView>& params, const std::vector<TensorView>& grads) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(Eigen::VectorXd::Zero(p.size));
                v_.emplace_back(Eigen::VectorXd::Zero(p.size));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t k = 0; k < params.size(); ++k) {
            Eigen::Map<Eigen::VectorXd> p(params[k].data, params[k].size);
            Eigen::Map<const Eigen::VectorXd> g0(grads[k].data, grads[k].size);
            const Eigen::VectorXd g = g0 + wd_ * p;
            m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
            v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
            const Eigen::VectorXd mhat = m_[k] / bc1;
            const Eigen::VectorXd vhat = v_[k] / bc2;
            p -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
        }
    }

  private:
    double lr_, wd_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Eigen::VectorXd> m_, v_;
};

class SgdOptimizer {
  public:
    SgdOptimizer(double lr, double weight_decay) : lr_(lr), wd_(weight_decay) {}

    void step(const std::vector<TensorView>& params, const std::vector<TensorView>& grads) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            Eigen::Map<Eigen::VectorXd> p(params[k].data, params[k].size);
            Eigen::Map<const Eigen::VectorXd> g(grads[k].data, grads[k].size);
            p -= lr_ * (g + wd_ * p);
        }
    }

  private:
    double lr_, wd_;
};

// Batch normalization over the rows of x (one statistic per column), always
// using the statistics of the current batch.
struct BnCache {
    Eigen::VectorXd inv_std;
    Eigen::MatrixXd xhat;
};

inline Eigen::MatrixXd bn_forward(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma,
                                  const Eigen::VectorXd& beta, double eps, BnCache& cache) {
    const double n = static_cast<double>(x.rows());
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / n;
    cache.inv_std = (var.array() + eps).rsqrt().matrix().transpose();
    cache.xhat = centered.array().rowwise() * cache.inv_std.transpose().array();
    Eigen::MatrixXd y = cache.xhat.array().rowwise() * gamma.transpose().array();
    y.array().rowwise() += beta.transpose().array();
    return y;
}

inline Eigen::MatrixXd bn_backward(const Eigen::MatrixXd& dy, const Eigen::VectorXd& gamma,
                                   const BnCache& cache, Eigen::VectorXd& dgamma,
                                   Eigen::VectorXd& dbeta) {
    const double n = static_cast<double>(dy.rows());
    dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix().transpose();
    dbeta += dy.colwise().sum().transpose();
    const Eigen::MatrixXd dxhat = dy.array().rowwise() * gamma.transpose().array();
    const Eigen::RowVectorXd mean_dxhat = dxhat.colwise().mean();
    const Eigen::RowVectorXd mean_dxhat_xhat =
        (dxhat.array() * cache.xhat.array()).colwise().sum() / n;
    Eigen::MatrixXd dx = dxhat;
    dx.array().rowwise() -= mean_dxhat.array();
    dx -= (cache.xhat.array().rowwise() * mean_dxhat_xhat.array()).matrix();
    dx.array().rowwise() *= cache.inv_std.transpose().array();
    return dx;
}

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
// derivative expressed through the output: 1 for positive, z + 1 otherwise
inline double elu_grad_from_output(double z) { return z > 0.0 ? 1.0 : z + 1.0; }

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline Eigen::MatrixXd init_affine_weight(Rng& rng, int fan_in, int fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    return w;
}

inline Eigen::VectorXd init_affine_bias(Rng& rng, int fan_in, int fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::VectorXd b(fan_out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
    return b;
}

// Mean cross-entropy over labeled rows (label >= 0); writes dloss/dlogits.
inline double cross_entropy_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                                 Eigen::MatrixXd* dlogits = nullptr) {
    const Eigen::Index n = logits.rows();
    if (dlogits) dlogits->setZero(n, logits.cols());
    double loss = 0.0;
    int labeled = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (labels[static_cast<std::size_t>(i)] >= 0) ++labeled;
    if (labeled == 0) throw EvalError("cross_entropy_loss: no labeled rows");
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0) continue;
        const double mx = logits.row(i).maxCoeff();
        const Eigen::ArrayXd shifted = logits.row(i).transpose().array() - mx;
        const double lse = std::log(shifted.exp().sum());
        loss += -(shifted(y) - lse);
        if (dlogits) {
            Eigen::ArrayXd soft = (shifted - lse).exp();
            soft(y) -= 1.0;
            dlogits->row(i) = (soft / static_cast<double>(labeled)).matrix().transpose();
        }
    }
    return loss / static_cast<double>(labeled);
}

// Batch-hard triplet loss under cosine distance d = 1 - cos.  Rows are
// unit-normalized internally; labels use -1 for excluded rows.  Per anchor,
// the hardest positive is the same-label row with minimal cosine and the
// hardest negative the cross-label row with maximal cosine; anchors lacking
// either are skipped.  Returns the mean hinge max(0, dp - dn + margin);
// writes dloss/dfeatures when requested.
inline double triplet_batch_hard(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                                 double margin, Eigen::MatrixXd* dfeatures = nullptr) {
    const Eigen::Index n = features.rows();
    Eigen::MatrixXd unit = features;
    Eigen::VectorXd norms(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        norms(i) = std::max(features.row(i).norm(), 1e-12);
        unit.row(i) /= norms(i);
    }
    const Eigen::MatrixXd cos = unit * unit.transpose();

    if (dfeatures) dfeatures->setZero(n, features.cols());
    struct Term {
        Eigen::Index a, p, q;
    };
    std::vector<Term> active;
    int n_anchors = 0;
    double loss = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
        const int la = labels[static_cast<std::size_t>(a)];
        if (la < 0) continue;
        Eigen::Index hardest_pos = -1, hardest_neg = -1;
        for (Eigen::Index b = 0; b < n; ++b) {
            if (b == a) continue;
            const int lb = labels[static_cast<std::size_t>(b)];
            if (lb < 0) continue;
            if (lb == la) {
                if (hardest_pos < 0 || cos(a, b) < cos(a, hardest_pos)) hardest_pos = b;
            } else {
                if (hardest_neg < 0 || cos(a, b) > cos(a, hardest_neg)) hardest_neg = b;
            }
        }
        if (hardest_pos < 0 || hardest_neg < 0) continue;
        ++n_anchors;
        const double dp = 1.0 - cos(a, hardest_pos);
        const double dn = 1.0 - cos(a, hardest_neg);
        const double term = dp - dn + margin;
        if (term > 0.0) {
            loss += term;
            active.push_back({a, hardest_pos, hardest_neg});
        }
    }
    if (n_anchors == 0) return 0.0;
    loss /= n_anchors;

    if (dfeatures) {
        const double scale = 1.0 / n_anchors;
        // d(a,b) = 1 - unit_a . unit_b ; d/da = -(unit_b - (ua.ub) ua)/|a|
        auto add_pair_grad = [&](Eigen::Index a, Eigen::Index b, double w) {
            const double c = cos(a, b);
            dfeatures->row(a) -= w * (unit.row(b) - c * unit.row(a)) / norms(a);
            dfeatures->row(b) -= w * (unit.row(a) - c * unit.row(b)) / norms(b);
        };
        for (const auto& t : active) {
            add_pair_grad(t.a, t.p, scale);   // +d(a,p)
            add_pair_grad(t.a, t.q, -scale);  // -d(a,n)
        }
    }
    return loss;
}

} // namespace umtf
