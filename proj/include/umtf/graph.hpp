#pragma once
// The multimodal graph network: histogram statistics of wireless similarity,
// MGM layers (edge scorer over similarity histograms -> masked softmax
// adjacency -> message passing), multi-head composition, an MGM classifier
// head, cross-entropy training with analytic gradients.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "umtf/common.hpp"
#include "umtf/mmda.hpp"
#include "umtf/nn.hpp"

namespace umtf {

// A^avg with an explicit sparse support.  `pairs` holds every ordered (i, j)
// with A^avg_{i,j} > 0, including the whole diagonal, sorted by (i, j);
// row r occupies pairs[row_begin[r] .. row_begin[r+1]).
struct DenseAffinity {
    int n = 0;
    int n_trajectories = 0;
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> values;
    std::vector<int> row_begin;

    double at(int i, int j) const {
        for (int p = row_begin[i]; p < row_begin[i + 1]; ++p)
            if (pairs[p].second == j) return values[p];
        return 0.0;
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t p = 0; p < pairs.size(); ++p) a(pairs[p].first, pairs[p].second) = values[p];
        return a;
    }
};

inline DenseAffinity average_affinity(const WirelessSimilarityTensor& s) {
    if (s.n_trajectories == 0)
        throw EstimationError("average_affinity: tensor has no wireless trajectories");
    DenseAffinity a;
    a.n = s.n_videos;
    a.n_trajectories = s.n_trajectories;
    const double m = static_cast<double>(s.n_trajectories);

    std::vector<std::vector<std::pair<int, double>>> rows(s.n_videos);
    for (int i = 0; i < s.n_videos; ++i) rows[i].emplace_back(i, 1.0);
    for (const auto& [key, vs] : s.entries) {
        double sum = 0.0;
        for (const auto& [em, v] : vs) sum += v;
        if (sum <= 0.0) continue;
        rows[key.first].emplace_back(key.second, sum / m);
        rows[key.second].emplace_back(key.first, sum / m);
    }
    a.row_begin.assign(s.n_videos + 1, 0);
    for (int i = 0; i < s.n_videos; ++i) {
        std::sort(rows[i].begin(), rows[i].end());
        for (const auto& [j, v] : rows[i]) {
            a.pairs.emplace_back(i, j);
            a.values.push_back(v);
        }
        a.row_begin[i + 1] = static_cast<int>(a.pairs.size());
    }
    return a;
}

// Histogram of the M similarity values of one pair; absent entries count as
// zeros into bin 0, bin of v is min(floor(v * bins), bins - 1).
inline Eigen::VectorXd similarity_histogram(const WirelessSimilarityTensor& s, int i, int j,
                                            int bins = 32) {
    if (bins < 2) throw ParamError("invalid parameter: bins");
    Eigen::VectorXd h = Eigen::VectorXd::Zero(bins);
    const double m = static_cast<double>(s.n_trajectories);
    if (i == j) {
        h(bins - 1) = 1.0;
        return h;
    }
    int stored = 0;
    const auto it = s.entries.find(i < j ? std::pair{i, j} : std::pair{j, i});
    if (it != s.entries.end()) {
        for (const auto& [em, v] : it->second) {
            const int bin = std::min(static_cast<int>(v * bins), bins - 1);
            h(bin) += 1.0;
            ++stored;
        }
    }
    h(0) += m - stored;
    h /= m;
    return h;
}

// Histogram rows for every support pair of the affinity, row p aligned with
// affinity.pairs[p].
struct SimilarityHistogram {
    int bins = 32;
    Eigen::MatrixXd rows;
};

inline SimilarityHistogram build_histograms(const WirelessSimilarityTensor& s,
                                            const DenseAffinity& affinity, int bins = 32) {
    SimilarityHistogram h;
    h.bins = bins;
    h.rows.resize(static_cast<Eigen::Index>(affinity.pairs.size()), bins);
    for (std::size_t p = 0; p < affinity.pairs.size(); ++p)
        h.rows.row(static_cast<Eigen::Index>(p)) =
            similarity_histogram(s, affinity.pairs[p].first, affinity.pairs[p].second, bins).transpose();
    return h;
}

// ---------------------------------------------------------------------------
// Model

struct EdgeScorer {
    Eigen::MatrixXd w1; // bins x 16
    Eigen::VectorXd b1, g1, be1;
    Eigen::MatrixXd w2; // 16 x 1
    Eigen::VectorXd b2, g2, be2;
};

struct MgmHead {
    EdgeScorer edge;
    Eigen::MatrixXd node_w; // d_in x d_out
    Eigen::VectorXd node_b;
    Eigen::VectorXd out_gamma, out_beta; // empty on the classifier head
};

struct MmgnConfig {
    int heads = 6;
    int bins = 32;
    int d_in = 32;
    int d_hid = 16;
    int edge_hidden = 16;
    double leaky_slope = 0.01;
    double bn_eps = 1e-5;

    bool operator==(const MmgnConfig&) const = default;
};

struct MmgnModel {
    MmgnConfig cfg;
    int n_classes = 0;
    std::vector<MgmHead> heads;
    MgmHead classifier;
};

namespace detail {

inline EdgeScorer init_edge_scorer(Rng& rng, int bins, int hidden) {
    EdgeScorer e;
    e.w1 = init_affine_weight(rng, bins, hidden);
    e.b1 = init_affine_bias(rng, bins, hidden);
    e.g1 = Eigen::VectorXd::Ones(hidden);
    e.be1 = Eigen::VectorXd::Zero(hidden);
    e.w2 = init_affine_weight(rng, hidden, 1);
    e.b2 = init_affine_bias(rng, hidden, 1);
    e.g2 = Eigen::VectorXd::Ones(1);
    e.be2 = Eigen::VectorXd::Zero(1);
    return e;
}

inline MgmHead zero_like(const MgmHead& h) {
    MgmHead z;
    z.edge.w1 = Eigen::MatrixXd::Zero(h.edge.w1.rows(), h.edge.w1.cols());
    z.edge.b1 = Eigen::VectorXd::Zero(h.edge.b1.size());
    z.edge.g1 = Eigen::VectorXd::Zero(h.edge.g1.size());
    z.edge.be1 = Eigen::VectorXd::Zero(h.edge.be1.size());
    z.edge.w2 = Eigen::MatrixXd::Zero(h.edge.w2.rows(), h.edge.w2.cols());
    z.edge.b2 = Eigen::VectorXd::Zero(h.edge.b2.size());
    z.edge.g2 = Eigen::VectorXd::Zero(h.edge.g2.size());
    z.edge.be2 = Eigen::VectorXd::Zero(h.edge.be2.size());
    z.node_w = Eigen::MatrixXd::Zero(h.node_w.rows(), h.node_w.cols());
    z.node_b = Eigen::VectorXd::Zero(h.node_b.size());
    z.out_gamma = Eigen::VectorXd::Zero(h.out_gamma.size());
    z.out_beta = Eigen::VectorXd::Zero(h.out_beta.size());
    return z;
}

} // namespace detail

inline MmgnModel init_mmgn(const MmgnConfig& cfg, int n_classes, std::uint64_t seed) {
    MmgnModel m;
    m.cfg = cfg;
    m.n_classes = n_classes;
    Rng rng(mix_seed(seed, "mmgn_init"));
    for (int h = 0; h < cfg.heads; ++h) {
        MgmHead head;
        head.edge = detail::init_edge_scorer(rng, cfg.bins, cfg.edge_hidden);
        head.node_w = init_affine_weight(rng, cfg.d_in, cfg.d_hid);
        head.node_b = init_affine_bias(rng, cfg.d_in, cfg.d_hid);
        head.out_gamma = Eigen::VectorXd::Ones(cfg.d_hid);
        head.out_beta = Eigen::VectorXd::Zero(cfg.d_hid);
        m.heads.push_back(std::move(head));
    }
    m.classifier.edge = detail::init_edge_scorer(rng, cfg.bins, cfg.edge_hidden);
    const int cls_in = cfg.heads * cfg.d_hid;
    m.classifier.node_w = init_affine_weight(rng, cls_in, n_classes);
    m.classifier.node_b = init_affine_bias(rng, cls_in, n_classes);
    return m;
}

inline MmgnModel zeros_like(const MmgnModel& m) {
    MmgnModel z;
    z.cfg = m.cfg;
    z.n_classes = m.n_classes;
    for (const auto& h : m.heads) z.heads.push_back(detail::zero_like(h));
    z.classifier = detail::zero_like(m.classifier);
    return z;
}

inline std::vector<TensorView> parameter_views(MmgnModel& m) {
    std::vector<TensorView> out;
    auto add_head = [&out](MgmHead& h, const std::string& prefix) {
        out.push_back(view_of(prefix + ".edge.w1", h.edge.w1));
        out.push_back(view_of(prefix + ".edge.b1", h.edge.b1));
        out.push_back(view_of(prefix + ".edge.g1", h.edge.g1));
        out.push_back(view_of(prefix + ".edge.be1", h.edge.be1));
        out.push_back(view_of(prefix + ".edge.w2", h.edge.w2));
        out.push_back(view_of(prefix + ".edge.b2", h.edge.b2));
        out.push_back(view_of(prefix + ".edge.g2", h.edge.g2));
        out.push_back(view_of(prefix + ".edge.be2", h.edge.be2));
        out.push_back(view_of(prefix + ".node_w", h.node_w));
        out.push_back(view_of(prefix + ".node_b", h.node_b));
        if (h.out_gamma.size() > 0) {
            out.push_back(view_of(prefix + ".out_gamma", h.out_gamma));
            out.push_back(view_of(prefix + ".out_beta", h.out_beta));
        }
    };
    for (std::size_t i = 0; i < m.heads.size(); ++i) add_head(m.heads[i], "head" + std::to_string(i));
    add_head(m.classifier, "classifier");
    return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

struct MgmCache {
    Eigen::MatrixXd t1, a1;
    BnCache bn1;
    Eigen::MatrixXd y2; // P x 1, pre-activation of the second edge block
    BnCache bn2;
    Eigen::VectorXd adjacency; // softmax weights on the support
    Eigen::MatrixXd xw;        // N x d_out
    BnCache bn3;
    Eigen::MatrixXd z; // N x d_out
};

// One MGM: edge scorer on the support histograms, masked row softmax,
// message passing, optional output BN + ELU (absent on the classifier).
inline MgmCache mgm_forward_impl(const MgmHead& head, const Eigen::MatrixXd& x,
                                 const SimilarityHistogram& hist, const DenseAffinity& aff,
                                 const MmgnConfig& cfg, bool final_norm) {
    MgmCache c;
    const Eigen::Index n_pairs = hist.rows.rows();

    c.t1 = (hist.rows * head.edge.w1).rowwise() + head.edge.b1.transpose();
    Eigen::MatrixXd y1 = bn_forward(c.t1, head.edge.g1, head.edge.be1, cfg.bn_eps, c.bn1);
    c.a1 = y1.unaryExpr([&](double v) { return leaky_relu(v, cfg.leaky_slope); });

    const Eigen::MatrixXd t2 = (c.a1 * head.edge.w2).rowwise() + head.edge.b2.transpose();
    c.y2 = bn_forward(t2, head.edge.g2, head.edge.be2, cfg.bn_eps, c.bn2);
    Eigen::VectorXd scores =
        c.y2.col(0).unaryExpr([&](double v) { return leaky_relu(v, cfg.leaky_slope); });

    // masked softmax: only support entries compete, excluded pairs stay 0
    c.adjacency.resize(n_pairs);
    for (int i = 0; i < aff.n; ++i) {
        const int lo = aff.row_begin[i];
        const int hi = aff.row_begin[i + 1];
        double mx = -std::numeric_limits<double>::infinity();
        for (int p = lo; p < hi; ++p) mx = std::max(mx, scores(p));
        double sum = 0.0;
        for (int p = lo; p < hi; ++p) {
            c.adjacency(p) = std::exp(scores(p) - mx);
            sum += c.adjacency(p);
        }
        for (int p = lo; p < hi; ++p) c.adjacency(p) /= sum;
    }

    c.xw = (x * head.node_w).rowwise() + head.node_b.transpose();
    Eigen::MatrixXd msg = Eigen::MatrixXd::Zero(aff.n, c.xw.cols());
    for (std::size_t p = 0; p < aff.pairs.size(); ++p)
        msg.row(aff.pairs[p].first) += c.adjacency(static_cast<Eigen::Index>(p)) * c.xw.row(aff.pairs[p].second);

    if (final_norm) {
        const Eigen::MatrixXd y3 = bn_forward(msg, head.out_gamma, head.out_beta, cfg.bn_eps, c.bn3);
        c.z = y3.unaryExpr([](double v) { return elu(v); });
    } else {
        c.z = std::move(msg);
    }
    return c;
}

// Returns dloss/dx and accumulates parameter gradients into `grad`.
inline Eigen::MatrixXd mgm_backward_impl(const MgmHead& head, MgmHead& grad, const MgmCache& c,
                                         const Eigen::MatrixXd& x, const SimilarityHistogram& hist,
                                         const DenseAffinity& aff, const MmgnConfig& cfg,
                                         bool final_norm, const Eigen::MatrixXd& dz) {
    Eigen::MatrixXd dmsg;
    if (final_norm) {
        const Eigen::MatrixXd dy3 =
            dz.array() * c.z.unaryExpr([](double v) { return elu_grad_from_output(v); }).array();
        dmsg = bn_backward(dy3, head.out_gamma, c.bn3, grad.out_gamma, grad.out_beta);
    } else {
        dmsg = dz;
    }

    // message passing: msg[i] += A_p * xw[j] over support pairs p = (i, j)
    Eigen::VectorXd dadj(c.adjacency.size());
    Eigen::MatrixXd dxw = Eigen::MatrixXd::Zero(c.xw.rows(), c.xw.cols());
    for (std::size_t p = 0; p < aff.pairs.size(); ++p) {
        const auto [i, j] = aff.pairs[p];
        const auto pi = static_cast<Eigen::Index>(p);
        dadj(pi) = dmsg.row(i).dot(c.xw.row(j));
        dxw.row(j) += c.adjacency(pi) * dmsg.row(i);
    }

    // softmax rows
    Eigen::VectorXd dscores(dadj.size());
    for (int i = 0; i < aff.n; ++i) {
        const int lo = aff.row_begin[i];
        const int hi = aff.row_begin[i + 1];
        double dot = 0.0;
        for (int p = lo; p < hi; ++p) dot += c.adjacency(p) * dadj(p);
        for (int p = lo; p < hi; ++p) dscores(p) = c.adjacency(p) * (dadj(p) - dot);
    }

    Eigen::MatrixXd dy2(dscores.size(), 1);
    dy2.col(0) =
        dscores.array() * c.y2.col(0).unaryExpr([&](double v) { return leaky_relu_grad(v, cfg.leaky_slope); }).array();
    const Eigen::MatrixXd dt2 = bn_backward(dy2, head.edge.g2, c.bn2, grad.edge.g2, grad.edge.be2);

    grad.edge.w2 += c.a1.transpose() * dt2;
    grad.edge.b2 += dt2.colwise().sum().transpose();
    const Eigen::MatrixXd da1 = dt2 * head.edge.w2.transpose();

    // leaky-relu gradient from the activation's sign: a1 = lrelu(y1) keeps
    // the sign of y1, so a1 > 0 iff y1 > 0
    const Eigen::MatrixXd dy1 =
        da1.array() * c.a1.unaryExpr([&](double v) { return v > 0.0 ? 1.0 : cfg.leaky_slope; }).array();
    const Eigen::MatrixXd dt1 = bn_backward(dy1, head.edge.g1, c.bn1, grad.edge.g1, grad.edge.be1);

    grad.edge.w1 += hist.rows.transpose() * dt1;
    grad.edge.b1 += dt1.colwise().sum().transpose();

    grad.node_w += x.transpose() * dxw;
    grad.node_b += dxw.colwise().sum().transpose();
    return dxw * head.node_w.transpose();
}

} // namespace detail

struct MgmForwardResult {
    Eigen::MatrixXd z;         // N x d_out
    Eigen::VectorXd adjacency; // aligned with affinity.pairs
};

inline Eigen::MatrixXd dense_adjacency(const DenseAffinity& aff, const Eigen::VectorXd& adjacency) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(aff.n, aff.n);
    for (std::size_t p = 0; p < aff.pairs.size(); ++p)
        a(aff.pairs[p].first, aff.pairs[p].second) = adjacency(static_cast<Eigen::Index>(p));
    return a;
}

inline MgmForwardResult mgm_forward(const MgmHead& head, const Eigen::MatrixXd& x,
                                    const SimilarityHistogram& hist, const DenseAffinity& aff,
                                    const MmgnConfig& cfg, bool final_norm = true) {
    auto cache = detail::mgm_forward_impl(head, x, hist, aff, cfg, final_norm);
    return {std::move(cache.z), std::move(cache.adjacency)};
}

struct MmgnForwardResult {
    Eigen::MatrixXd z;      // N x (heads * d_hid)
    Eigen::MatrixXd logits; // N x n_classes
};

inline MmgnForwardResult mmgn_forward(const MmgnModel& m, const Eigen::MatrixXd& x,
                                      const SimilarityHistogram& hist, const DenseAffinity& aff) {
    MmgnForwardResult r;
    r.z.resize(aff.n, m.cfg.heads * m.cfg.d_hid);
    for (int h = 0; h < m.cfg.heads; ++h) {
        auto c = detail::mgm_forward_impl(m.heads[h], x, hist, aff, m.cfg, true);
        r.z.middleCols(h * m.cfg.d_hid, m.cfg.d_hid) = c.z;
    }
    auto cls = detail::mgm_forward_impl(m.classifier, r.z, hist, aff, m.cfg, false);
    r.logits = std::move(cls.z);
    return r;
}

inline Eigen::MatrixXd extract_multimodal_features(const MmgnModel& m, const Eigen::MatrixXd& x,
                                                   const SimilarityHistogram& hist,
                                                   const DenseAffinity& aff) {
    Eigen::MatrixXd z(aff.n, m.cfg.heads * m.cfg.d_hid);
    for (int h = 0; h < m.cfg.heads; ++h) {
        auto c = detail::mgm_forward_impl(m.heads[h], x, hist, aff, m.cfg, true);
        z.middleCols(h * m.cfg.d_hid, m.cfg.d_hid) = c.z;
    }
    return z;
}

// Full forward + backward for one training step; labels use -1 for unlabeled
// nodes.  Returns the loss; fills `grads` (zeroed first).
inline double mmgn_loss_and_grads(const MmgnModel& m, const Eigen::MatrixXd& x,
                                  const SimilarityHistogram& hist, const DenseAffinity& aff,
                                  const std::vector<int>& labels, MmgnModel& grads,
                                  bool use_triplet = false, double triplet_margin = 0.4) {
    grads = zeros_like(m);

    std::vector<detail::MgmCache> head_caches(m.heads.size());
    Eigen::MatrixXd z(aff.n, m.cfg.heads * m.cfg.d_hid);
    for (int h = 0; h < m.cfg.heads; ++h) {
        head_caches[h] = detail::mgm_forward_impl(m.heads[h], x, hist, aff, m.cfg, true);
        z.middleCols(h * m.cfg.d_hid, m.cfg.d_hid) = head_caches[h].z;
    }
    auto cls_cache = detail::mgm_forward_impl(m.classifier, z, hist, aff, m.cfg, false);

    Eigen::MatrixXd dlogits;
    double loss = cross_entropy_loss(cls_cache.z, labels, &dlogits);

    Eigen::MatrixXd dz = detail::mgm_backward_impl(m.classifier, grads.classifier, cls_cache, z,
                                                   hist, aff, m.cfg, false, dlogits);
    if (use_triplet) {
        Eigen::MatrixXd dz_triplet;
        loss += triplet_batch_hard(z, labels, triplet_margin, &dz_triplet);
        dz += dz_triplet;
    }
    for (int h = 0; h < m.cfg.heads; ++h) {
        detail::mgm_backward_impl(m.heads[h], grads.heads[h], head_caches[h], x, hist, aff, m.cfg,
                                  true, dz.middleCols(h * m.cfg.d_hid, m.cfg.d_hid));
    }
    return loss;
}

struct MmgnTrainOptions {
    int epochs = 80;
    double lr = 1e-2;
    double weight_decay = 5e-4;
    bool use_triplet = false; // off by default: cross-entropy alone trains best
    double triplet_margin = 0.4;
};

// Full-graph training with cross-entropy over labeled nodes.  Returns the
// per-epoch loss history (loss measured before each update).
inline std::vector<double> mmgn_train(MmgnModel& m, const Eigen::MatrixXd& x,
                                      const SimilarityHistogram& hist, const DenseAffinity& aff,
                                      const std::vector<int>& labels, const MmgnTrainOptions& opt) {
    int n_labeled = 0;
    int max_label = -1;
    for (int y : labels)
        if (y >= 0) {
            ++n_labeled;
            max_label = std::max(max_label, y);
        }
    if (n_labeled < 2 || max_label < 1)
        throw EvalError("mmgn_train: need at least 2 labeled nodes spanning 2 classes");

    AdamOptimizer adam(opt.lr, opt.weight_decay);
    auto params = parameter_views(m);
    std::vector<double> history;
    MmgnModel grads;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        history.push_back(
            mmgn_loss_and_grads(m, x, hist, aff, labels, grads, opt.use_triplet, opt.triplet_margin));
        auto gviews = parameter_views(grads);
        adam.step(params, gviews);
    }
    return history;
}

} // namespace umtf
