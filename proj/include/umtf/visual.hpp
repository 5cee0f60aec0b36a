#pragma once
// The stand-in for the appearance model F(.): a two-layer perceptron over
// raw descriptors with unit-normalized output, trained first with per-camera
// video-as-class classifiers and later fine-tuned with batch-hard triplets
// on pseudo labels.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "umtf/common.hpp"
#include "umtf/nn.hpp"
#include "umtf/scenario.hpp"

namespace umtf {

struct VisualConfig {
    int d_raw = 48;
    int d_mid = 64;
    int d_feat = 32;

    bool operator==(const VisualConfig&) const = default;
};

struct VisualModel {
    VisualConfig cfg;
    Eigen::MatrixXd w1; // d_raw x d_mid
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2; // d_mid x d_feat
    Eigen::VectorXd b2;
    // per-camera classifiers, initial training stage only
    std::vector<Eigen::MatrixXd> cls_w;
    std::vector<Eigen::VectorXd> cls_b;
};

inline VisualModel init_visual(const VisualConfig& cfg, std::uint64_t seed) {
    VisualModel m;
    m.cfg = cfg;
    Rng rng(mix_seed(seed, "visual_init"));
    m.w1 = init_affine_weight(rng, cfg.d_raw, cfg.d_mid);
    m.b1 = init_affine_bias(rng, cfg.d_raw, cfg.d_mid);
    m.w2 = init_affine_weight(rng, cfg.d_mid, cfg.d_feat);
    m.b2 = init_affine_bias(rng, cfg.d_mid, cfg.d_feat);
    return m;
}

inline std::vector<TensorView> embedding_parameter_views(VisualModel& m) {
    return {view_of("w1", m.w1), view_of("b1", m.b1), view_of("w2", m.w2), view_of("b2", m.b2)};
}

namespace detail {

struct EmbedCache {
    Eigen::MatrixXd a1;    // post-elu hidden
    Eigen::MatrixXd t2;    // pre-normalization output
    Eigen::VectorXd norms; // row norms of t2
    Eigen::MatrixXd e;     // unit embeddings
};

inline EmbedCache embed_forward(const VisualModel& m, const Eigen::MatrixXd& descriptors) {
    EmbedCache c;
    const Eigen::MatrixXd t1 = (descriptors * m.w1).rowwise() + m.b1.transpose();
    c.a1 = t1.unaryExpr([](double v) { return elu(v); });
    c.t2 = (c.a1 * m.w2).rowwise() + m.b2.transpose();
    c.norms.resize(c.t2.rows());
    c.e = c.t2;
    for (Eigen::Index i = 0; i < c.t2.rows(); ++i) {
        c.norms(i) = std::max(c.t2.row(i).norm(), 1e-12);
        c.e.row(i) /= c.norms(i);
    }
    return c;
}

// Backward through normalize + mlp; accumulates into grads (same shape as
// the model's embedding tensors).
inline void embed_backward(const VisualModel& m, const Eigen::MatrixXd& descriptors,
                           const EmbedCache& c, const Eigen::MatrixXd& de, VisualModel& grads) {
    Eigen::MatrixXd dt2(de.rows(), de.cols());
    for (Eigen::Index i = 0; i < de.rows(); ++i) {
        const double dot = de.row(i).dot(c.e.row(i));
        dt2.row(i) = (de.row(i) - dot * c.e.row(i)) / c.norms(i);
    }
    grads.w2 += c.a1.transpose() * dt2;
    grads.b2 += dt2.colwise().sum().transpose();
    const Eigen::MatrixXd da1 = dt2 * m.w2.transpose();
    const Eigen::MatrixXd dt1 =
        da1.array() * c.a1.unaryExpr([](double v) { return elu_grad_from_output(v); }).array();
    grads.w1 += descriptors.transpose() * dt1;
    grads.b1 += dt1.colwise().sum().transpose();
}

inline VisualModel zero_grads(const VisualModel& m) {
    VisualModel g;
    g.cfg = m.cfg;
    g.w1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(m.b1.size());
    g.w2 = Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols());
    g.b2 = Eigen::VectorXd::Zero(m.b2.size());
    return g;
}

inline Eigen::MatrixXd descriptor_matrix(const std::vector<VideoSequence>& videos, int d_raw) {
    Eigen::MatrixXd d(videos.size(), d_raw);
    for (std::size_t i = 0; i < videos.size(); ++i) {
        if (static_cast<int>(videos[i].descriptor.size()) != d_raw)
            throw ParamError("visual model: descriptor width mismatch at video " +
                             std::to_string(videos[i].id));
        for (int k = 0; k < d_raw; ++k) d(static_cast<Eigen::Index>(i), k) = videos[i].descriptor[k];
    }
    return d;
}

} // namespace detail

// Row i = unit embedding of video i.
inline Eigen::MatrixXd extract_features(const VisualModel& m, const std::vector<VideoSequence>& videos) {
    const Eigen::MatrixXd d = detail::descriptor_matrix(videos, m.cfg.d_raw);
    return detail::embed_forward(m, d).e;
}

struct InitialTrainOptions {
    int epochs = 80;
    double lr = 3e-4;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
};

struct InitialTrainResult {
    std::vector<double> loss_history;
    std::vector<std::string> notices;
};

// Per-camera classification: camera c's classifier has one class per video
// captured by c; the shared embedding is trained on the sum of the C
// cross-entropy losses.
inline InitialTrainResult initial_train(VisualModel& m, const std::vector<VideoSequence>& videos,
                                        const InitialTrainOptions& opt) {
    InitialTrainResult result;
    const Eigen::MatrixXd descriptors = detail::descriptor_matrix(videos, m.cfg.d_raw);

    // camera -> video row indices (ascending by video id order in `videos`)
    std::map<int, std::vector<Eigen::Index>> by_camera;
    for (std::size_t i = 0; i < videos.size(); ++i)
        by_camera[videos[i].camera_id].push_back(static_cast<Eigen::Index>(i));

    std::vector<int> camera_ids;
    for (const auto& [cam, rows] : by_camera) {
        camera_ids.push_back(cam);
        if (rows.size() == 1)
            result.notices.push_back("initial_train: camera " + std::to_string(cam) +
                                     " has a single video; its loss term is degenerate");
    }

    Rng rng(mix_seed(opt.seed, "initial_train"));
    m.cls_w.clear();
    m.cls_b.clear();
    for (int cam : camera_ids) {
        const int n_classes = static_cast<int>(by_camera[cam].size());
        m.cls_w.push_back(init_affine_weight(rng, m.cfg.d_feat, n_classes));
        m.cls_b.push_back(init_affine_bias(rng, m.cfg.d_feat, n_classes));
    }

    auto params = embedding_parameter_views(m);
    for (std::size_t c = 0; c < camera_ids.size(); ++c) {
        params.push_back(view_of("cls_w" + std::to_string(c), m.cls_w[c]));
        params.push_back(view_of("cls_b" + std::to_string(c), m.cls_b[c]));
    }
    AdamOptimizer adam(opt.lr, opt.weight_decay);

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        auto cache = detail::embed_forward(m, descriptors);
        VisualModel grads = detail::zero_grads(m);
        std::vector<Eigen::MatrixXd> gcls_w;
        std::vector<Eigen::VectorXd> gcls_b;
        Eigen::MatrixXd de = Eigen::MatrixXd::Zero(cache.e.rows(), cache.e.cols());

        double loss = 0.0;
        for (std::size_t c = 0; c < camera_ids.size(); ++c) {
            const auto& rows = by_camera[camera_ids[c]];
            Eigen::MatrixXd feats(rows.size(), m.cfg.d_feat);
            for (std::size_t r = 0; r < rows.size(); ++r) feats.row(r) = cache.e.row(rows[r]);
            const Eigen::MatrixXd logits = (feats * m.cls_w[c]).rowwise() + m.cls_b[c].transpose();
            std::vector<int> labels(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) labels[r] = static_cast<int>(r);
            Eigen::MatrixXd dlogits;
            loss += cross_entropy_loss(logits, labels, &dlogits);
            gcls_w.push_back(feats.transpose() * dlogits);
            gcls_b.push_back(dlogits.colwise().sum().transpose());
            const Eigen::MatrixXd dfeats = dlogits * m.cls_w[c].transpose();
            for (std::size_t r = 0; r < rows.size(); ++r) de.row(rows[r]) += dfeats.row(r);
        }
        detail::embed_backward(m, descriptors, cache, de, grads);

        std::vector<TensorView> gviews = embedding_parameter_views(grads);
        for (std::size_t c = 0; c < camera_ids.size(); ++c) {
            gviews.push_back(view_of("gcls_w" + std::to_string(c), gcls_w[c]));
            gviews.push_back(view_of("gcls_b" + std::to_string(c), gcls_b[c]));
        }
        adam.step(params, gviews);
        result.loss_history.push_back(loss);
    }
    return result;
}

// Loss + embedding-parameter gradients of a batch under the batch-hard
// triplet criterion; shared by fine-tuning and the gradient checks.
inline double visual_triplet_loss_and_grads(const VisualModel& m, const Eigen::MatrixXd& descriptors,
                                            const std::vector<int>& labels, double margin,
                                            VisualModel& grads) {
    grads = detail::zero_grads(m);
    auto cache = detail::embed_forward(m, descriptors);
    Eigen::MatrixXd de;
    const double loss = triplet_batch_hard(cache.e, labels, margin, &de);
    detail::embed_backward(m, descriptors, cache, de, grads);
    return loss;
}

struct TripletFinetuneOptions {
    int epochs = 5;
    double lr = 6e-5;
    double weight_decay = 5e-4;
    double margin = 0.4;
    int batch_p = 16; // identities per batch
    int batch_k = 4;  // samples per identity
    std::uint64_t seed = 0;
};

struct TripletFinetuneResult {
    bool trained = false;
    std::vector<double> loss_history; // mean batch loss per epoch
    std::vector<std::string> notices;
};

// P x K batch-hard fine-tuning on pseudo labels (video id -> label, -1 for
// unlabeled).  Unlabeled videos are excluded; classes smaller than K are
// sampled with replacement.
inline TripletFinetuneResult triplet_finetune(VisualModel& m, const std::vector<VideoSequence>& videos,
                                              const std::vector<int>& pseudo_labels,
                                              const TripletFinetuneOptions& opt) {
    TripletFinetuneResult result;
    const Eigen::MatrixXd descriptors = detail::descriptor_matrix(videos, m.cfg.d_raw);

    std::map<int, std::vector<int>> classes; // label -> row indices
    for (std::size_t i = 0; i < pseudo_labels.size(); ++i)
        if (pseudo_labels[i] >= 0) classes[pseudo_labels[i]].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> members;
    for (auto& [label, rows] : classes)
        if (rows.size() >= 2) members.push_back(rows);
    if (members.size() < 2) {
        result.notices.push_back("triplet_finetune: fewer than 2 classes with 2+ members; skipped");
        return result;
    }
    result.trained = true;

    auto params = embedding_parameter_views(m);
    SgdOptimizer sgd(opt.lr, opt.weight_decay);
    const int n_classes = static_cast<int>(members.size());
    const int p = std::max(2, std::min(opt.batch_p, n_classes));

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng rng(mix_seed(opt.seed, "triplet_epoch", static_cast<std::uint64_t>(epoch)));
        std::vector<int> order(n_classes);
        for (int i = 0; i < n_classes; ++i) order[i] = i;
        rng.shuffle(order);

        std::vector<std::vector<int>> chunks;
        for (int at = 0; at < n_classes; at += p)
            chunks.emplace_back(order.begin() + at,
                                order.begin() + std::min(at + p, n_classes));
        if (chunks.size() > 1 && chunks.back().size() < 2) {
            chunks[chunks.size() - 2].insert(chunks[chunks.size() - 2].end(), chunks.back().begin(),
                                             chunks.back().end());
            chunks.pop_back();
        }

        double epoch_loss = 0.0;
        for (const auto& chunk : chunks) {
            std::vector<int> rows;
            std::vector<int> labels;
            for (int cls : chunk) {
                const auto& pool = members[cls];
                std::vector<int> picked;
                if (static_cast<int>(pool.size()) >= opt.batch_k) {
                    std::vector<int> shuffled = pool;
                    rng.shuffle(shuffled);
                    picked.assign(shuffled.begin(), shuffled.begin() + opt.batch_k);
                } else {
                    for (int k = 0; k < opt.batch_k; ++k)
                        picked.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
                }
                for (int row : picked) {
                    rows.push_back(row);
                    labels.push_back(cls);
                }
            }
            Eigen::MatrixXd batch(rows.size(), m.cfg.d_raw);
            for (std::size_t r = 0; r < rows.size(); ++r) batch.row(r) = descriptors.row(rows[r]);

            VisualModel grads;
            epoch_loss += visual_triplet_loss_and_grads(m, batch, labels, opt.margin, grads);
            auto gviews = embedding_parameter_views(grads);
            sgd.step(params, gviews);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(chunks.size()));
    }
    return result;
}

} // namespace umtf
