#pragma once
// Multimodal data association: per-trajectory adaptive k-means over related
// videos, path-consistency scoring, and the sparse wireless similarity
// tensor built from co-clustered pairs.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "umtf/common.hpp"
#include "umtf/sensing.hpp"

namespace umtf {

struct Cluster {
    std::vector<int> video_ids; // sorted ascending
    double consistency = 0.0;   // P in (0, 1]
};

struct ClusterSet {
    int trajectory_id = 0;
    int k_m = 0;
    std::vector<Cluster> clusters;
};

// Sparse N x N x M tensor; diagonal is implicitly 1 for every m, entries are
// stored once per unordered pair so symmetry is exact by construction.
struct WirelessSimilarityTensor {
    int n_videos = 0;
    int n_trajectories = 0;
    // (i, j) with i < j -> list of (trajectory m, value), ordered by m
    std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> entries;

    double value(int i, int j, int m) const {
        if (i == j) return 1.0;
        const auto it = entries.find(i < j ? std::pair{i, j} : std::pair{j, i});
        if (it == entries.end()) return 0.0;
        for (const auto& [em, v] : it->second)
            if (em == m) return v;
        return 0.0;
    }

    std::size_t stored_count() const {
        std::size_t n = 0;
        for (const auto& [k, vs] : entries) n += vs.size();
        return n;
    }
};

// K_m = clamp(round(lambda * sum_r |V_m^r| * M / sum_m R_m), 1, #distinct
// related videos).  Uses only label-free quantities.
inline int estimate_cluster_count(const std::vector<RelatedVideoSet>& related_m,
                                  const std::vector<int>& fragment_counts,
                                  double lambda) {
    if (lambda <= 0.0) throw ParamError("invalid parameter: lambda");
    long total_fragments = 0;
    for (int r : fragment_counts) total_fragments += r;
    if (total_fragments == 0)
        throw EstimationError("cluster-count estimation: no wireless fragments in any trajectory");

    long related_total = 0;
    std::set<int> distinct;
    for (const auto& set : related_m) {
        related_total += static_cast<long>(set.video_ids.size());
        distinct.insert(set.video_ids.begin(), set.video_ids.end());
    }
    const double m_count = static_cast<double>(fragment_counts.size());
    const double estimate =
        lambda * static_cast<double>(related_total) * m_count / static_cast<double>(total_fragments);
    const int rounded = static_cast<int>(std::floor(estimate + 0.5));
    const int hi = std::max<int>(1, static_cast<int>(distinct.size()));
    return std::clamp(rounded, 1, hi);
}

// Deterministic k-means: rows are unit-normalized, the first center comes
// from the seeded RNG, the rest by greedy farthest-point selection; Lloyd
// iterations run to an assignment fixpoint (at most 100), empty clusters are
// re-seeded from the point farthest from its current center.
inline std::vector<int> kmeans(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                               bool* k_clamped = nullptr) {
    const int n = static_cast<int>(features.rows());
    if (n == 0) return {};
    if (k < 1) throw ParamError("invalid parameter: k");
    if (k_clamped) *k_clamped = k > n;
    k = std::min(k, n);

    Eigen::MatrixXd x = features;
    for (int i = 0; i < n; ++i) {
        const double norm = x.row(i).norm();
        if (norm > 0.0) x.row(i) /= norm;
    }

    Rng rng(mix_seed(seed, "kmeans"));
    std::vector<int> center_idx;
    center_idx.push_back(static_cast<int>(rng.uniform_int(0, n - 1)));
    Eigen::VectorXd dist2 = (x.rowwise() - x.row(center_idx[0])).rowwise().squaredNorm();
    while (static_cast<int>(center_idx.size()) < k) {
        int far = 0;
        for (int i = 1; i < n; ++i)
            if (dist2[i] > dist2[far]) far = i;
        center_idx.push_back(far);
        dist2 = dist2.cwiseMin((x.rowwise() - x.row(far)).rowwise().squaredNorm());
    }

    Eigen::MatrixXd centers(k, x.cols());
    for (int c = 0; c < k; ++c) centers.row(c) = x.row(center_idx[c]);

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<int> next(n);
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (x.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d = (x.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            next[i] = best;
        }
        if (next == assign) break;
        assign = std::move(next);

        centers.setZero();
        std::vector<int> count(k, 0);
        for (int i = 0; i < n; ++i) {
            centers.row(assign[i]) += x.row(i);
            ++count[assign[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (count[c] > 0) {
                centers.row(c) /= count[c];
            } else {
                // farthest point from its own center takes over the empty slot
                int far = -1;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    if (count[assign[i]] <= 1) continue; // don't empty another cluster
                    const double d = (x.row(i) - centers.row(assign[i])).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                if (far >= 0) {
                    --count[assign[far]];
                    assign[far] = c;
                    count[c] = 1;
                    centers.row(c) = x.row(far);
                }
            }
        }
    }
    return assign;
}

// P = Q / R_m where Q counts the fragments (per visit, not per camera) whose
// related set intersects the cluster.
inline double path_consistency(const std::vector<int>& cluster_video_ids,
                               const std::vector<RelatedVideoSet>& related_m) {
    const std::set<int> members(cluster_video_ids.begin(), cluster_video_ids.end());
    int q = 0;
    for (const auto& set : related_m) {
        for (int v : set.video_ids) {
            if (members.count(v)) {
                ++q;
                break;
            }
        }
    }
    return static_cast<double>(q) / static_cast<double>(related_m.size());
}

inline WirelessSimilarityTensor build_similarity_tensor(const std::vector<ClusterSet>& cluster_sets,
                                                        int n_videos, int n_trajectories) {
    WirelessSimilarityTensor t;
    t.n_videos = n_videos;
    t.n_trajectories = n_trajectories;
    for (const auto& cs : cluster_sets) {
        for (const auto& cluster : cs.clusters) {
            const auto& ids = cluster.video_ids;
            for (std::size_t a = 0; a < ids.size(); ++a)
                for (std::size_t b = a + 1; b < ids.size(); ++b)
                    t.entries[{ids[a], ids[b]}].emplace_back(cs.trajectory_id, cluster.consistency);
        }
    }
    return t;
}

struct MmdaResult {
    std::vector<ClusterSet> cluster_sets; // one per trajectory, ordered by id
    WirelessSimilarityTensor tensor;
};

// Full MMDA: per trajectory, adaptive K, k-means on the related videos'
// features, consistency scoring, tensor assembly.  Feature rows are aligned
// with video ids.
inline MmdaResult run_mmda(const Eigen::MatrixXd& features, const SensingResult& sensing,
                           double lambda, std::uint64_t seed) {
    MmdaResult res;
    const int n_videos = static_cast<int>(features.rows());
    const int n_traj = static_cast<int>(sensing.related.size());
    res.tensor.n_videos = n_videos;
    res.tensor.n_trajectories = n_traj;
    if (n_traj == 0) return res;

    std::vector<int> fragment_counts(n_traj);
    long total_fragments = 0;
    for (int m = 0; m < n_traj; ++m) {
        fragment_counts[m] = static_cast<int>(sensing.fragments[m].size());
        total_fragments += fragment_counts[m];
    }
    if (total_fragments == 0)
        throw EstimationError("mmda: no wireless fragments in any trajectory");

    for (int m = 0; m < n_traj; ++m) {
        ClusterSet cs;
        cs.trajectory_id = m;
        const auto& related_m = sensing.related[m];

        std::set<int> distinct;
        for (const auto& set : related_m) distinct.insert(set.video_ids.begin(), set.video_ids.end());
        if (distinct.empty()) {
            res.cluster_sets.push_back(std::move(cs));
            continue;
        }
        cs.k_m = estimate_cluster_count(related_m, fragment_counts, lambda);

        const std::vector<int> ids(distinct.begin(), distinct.end());
        Eigen::MatrixXd sub(ids.size(), features.cols());
        for (std::size_t i = 0; i < ids.size(); ++i) sub.row(i) = features.row(ids[i]);

        const auto assign = kmeans(sub, cs.k_m, mix_seed(seed, "mmda", static_cast<std::uint64_t>(m)));
        std::map<int, Cluster> by_index;
        for (std::size_t i = 0; i < ids.size(); ++i) by_index[assign[i]].video_ids.push_back(ids[i]);
        for (auto& [idx, cluster] : by_index) {
            cluster.consistency = path_consistency(cluster.video_ids, related_m);
            cs.clusters.push_back(std::move(cluster));
        }
        res.cluster_sets.push_back(std::move(cs));
    }
    res.tensor = build_similarity_tensor(res.cluster_sets, n_videos, n_traj);
    return res;
}

} // namespace umtf
