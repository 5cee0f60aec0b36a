#pragma once
// NNA: mutual cross-camera nearest-neighbor association.  Two videos merge
// when each is the other's nearest neighbor (cosine) within its camera pair;
// connected components of size >= 2 become pseudo-label classes.

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "umtf/common.hpp"

namespace umtf {

struct PseudoLabeling {
    std::vector<int> labels; // per video, -1 when unlabeled; classes dense 0..L-1
    int n_classes = 0;
    double coverage = 0.0;

    std::vector<int> labeled_ids() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] >= 0) out.push_back(static_cast<int>(i));
        return out;
    }
};

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void merge(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

} // namespace detail

inline PseudoLabeling nna(const Eigen::MatrixXd& features, const std::vector<int>& camera_ids) {
    const int n = static_cast<int>(features.rows());
    PseudoLabeling out;
    out.labels.assign(n, -1);
    if (n == 0) return out;

    Eigen::MatrixXd unit = features;
    for (int i = 0; i < n; ++i) {
        const double norm = unit.row(i).norm();
        if (norm > 0.0) unit.row(i) /= norm;
    }

    std::map<int, std::vector<int>> by_camera;
    for (int i = 0; i < n; ++i) by_camera[camera_ids[i]].push_back(i);
    if (by_camera.size() < 2) {
        out.coverage = 0.0;
        return out;
    }
    std::vector<const std::vector<int>*> cams;
    for (const auto& [cam, rows] : by_camera) cams.push_back(&rows);

    // nearest neighbor of `i` within `pool`, ties to the lowest video id
    auto nearest = [&](int i, const std::vector<int>& pool) {
        int best = pool.front();
        double best_cos = unit.row(i).dot(unit.row(best));
        for (std::size_t k = 1; k < pool.size(); ++k) {
            const double c = unit.row(i).dot(unit.row(pool[k]));
            if (c > best_cos) {
                best_cos = c;
                best = pool[k];
            }
        }
        return best;
    };

    detail::UnionFind uf(n);
    for (std::size_t a = 0; a < cams.size(); ++a) {
        for (std::size_t b = a + 1; b < cams.size(); ++b) {
            for (int i : *cams[a]) {
                const int j = nearest(i, *cams[b]);
                if (nearest(j, *cams[a]) == i) uf.merge(i, j);
            }
        }
    }

    // components of size >= 2, labels ordered by smallest member id
    std::map<int, std::vector<int>> components;
    for (int i = 0; i < n; ++i) components[uf.find(i)].push_back(i);
    int next_label = 0;
    int labeled = 0;
    for (const auto& [root, ids] : components) {
        if (ids.size() < 2) continue;
        for (int i : ids) out.labels[i] = next_label;
        labeled += static_cast<int>(ids.size());
        ++next_label;
    }
    out.n_classes = next_label;
    out.coverage = static_cast<double>(labeled) / static_cast<double>(n);
    return out;
}

} // namespace umtf
