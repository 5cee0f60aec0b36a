#pragma once
// Independent brute-force oracles used by the unit and acceptance suites.
// These deliberately re-derive results from first principles and must stay
// independent of the library implementation paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "umtf/scenario.hpp"
#include "umtf/sensing.hpp"

namespace oracles {

// (camera_id, start_s, end_s, visitation_ordinal)
using FragmentKey = std::tuple<int, double, double, int>;

// Per-sample point-in-disc scan: a fragment is a maximal run of consecutive
// samples with strict distance < radius, ordinals count runs per camera.
inline std::vector<FragmentKey> fragments_by_scan(const umtf::WirelessTrajectory& traj,
                                                  const std::vector<umtf::Camera>& cameras,
                                                  double radius) {
    std::vector<FragmentKey> out;
    for (const auto& cam : cameras) {
        std::vector<bool> inside(traj.samples.size());
        for (std::size_t s = 0; s < traj.samples.size(); ++s) {
            const double dx = traj.samples[s].x_m - cam.x;
            const double dy = traj.samples[s].y_m - cam.y;
            inside[s] = std::sqrt(dx * dx + dy * dy) < radius;
        }
        int ordinal = 0;
        std::size_t s = 0;
        while (s < inside.size()) {
            if (!inside[s]) {
                ++s;
                continue;
            }
            std::size_t e = s;
            while (e + 1 < inside.size() && inside[e + 1]) ++e;
            out.emplace_back(cam.id, traj.samples[s].t_s, traj.samples[e].t_s, ordinal++);
            s = e + 1;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Pairwise closed-interval overlap scan.
inline std::vector<int> overlapping_videos_by_scan(const umtf::WirelessFragment& frag,
                                                   const std::vector<umtf::VideoSequence>& videos) {
    std::vector<int> out;
    for (const auto& v : videos) {
        if (v.camera_id != frag.camera_id) continue;
        const double lo = std::max(v.start_s, frag.start_s);
        const double hi = std::min(v.end_s, frag.end_s);
        if (lo <= hi) out.push_back(v.id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Direct recount of Eq. 1: fragments whose related set meets the cluster.
inline double path_consistency_by_recount(const std::vector<int>& cluster,
                                          const std::vector<umtf::RelatedVideoSet>& related) {
    int q = 0;
    for (const auto& set : related) {
        bool hit = false;
        for (int cid : cluster)
            for (int vid : set.video_ids)
                if (cid == vid) hit = true;
        if (hit) ++q;
    }
    return static_cast<double>(q) / static_cast<double>(related.size());
}

// Optimal 2-partition by exhaustive enumeration (points <= ~20), scored by
// within-cluster sum of squared distances to the mean.
inline std::pair<double, std::vector<int>> best_two_partition(const Eigen::MatrixXd& points) {
    const int n = static_cast<int>(points.rows());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_assign;
    for (unsigned mask = 1; mask + 1 < (1u << (n - 1)) * 2; ++mask) {
        // point 0 always in side 0 to halve the search
        std::vector<int> assign(n, 0);
        bool has_b = false;
        for (int i = 1; i < n; ++i) {
            assign[i] = (mask >> (i - 1)) & 1;
            has_b |= assign[i] == 1;
        }
        if (!has_b) continue;
        double wcss = 0.0;
        for (int side = 0; side < 2; ++side) {
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(points.cols());
            int count = 0;
            for (int i = 0; i < n; ++i)
                if (assign[i] == side) {
                    mean += points.row(i);
                    ++count;
                }
            if (count == 0) continue;
            mean /= count;
            for (int i = 0; i < n; ++i)
                if (assign[i] == side) wcss += (points.row(i) - mean).squaredNorm();
        }
        if (wcss < best) {
            best = wcss;
            best_assign = assign;
        }
    }
    return {best, best_assign};
}

// Exhaustive mutual-nearest-neighbor edges across camera pairs under cosine,
// ties toward the lowest id.
inline std::vector<std::pair<int, int>> mutual_nn_edges_by_scan(const Eigen::MatrixXd& features,
                                                                const std::vector<int>& cameras) {
    const int n = static_cast<int>(features.rows());
    Eigen::MatrixXd unit = features;
    for (int i = 0; i < n; ++i) {
        const double norm = unit.row(i).norm();
        if (norm > 0) unit.row(i) /= norm;
    }
    auto nn_in_camera = [&](int q, int cam) {
        int best = -1;
        double best_cos = -2.0;
        for (int j = 0; j < n; ++j) {
            if (cameras[j] != cam) continue;
            const double c = unit.row(q).dot(unit.row(j));
            if (c > best_cos) {
                best_cos = c;
                best = j;
            }
        }
        return best;
    };
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (cameras[i] == cameras[j]) continue;
            if (nn_in_camera(i, cameras[j]) == j && nn_in_camera(j, cameras[i]) == i)
                edges.emplace_back(i, j);
        }
    }
    return edges;
}

// Two-sided numeric gradient of a scalar function of one parameter vector.
template <typename LossFn>
inline Eigen::VectorXd central_difference(double* data, Eigen::Index size, LossFn&& loss,
                                          double h = 1e-5) {
    Eigen::VectorXd grad(size);
    for (Eigen::Index k = 0; k < size; ++k) {
        const double saved = data[k];
        data[k] = saved + h;
        const double up = loss();
        data[k] = saved - h;
        const double down = loss();
        data[k] = saved;
        grad(k) = (up - down) / (2.0 * h);
    }
    return grad;
}

// Relative error with a floor that absorbs central-difference round-off on
// parameters whose true gradient is exactly zero (biases cancelled by batch
// normalization).
inline double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    const double denom = std::max(numeric.norm(), 1e-6);
    return (analytic - numeric).norm() / denom;
}

} // namespace oracles
