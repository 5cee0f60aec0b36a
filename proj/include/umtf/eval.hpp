#pragma once
// Metrics: cross-camera mAP and CMC over cosine rankings, adjusted mutual
// information with the exact hypergeometric expected-MI term, coverage.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "umtf/common.hpp"

namespace umtf {

struct RetrievalMetrics {
    double map = 0.0;
    double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0;
    int n_valid_queries = 0;
    int n_skipped_queries = 0;
};

// Every video queries the gallery of all videos from other cameras, ranked
// by cosine (ties broken toward the lower id).  AP is the standard
// interpolation-free average precision; queries without any cross-camera
// match are skipped and counted.
inline RetrievalMetrics cmc_map(const Eigen::MatrixXd& features, const std::vector<int>& camera_ids,
                                const std::vector<int>& gt_identities) {
    const int n = static_cast<int>(features.rows());
    Eigen::MatrixXd unit = features;
    for (int i = 0; i < n; ++i) {
        const double norm = unit.row(i).norm();
        if (norm > 0.0) unit.row(i) /= norm;
    }

    RetrievalMetrics out;
    double map_sum = 0.0;
    int hits1 = 0, hits5 = 0, hits10 = 0;
    for (int q = 0; q < n; ++q) {
        std::vector<int> gallery;
        int n_rel = 0;
        for (int g = 0; g < n; ++g) {
            if (camera_ids[g] == camera_ids[q]) continue;
            gallery.push_back(g);
            if (gt_identities[g] == gt_identities[q]) ++n_rel;
        }
        if (n_rel == 0) {
            ++out.n_skipped_queries;
            continue;
        }
        std::vector<double> score(gallery.size());
        for (std::size_t k = 0; k < gallery.size(); ++k) score[k] = unit.row(q).dot(unit.row(gallery[k]));
        std::vector<std::size_t> order(gallery.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] > score[b];
            return gallery[a] < gallery[b];
        });

        double ap = 0.0;
        int found = 0;
        int first_hit = -1;
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            if (gt_identities[gallery[order[rank]]] == gt_identities[q]) {
                ++found;
                ap += static_cast<double>(found) / static_cast<double>(rank + 1);
                if (first_hit < 0) first_hit = static_cast<int>(rank);
            }
        }
        ap /= n_rel;
        map_sum += ap;
        ++out.n_valid_queries;
        if (first_hit < 1) ++hits1;
        if (first_hit < 5) ++hits5;
        if (first_hit < 10) ++hits10;
    }
    if (out.n_valid_queries == 0)
        throw EvalError("cmc_map: no query has a cross-camera ground-truth match");
    out.map = map_sum / out.n_valid_queries;
    out.rank1 = static_cast<double>(hits1) / out.n_valid_queries;
    out.rank5 = static_cast<double>(hits5) / out.n_valid_queries;
    out.rank10 = static_cast<double>(hits10) / out.n_valid_queries;
    return out;
}

namespace detail {

inline double partition_entropy(const std::vector<int>& counts, int n) {
    double h = 0.0;
    for (int c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

// Exact expected mutual information under the hypergeometric permutation
// model.
inline double expected_mutual_information(const std::vector<int>& a_counts,
                                          const std::vector<int>& b_counts, int n) {
    const double log_n = std::log(static_cast<double>(n));
    double emi = 0.0;
    for (int ai : a_counts) {
        for (int bj : b_counts) {
            const int lo = std::max(1, ai + bj - n);
            const int hi = std::min(ai, bj);
            for (int nij = lo; nij <= hi; ++nij) {
                const double log_term = std::lgamma(ai + 1) + std::lgamma(bj + 1) +
                                        std::lgamma(n - ai + 1) + std::lgamma(n - bj + 1) -
                                        std::lgamma(n + 1) - std::lgamma(nij + 1) -
                                        std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
                                        std::lgamma(n - ai - bj + nij + 1);
                emi += (static_cast<double>(nij) / n) *
                       (log_n + std::log(static_cast<double>(nij)) -
                        std::log(static_cast<double>(ai)) - std::log(static_cast<double>(bj))) *
                       std::exp(log_term);
            }
        }
    }
    return emi;
}

} // namespace detail

// AMI over two labelings of the same index set (arithmetic-mean normalizer).
// Degenerate single-class-vs-single-class partitions score 1.
inline double ami(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
    if (labels_a.size() != labels_b.size())
        throw EvalError("ami: labelings cover different id sets");
    const int n = static_cast<int>(labels_a.size());
    if (n == 0) throw EvalError("ami: empty labelings");

    std::map<int, int> a_index, b_index;
    for (int v : labels_a) a_index.emplace(v, static_cast<int>(a_index.size()));
    for (int v : labels_b) b_index.emplace(v, static_cast<int>(b_index.size()));
    std::vector<int> a_counts(a_index.size(), 0), b_counts(b_index.size(), 0);
    std::map<std::pair<int, int>, int> joint;
    for (int i = 0; i < n; ++i) {
        const int ai = a_index[labels_a[i]];
        const int bi = b_index[labels_b[i]];
        ++a_counts[ai];
        ++b_counts[bi];
        ++joint[{ai, bi}];
    }

    const double h_a = detail::partition_entropy(a_counts, n);
    const double h_b = detail::partition_entropy(b_counts, n);
    if (h_a == 0.0 && h_b == 0.0) return 1.0; // both trivial and identical

    double mi = 0.0;
    for (const auto& [key, nij] : joint) {
        const double pij = static_cast<double>(nij) / n;
        mi += pij * std::log(static_cast<double>(n) * nij /
                             (static_cast<double>(a_counts[key.first]) * b_counts[key.second]));
    }
    const double emi = detail::expected_mutual_information(a_counts, b_counts, n);
    const double denom = 0.5 * (h_a + h_b) - emi;
    if (std::abs(denom) < 1e-12) return 0.0;
    return (mi - emi) / denom;
}

struct MetricSet {
    double map = 0.0;
    double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0;
    double ami = 0.0;
    double coverage = 0.0;
};

} // namespace umtf
