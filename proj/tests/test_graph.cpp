#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "oracles.hpp"
#include "umtf/checkpoint.hpp"
#include "umtf/common.hpp"
#include "umtf/graph.hpp"
#include "umtf/mmda.hpp"

using namespace umtf;
using Catch::Matchers::WithinAbs;

namespace {

// random but structurally valid tensor: disjoint cliques with random P per
// trajectory
WirelessSimilarityTensor random_tensor(int n_videos, int n_traj, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ClusterSet> sets;
    for (int m = 0; m < n_traj; ++m) {
        ClusterSet cs;
        cs.trajectory_id = m;
        std::vector<int> ids;
        for (int i = 0; i < n_videos; ++i)
            if (rng.uniform() < 0.5) ids.push_back(i);
        rng.shuffle(ids);
        std::size_t at = 0;
        while (at < ids.size()) {
            const std::size_t take = std::min<std::size_t>(
                1 + static_cast<std::size_t>(rng.uniform_int(0, 3)), ids.size() - at);
            Cluster c;
            c.video_ids.assign(ids.begin() + at, ids.begin() + at + take);
            std::sort(c.video_ids.begin(), c.video_ids.end());
            c.consistency = 0.05 + 0.95 * rng.uniform();
            cs.clusters.push_back(std::move(c));
            at += take;
        }
        cs.k_m = static_cast<int>(cs.clusters.size());
        sets.push_back(std::move(cs));
    }
    return build_similarity_tensor(sets, n_videos, n_traj);
}

Eigen::MatrixXd gaussian_rows(Rng& rng, int n, int d) {
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = rng.gaussian();
    return m;
}

} // namespace

TEST_CASE("average affinity: diagonal, stored mean, absent pairs") {
    ClusterSet cs;
    cs.trajectory_id = 2;
    cs.clusters.push_back({{1, 4}, 0.75});
    const auto t = build_similarity_tensor({cs}, 6, 4);
    const auto a = average_affinity(t);
    CHECK_THAT(a.at(3, 3), WithinAbs(1.0, 1e-12));
    CHECK_THAT(a.at(1, 4), WithinAbs(0.1875, 1e-12)); // 0.75 / 4
    CHECK_THAT(a.at(4, 1), WithinAbs(0.1875, 1e-12));
    CHECK(a.at(1, 2) == 0.0);
    // support: 6 diagonal + 2 symmetric entries
    CHECK(a.pairs.size() == 8);

    WirelessSimilarityTensor empty;
    empty.n_videos = 3;
    empty.n_trajectories = 0;
    CHECK_THROWS_AS(average_affinity(empty), EstimationError);
}

TEST_CASE("similarity histogram: bin placement and normalization") {
    ClusterSet cs0, cs2;
    cs0.trajectory_id = 0;
    cs0.clusters.push_back({{0, 1}, 0.75});
    cs2.trajectory_id = 2;
    cs2.clusters.push_back({{0, 1}, 1.0});
    const auto t = build_similarity_tensor({cs0, cs2}, 4, 4);

    // pair (0,1): values {0.75, 0, 1, 0} -> bins 24 and 31 plus two zeros
    const auto h = similarity_histogram(t, 0, 1, 32);
    CHECK_THAT(h(0), WithinAbs(0.5, 1e-12));
    CHECK_THAT(h(24), WithinAbs(0.25, 1e-12)); // floor(0.75 * 32) = 24
    CHECK_THAT(h(31), WithinAbs(0.25, 1e-12)); // 1.0 clamps into the last bin
    CHECK_THAT(h.sum(), WithinAbs(1.0, 1e-12));

    // all-zero pair
    const auto h0 = similarity_histogram(t, 2, 3, 32);
    CHECK_THAT(h0(0), WithinAbs(1.0, 1e-12));

    // diagonal pair: all M values are 1
    const auto hd = similarity_histogram(t, 1, 1, 32);
    CHECK_THAT(hd(31), WithinAbs(1.0, 1e-12));

    CHECK_THROWS_AS(similarity_histogram(t, 0, 1, 1), ParamError);
}

TEST_CASE("histogram rows over the affinity support sum to one") {
    const auto t = random_tensor(20, 6, 42);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    REQUIRE(h.rows.rows() == static_cast<Eigen::Index>(a.pairs.size()));
    for (Eigen::Index p = 0; p < h.rows.rows(); ++p) {
        CHECK_THAT(h.rows.row(p).sum(), WithinAbs(1.0, 1e-9));
        CHECK(h.rows.row(p).minCoeff() >= 0.0);
    }
}

TEST_CASE("single-node graph: adjacency is [[1]]") {
    WirelessSimilarityTensor t;
    t.n_videos = 1;
    t.n_trajectories = 2;
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 16);
    MmgnConfig cfg;
    cfg.heads = 1;
    cfg.bins = 16;
    cfg.d_in = 3;
    cfg.d_hid = 4;
    const auto model = init_mmgn(cfg, 2, 5);
    Eigen::MatrixXd x(1, 3);
    x << 0.3, -0.2, 0.9;
    const auto r = mgm_forward(model.heads[0], x, h, a, cfg, true);
    const auto dense = dense_adjacency(a, r.adjacency);
    CHECK_THAT(dense(0, 0), WithinAbs(1.0, 1e-12));
    CHECK(r.z.rows() == 1);
    CHECK(r.z.cols() == 4);
}

TEST_CASE("adjacency rows sum to 1 and vanish exactly off the support") {
    Rng rng(1234);
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_int(0, 45));
        const auto t = random_tensor(n, 4, 900 + trial);
        const auto a = average_affinity(t);
        const auto h = build_histograms(t, a, 32);
        MmgnConfig cfg;
        cfg.heads = 2;
        cfg.d_in = 6;
        cfg.d_hid = 5;
        const auto model = init_mmgn(cfg, 3, trial);
        const auto x = gaussian_rows(rng, n, 6);
        const auto r = mgm_forward(model.heads[1], x, h, a, cfg, true);
        const auto dense = dense_adjacency(a, r.adjacency);
        const auto aavg = a.to_dense();
        for (int i = 0; i < n; ++i) {
            CHECK_THAT(dense.row(i).sum(), WithinAbs(1.0, 1e-9));
            for (int j = 0; j < n; ++j)
                if (aavg(i, j) == 0.0) CHECK(dense(i, j) == 0.0);
        }
    }
}

TEST_CASE("row softmax is invariant to a constant shift of the scores") {
    const auto t = random_tensor(12, 3, 77);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    MmgnConfig cfg;
    cfg.heads = 1;
    cfg.d_in = 4;
    cfg.d_hid = 4;
    auto model = init_mmgn(cfg, 2, 3);
    Rng rng(5);
    const auto x = gaussian_rows(rng, 12, 4);
    // keep the second edge block in the linear region of the leaky rectifier
    // so a shift of its output shift parameter shifts every score equally
    model.heads[0].edge.be2.array() = 20.0;
    const auto before = mgm_forward(model.heads[0], x, h, a, cfg, true);
    model.heads[0].edge.be2.array() = 25.0;
    const auto after = mgm_forward(model.heads[0], x, h, a, cfg, true);
    CHECK((before.adjacency - after.adjacency).cwiseAbs().maxCoeff() < 1e-12);
    // argmax of each row must be preserved exactly
    for (int i = 0; i < a.n; ++i) {
        int arg_before = a.row_begin[i], arg_after = a.row_begin[i];
        for (int p = a.row_begin[i]; p < a.row_begin[i + 1]; ++p) {
            if (before.adjacency(p) > before.adjacency(arg_before)) arg_before = p;
            if (after.adjacency(p) > after.adjacency(arg_after)) arg_after = p;
        }
        CHECK(arg_before == arg_after);
    }
}

TEST_CASE("multi-head concatenation widths") {
    const auto t = random_tensor(9, 3, 31);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    MmgnConfig cfg;
    cfg.heads = 6;
    cfg.d_in = 8;
    cfg.d_hid = 16;
    const auto model = init_mmgn(cfg, 4, 9);
    Rng rng(6);
    const auto x = gaussian_rows(rng, 9, 8);
    const auto out = mmgn_forward(model, x, h, a);
    CHECK(out.z.cols() == 96); // 6 heads x 16
    CHECK(out.logits.cols() == 4);

    MmgnConfig cfg1 = cfg;
    cfg1.heads = 1;
    const auto model1 = init_mmgn(cfg1, 4, 9);
    const auto out1 = mmgn_forward(model1, x, h, a);
    const auto head = mgm_forward(model1.heads[0], x, h, a, cfg1, true);
    CHECK((out1.z - head.z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("feature extraction is deterministic and training changes it") {
    const auto t = random_tensor(14, 4, 8);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    MmgnConfig cfg;
    cfg.heads = 2;
    cfg.d_in = 5;
    cfg.d_hid = 4;
    auto model = init_mmgn(cfg, 2, 21);
    Rng rng(9);
    const auto x = gaussian_rows(rng, 14, 5);

    const auto z1 = extract_multimodal_features(model, x, h, a);
    const auto z2 = extract_multimodal_features(model, x, h, a);
    CHECK((z1 - z2).cwiseAbs().maxCoeff() == 0.0); // bitwise repeatable
    CHECK(z1.cols() == cfg.heads * cfg.d_hid);

    std::vector<int> labels(14, -1);
    for (int i = 0; i < 8; ++i) labels[i] = i % 2;
    MmgnTrainOptions opt;
    opt.epochs = 3;
    mmgn_train(model, x, h, a, labels, opt);
    const auto z3 = extract_multimodal_features(model, x, h, a);
    CHECK((z1 - z3).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training: initial loss near ln(n_classes), loss decreases, determinism") {
    const auto t = random_tensor(16, 5, 3);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    MmgnConfig cfg;
    cfg.heads = 2;
    cfg.d_in = 6;
    cfg.d_hid = 6;
    Rng rng(44);
    const auto x = gaussian_rows(rng, 16, 6);
    std::vector<int> labels(16);
    for (int i = 0; i < 16; ++i) labels[i] = i % 4;

    auto model = init_mmgn(cfg, 4, 100);
    MmgnTrainOptions opt;
    opt.epochs = 10;
    const auto history = mmgn_train(model, x, h, a, labels, opt);
    CHECK_THAT(history.front(), WithinAbs(std::log(4.0), 0.35));
    CHECK(history.back() < history.front());

    auto model2 = init_mmgn(cfg, 4, 100);
    mmgn_train(model2, x, h, a, labels, opt);
    const auto za = extract_multimodal_features(model, x, h, a);
    const auto zb = extract_multimodal_features(model2, x, h, a);
    CHECK((za - zb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training requires two classes") {
    const auto t = random_tensor(6, 2, 3);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    MmgnConfig cfg;
    cfg.heads = 1;
    cfg.d_in = 3;
    cfg.d_hid = 3;
    auto model = init_mmgn(cfg, 2, 5);
    Rng rng(2);
    const auto x = gaussian_rows(rng, 6, 3);
    std::vector<int> labels(6, 0);
    MmgnTrainOptions opt;
    CHECK_THROWS_AS(mmgn_train(model, x, h, a, labels, opt), EvalError);
}

TEST_CASE("analytic gradients match central differences for every tensor") {
    const auto t = random_tensor(8, 3, 61);
    const auto a = average_affinity(t);
    MmgnConfig cfg;
    cfg.heads = 2;
    cfg.bins = 8;
    cfg.d_in = 5;
    cfg.d_hid = 4;
    cfg.edge_hidden = 6;
    const auto h = build_histograms(t, a, cfg.bins);
    auto model = init_mmgn(cfg, 3, 1717);
    Rng rng(23);
    const auto x = gaussian_rows(rng, 8, 5);
    std::vector<int> labels(8, -1);
    for (int i = 0; i < 6; ++i) labels[i] = i % 3;

    MmgnModel grads;
    mmgn_loss_and_grads(model, x, h, a, labels, grads);

    auto params = parameter_views(model);
    auto gviews = parameter_views(grads);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto numeric = oracles::central_difference(params[k].data, params[k].size, [&]() {
            MmgnModel scratch;
            return mmgn_loss_and_grads(model, x, h, a, labels, scratch);
        });
        const Eigen::Map<Eigen::VectorXd> analytic(gviews[k].data, gviews[k].size);
        INFO("tensor " << params[k].name);
        CHECK(oracles::relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("permutation equivariance of the multimodal features") {
    const int n = 11;
    const auto t = random_tensor(n, 4, 5);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    MmgnConfig cfg;
    cfg.heads = 2;
    cfg.d_in = 5;
    cfg.d_hid = 4;
    const auto model = init_mmgn(cfg, 2, 12);
    Rng rng(17);
    const auto x = gaussian_rows(rng, n, 5);
    const auto z = extract_multimodal_features(model, x, h, a);

    // permuted world: relabel video i -> perm[i]
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    Rng prng(99);
    prng.shuffle(perm);
    WirelessSimilarityTensor tp;
    tp.n_videos = n;
    tp.n_trajectories = t.n_trajectories;
    for (const auto& [key, vals] : t.entries) {
        const int i = perm[key.first];
        const int j = perm[key.second];
        tp.entries[i < j ? std::pair{i, j} : std::pair{j, i}] = vals;
    }
    Eigen::MatrixXd xp(n, 5);
    for (int i = 0; i < n; ++i) xp.row(perm[i]) = x.row(i);
    const auto ap = average_affinity(tp);
    const auto hp = build_histograms(tp, ap, 32);
    const auto zp = extract_multimodal_features(model, xp, hp, ap);
    for (int i = 0; i < n; ++i)
        CHECK((zp.row(perm[i]) - z.row(i)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("checkpoint round-trip reproduces forward outputs exactly") {
    const auto t = random_tensor(10, 3, 14);
    const auto a = average_affinity(t);
    const auto h = build_histograms(t, a, 32);
    MmgnConfig cfg;
    cfg.heads = 3;
    cfg.d_in = 4;
    cfg.d_hid = 5;
    auto model = init_mmgn(cfg, 4, 77);
    Rng rng(3);
    const auto x = gaussian_rows(rng, 10, 4);
    std::vector<int> labels(10);
    for (int i = 0; i < 10; ++i) labels[i] = i % 4;
    MmgnTrainOptions opt;
    opt.epochs = 4;
    mmgn_train(model, x, h, a, labels, opt);

    const auto path =
        (std::filesystem::temp_directory_path() / "umtf_mmgn_ckpt.json").string();
    save_mmgn_checkpoint(model, path);
    const auto loaded = load_mmgn_checkpoint(path);
    std::filesystem::remove(path);

    const auto z1 = mmgn_forward(model, x, h, a);
    const auto z2 = mmgn_forward(loaded, x, h, a);
    CHECK((z1.z - z2.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((z1.logits - z2.logits).cwiseAbs().maxCoeff() == 0.0);
}
