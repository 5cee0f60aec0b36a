#pragma once
// The alternating dual-model loop: initial per-camera training, then rounds
// of  X -> NNA -> pseudo visual labels -> MMDA -> MMGN -> Z -> NNA -> pseudo
// multimodal labels -> triplet fine-tuning of F.  The baseline runs the same
// loop with the wireless path disabled.  Degradations downgrade a round to
// baseline behavior with a notice, never an abort.

#include <atomic>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "umtf/association.hpp"
#include "umtf/common.hpp"
#include "umtf/eval.hpp"
#include "umtf/graph.hpp"
#include "umtf/mmda.hpp"
#include "umtf/scenario.hpp"
#include "umtf/sensing.hpp"
#include "umtf/visual.hpp"

namespace umtf {

struct RunConfig {
    double lambda = 3.0;
    double sensing_radius_m = 50.0;
    int epochs_stage1 = 80;
    int epochs_stage2 = 80;
    int relabel_period = 5;
    int heads = 6;
    int bins = 32;
    int d_mid = 64;
    int d_feat = 32;
    int d_hid = 16;
    double lr_initial = 3e-4;
    double lr_finetune = 6e-5;
    double lr_mmgn = 1e-2;
    double weight_decay = 5e-4;
    double margin = 0.4;
    int batch_p = 16;
    int batch_k = 4;
    int mmgn_epochs = 80;
    double trajectory_fraction = 1.0;
    bool mmgn_use_triplet = false;
    std::uint64_t seed = 1;

    bool operator==(const RunConfig&) const = default;
};

inline void validate_run_config(const RunConfig& c) {
    using detail::require_param;
    require_param(c.lambda > 0.0, "lambda");
    require_param(c.sensing_radius_m > 0.0, "sensing_radius_m");
    require_param(c.epochs_stage1 >= 0, "epochs_stage1");
    require_param(c.epochs_stage2 >= 0, "epochs_stage2");
    require_param(c.relabel_period > 0, "relabel_period");
    require_param(c.epochs_stage2 % c.relabel_period == 0, "relabel_period (must divide epochs_stage2)");
    require_param(c.heads >= 1, "heads");
    require_param(c.bins >= 2, "bins");
    require_param(c.d_mid >= 1, "d_mid");
    require_param(c.d_feat >= 1, "d_feat");
    require_param(c.d_hid >= 1, "d_hid");
    require_param(c.lr_initial > 0.0, "lr_initial");
    require_param(c.lr_finetune > 0.0, "lr_finetune");
    require_param(c.lr_mmgn > 0.0, "lr_mmgn");
    require_param(c.weight_decay >= 0.0, "weight_decay");
    require_param(c.margin >= 0.0, "margin");
    require_param(c.batch_p >= 2, "batch_p");
    require_param(c.batch_k >= 1, "batch_k");
    require_param(c.mmgn_epochs >= 1, "mmgn_epochs");
    require_param(c.trajectory_fraction >= 0.0 && c.trajectory_fraction <= 1.0, "trajectory_fraction");
}

struct RoundMetrics {
    int round = 0;
    double map = NAN, r1 = NAN, r5 = NAN, r10 = NAN;
    double ami_visual = NAN, ami_multimodal = NAN;
    double coverage_visual = NAN, coverage_multimodal = NAN;
    double ami_mmda_clusters = NAN;
    std::vector<std::string> notices;
};

struct RunReport {
    std::string mode; // "umtf" | "baseline"
    RunConfig config;
    bool has_gt = false;
    int n_videos = 0;
    int n_trajectories_used = 0;
    std::vector<RoundMetrics> rounds; // indices 0..R; the last row is the final evaluation
    std::vector<std::string> notices;
    bool has_sensing = false;
    SensingResult sensing;
};

// Optional side outputs for the CLI.
struct PipelineDebug {
    std::optional<MmdaResult> final_mmda;
    Eigen::MatrixXd final_features;
};

namespace detail {

// AMI of two labelings restricted to rows labeled in `partial`.
inline std::optional<double> restricted_ami(const std::vector<int>& partial,
                                            const std::vector<int>& reference) {
    std::vector<int> a, b;
    for (std::size_t i = 0; i < partial.size(); ++i) {
        if (partial[i] < 0) continue;
        a.push_back(partial[i]);
        b.push_back(reference[i]);
    }
    if (a.empty()) return std::nullopt;
    return ami(a, b);
}

// Mean per-trajectory AMI between MMDA cluster assignments and ground-truth
// identities, over trajectories with at least 2 related videos.
inline std::optional<double> mmda_cluster_ami(const MmdaResult& mmda, const std::vector<int>& gt) {
    double sum = 0.0;
    int count = 0;
    for (const auto& cs : mmda.cluster_sets) {
        std::vector<int> cluster_label, gt_label;
        for (std::size_t k = 0; k < cs.clusters.size(); ++k) {
            for (int vid : cs.clusters[k].video_ids) {
                cluster_label.push_back(static_cast<int>(k));
                gt_label.push_back(gt[vid]);
            }
        }
        if (cluster_label.size() < 2) continue;
        sum += ami(cluster_label, gt_label);
        ++count;
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

inline RunReport run_pipeline(const Scenario& scenario, const RunConfig& cfg, bool wireless_mode,
                              PipelineDebug* debug) {
    validate_run_config(cfg);
    if (scenario.videos.empty()) throw Error("pipeline: scenario has no videos");

    RunReport rep;
    rep.mode = wireless_mode ? "umtf" : "baseline";
    rep.config = cfg;
    rep.has_gt = scenario.has_ground_truth();
    rep.n_videos = static_cast<int>(scenario.videos.size());

    std::vector<int> camera_ids;
    std::vector<int> gt;
    for (const auto& v : scenario.videos) {
        camera_ids.push_back(v.camera_id);
        if (rep.has_gt) gt.push_back(*v.gt_identity);
    }

    // wireless trajectory subset (Fig. 9(c)-style sweeps), reindexed densely
    Scenario working;
    SensingResult sensing;
    if (wireless_mode) {
        working.cameras = scenario.cameras;
        working.videos = scenario.videos;
        const int m_all = static_cast<int>(scenario.trajectories.size());
        const int m_used = static_cast<int>(std::floor(cfg.trajectory_fraction * m_all));
        std::vector<int> pick(m_all);
        for (int i = 0; i < m_all; ++i) pick[i] = i;
        if (m_used < m_all) {
            Rng rng(mix_seed(cfg.seed, "traj_subset"));
            rng.shuffle(pick);
            pick.resize(m_used);
            std::sort(pick.begin(), pick.end());
        }
        for (int idx : pick) {
            WirelessTrajectory t = scenario.trajectories[idx];
            t.id = static_cast<int>(working.trajectories.size());
            working.trajectories.push_back(std::move(t));
        }
        rep.n_trajectories_used = static_cast<int>(working.trajectories.size());
        sensing = run_sensing(working, cfg.sensing_radius_m);
        rep.has_sensing = true;
        rep.sensing = sensing;
    }

    VisualConfig vcfg;
    vcfg.d_raw = static_cast<int>(scenario.videos.front().descriptor.size());
    vcfg.d_mid = cfg.d_mid;
    vcfg.d_feat = cfg.d_feat;
    VisualModel model = init_visual(vcfg, cfg.seed);

    InitialTrainOptions init_opt;
    init_opt.epochs = cfg.epochs_stage1;
    init_opt.lr = cfg.lr_initial;
    init_opt.weight_decay = cfg.weight_decay;
    init_opt.seed = cfg.seed;
    auto init_result = initial_train(model, scenario.videos, init_opt);
    for (auto& n : init_result.notices) rep.notices.push_back(std::move(n));

    const int rounds = cfg.epochs_stage2 / cfg.relabel_period;
    for (int round = 0; round <= rounds; ++round) {
        RoundMetrics rm;
        rm.round = round;
        const bool is_final = round == rounds;

        const Eigen::MatrixXd x = extract_features(model, scenario.videos);
        if (rep.has_gt) {
            const auto retrieval = cmc_map(x, camera_ids, gt);
            rm.map = retrieval.map;
            rm.r1 = retrieval.rank1;
            rm.r5 = retrieval.rank5;
            rm.r10 = retrieval.rank10;
        }

        const PseudoLabeling pv = nna(x, camera_ids);
        rm.coverage_visual = pv.coverage;
        if (rep.has_gt) {
            if (auto a = restricted_ami(pv.labels, gt)) rm.ami_visual = *a;
        }

        const std::vector<int>* train_labels = &pv.labels;
        PseudoLabeling pm;
        std::optional<MmdaResult> mmda_result;
        if (wireless_mode) {
            if (rep.n_trajectories_used == 0) {
                rm.notices.push_back("round degraded to baseline: no wireless trajectories");
            } else {
                try {
                    mmda_result = run_mmda(x, sensing, cfg.lambda,
                                           mix_seed(cfg.seed, "mmda_round",
                                                    static_cast<std::uint64_t>(round)));
                } catch (const EstimationError& e) {
                    rm.notices.push_back(std::string("round degraded to baseline: ") + e.what());
                }
            }
            if (mmda_result) {
                if (rep.has_gt) {
                    if (auto a = mmda_cluster_ami(*mmda_result, gt)) rm.ami_mmda_clusters = *a;
                }
                if (pv.n_classes < 2) {
                    rm.notices.push_back(
                        "round degraded to baseline: fewer than 2 pseudo visual classes");
                } else {
                    const DenseAffinity aavg = average_affinity(mmda_result->tensor);
                    const SimilarityHistogram hist =
                        build_histograms(mmda_result->tensor, aavg, cfg.bins);
                    MmgnConfig gcfg;
                    gcfg.heads = cfg.heads;
                    gcfg.bins = cfg.bins;
                    gcfg.d_in = cfg.d_feat;
                    gcfg.d_hid = cfg.d_hid;
                    MmgnModel mmgn =
                        init_mmgn(gcfg, pv.n_classes,
                                  mix_seed(cfg.seed, "mmgn_round", static_cast<std::uint64_t>(round)));
                    MmgnTrainOptions topt;
                    topt.epochs = cfg.mmgn_epochs;
                    topt.lr = cfg.lr_mmgn;
                    topt.weight_decay = cfg.weight_decay;
                    topt.use_triplet = cfg.mmgn_use_triplet;
                    topt.triplet_margin = cfg.margin;
                    mmgn_train(mmgn, x, hist, aavg, pv.labels, topt);

                    const Eigen::MatrixXd z = extract_multimodal_features(mmgn, x, hist, aavg);
                    pm = nna(z, camera_ids);
                    rm.coverage_multimodal = pm.coverage;
                    if (rep.has_gt) {
                        if (auto a = restricted_ami(pm.labels, gt)) rm.ami_multimodal = *a;
                    }
                    if (pm.n_classes >= 2) {
                        train_labels = &pm.labels;
                    } else {
                        rm.notices.push_back(
                            "pseudo multimodal labels degenerate; training on visual labels");
                    }
                }
            }
        }

        if (is_final) {
            if (debug) {
                debug->final_features = x;
                if (mmda_result) debug->final_mmda = std::move(mmda_result);
            }
            rep.rounds.push_back(std::move(rm));
            break;
        }

        TripletFinetuneOptions fopt;
        fopt.epochs = cfg.relabel_period;
        fopt.lr = cfg.lr_finetune;
        fopt.weight_decay = cfg.weight_decay;
        fopt.margin = cfg.margin;
        fopt.batch_p = cfg.batch_p;
        fopt.batch_k = cfg.batch_k;
        fopt.seed = mix_seed(cfg.seed, "finetune_round", static_cast<std::uint64_t>(round));
        auto ft = triplet_finetune(model, scenario.videos, *train_labels, fopt);
        for (auto& n : ft.notices) rm.notices.push_back(std::move(n));
        rep.rounds.push_back(std::move(rm));
    }
    return rep;
}

} // namespace detail

inline RunReport run_umtf(const Scenario& scenario, const RunConfig& cfg,
                          PipelineDebug* debug = nullptr) {
    return detail::run_pipeline(scenario, cfg, true, debug);
}

inline RunReport run_baseline(const Scenario& scenario, const RunConfig& cfg,
                              PipelineDebug* debug = nullptr) {
    return detail::run_pipeline(scenario, cfg, false, debug);
}

// ---------------------------------------------------------------------------
// Ablation sweeps

enum class SweepAxis { lambda, radius, trajectory_fraction, heads };

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "lambda") return SweepAxis::lambda;
    if (s == "radius") return SweepAxis::radius;
    if (s == "trajectory_fraction") return SweepAxis::trajectory_fraction;
    if (s == "heads") return SweepAxis::heads;
    throw ParamError("invalid parameter: axis (expected lambda|radius|trajectory_fraction|heads)");
}

inline const char* sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::lambda: return "lambda";
        case SweepAxis::radius: return "radius";
        case SweepAxis::trajectory_fraction: return "trajectory_fraction";
        case SweepAxis::heads: return "heads";
    }
    return "?";
}

struct SweepRow {
    double value = 0.0;
    std::string status; // "ok" or "error"
    std::string error_message;
    RoundMetrics final_metrics; // final-round metrics when status == ok
};

inline RunConfig apply_sweep_value(RunConfig cfg, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::lambda: cfg.lambda = value; break;
        case SweepAxis::radius: cfg.sensing_radius_m = value; break;
        case SweepAxis::trajectory_fraction: cfg.trajectory_fraction = value; break;
        case SweepAxis::heads: cfg.heads = static_cast<int>(value); break;
    }
    return cfg;
}

// One full UMTF run per value over a shared scenario and seed; `jobs`
// bounds the number of concurrent runs, output order follows `values`.
inline std::vector<SweepRow> ablation_sweep(const Scenario& scenario, const RunConfig& base,
                                            SweepAxis axis, const std::vector<double>& values,
                                            int jobs = 1) {
    if (values.empty()) throw ParamError("invalid parameter: values (empty sweep)");
    std::vector<SweepRow> rows(values.size());
    const int n_jobs = std::max(1, jobs);

    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= values.size()) return;
            rows[i].value = values[i];
            try {
                const RunConfig cfg = apply_sweep_value(base, axis, values[i]);
                const RunReport rep = run_umtf(scenario, cfg);
                rows[i].final_metrics = rep.rounds.back();
                rows[i].status = "ok";
            } catch (const std::exception& e) {
                rows[i].status = "error";
                rows[i].error_message = e.what();
            }
        }
    };
    if (n_jobs == 1) {
        work();
    } else {
        for (int t = 0; t < n_jobs; ++t) workers.emplace_back(work);
        for (auto& w : workers) w.join();
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Serialization: metrics CSV, sweep CSV, report JSON

inline std::string metrics_csv(const RunReport& rep) {
    std::string out;
    if (rep.has_gt) {
        out = "round,mAP,r1,r5,r10,ami_visual,ami_multimodal,coverage_visual,coverage_multimodal,"
              "ami_mmda_clusters\n";
        for (const auto& r : rep.rounds) {
            out += std::to_string(r.round) + ',' + format_g9(r.map) + ',' + format_g9(r.r1) + ',' +
                   format_g9(r.r5) + ',' + format_g9(r.r10) + ',' + format_g9(r.ami_visual) + ',' +
                   format_g9(r.ami_multimodal) + ',' + format_g9(r.coverage_visual) + ',' +
                   format_g9(r.coverage_multimodal) + ',' + format_g9(r.ami_mmda_clusters) + '\n';
        }
    } else {
        // ground truth stripped: gt-dependent columns are omitted
        out = "round,coverage_visual,coverage_multimodal\n";
        for (const auto& r : rep.rounds)
            out += std::to_string(r.round) + ',' + format_g9(r.coverage_visual) + ',' +
                   format_g9(r.coverage_multimodal) + '\n';
    }
    return out;
}

inline std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
    std::string out = "axis,value,status,mAP,r1,r5,r10,ami_visual,ami_multimodal,coverage_visual,"
                      "coverage_multimodal,ami_mmda_clusters\n";
    for (const auto& r : rows) {
        out += std::string(sweep_axis_name(axis)) + ',' + format_g9(r.value) + ',' + r.status + ',';
        if (r.status == "ok") {
            out += format_g9(r.final_metrics.map) + ',' + format_g9(r.final_metrics.r1) + ',' +
                   format_g9(r.final_metrics.r5) + ',' + format_g9(r.final_metrics.r10) + ',' +
                   format_g9(r.final_metrics.ami_visual) + ',' + format_g9(r.final_metrics.ami_multimodal) + ',' +
                   format_g9(r.final_metrics.coverage_visual) + ',' + format_g9(r.final_metrics.coverage_multimodal) +
                   ',' + format_g9(r.final_metrics.ami_mmda_clusters);
        } else {
            out += "nan,nan,nan,nan,nan,nan,nan,nan,nan";
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["lambda"] = c.lambda;
    j["sensing_radius_m"] = c.sensing_radius_m;
    j["epochs_stage1"] = c.epochs_stage1;
    j["epochs_stage2"] = c.epochs_stage2;
    j["relabel_period"] = c.relabel_period;
    j["heads"] = c.heads;
    j["bins"] = c.bins;
    j["d_mid"] = c.d_mid;
    j["d_feat"] = c.d_feat;
    j["d_hid"] = c.d_hid;
    j["lr_initial"] = c.lr_initial;
    j["lr_finetune"] = c.lr_finetune;
    j["lr_mmgn"] = c.lr_mmgn;
    j["weight_decay"] = c.weight_decay;
    j["margin"] = c.margin;
    j["batch_p"] = c.batch_p;
    j["batch_k"] = c.batch_k;
    j["mmgn_epochs"] = c.mmgn_epochs;
    j["trajectory_fraction"] = c.trajectory_fraction;
    j["mmgn_use_triplet"] = c.mmgn_use_triplet;
    j["seed"] = c.seed;
    return j;
}

// Applies config-file values on top of `base`; unknown keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::ordered_json& j, RunConfig base) {
    static const std::set<std::string> known = {
        "lambda",      "sensing_radius_m", "epochs_stage1", "epochs_stage2",
        "relabel_period", "heads",         "bins",          "d_mid",
        "d_feat",      "d_hid",            "lr_initial",    "lr_finetune",
        "lr_mmgn",     "weight_decay",     "margin",        "batch_p",
        "batch_k",     "mmgn_epochs",      "trajectory_fraction", "mmgn_use_triplet",
        "seed"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ParseError("run config: unknown key '" + key + "'");
    auto get = [&](const char* key, auto& field) {
        using T = std::remove_reference_t<decltype(field)>;
        if (j.contains(key)) field = j.at(key).get<T>();
    };
    get("lambda", base.lambda);
    get("sensing_radius_m", base.sensing_radius_m);
    get("epochs_stage1", base.epochs_stage1);
    get("epochs_stage2", base.epochs_stage2);
    get("relabel_period", base.relabel_period);
    get("heads", base.heads);
    get("bins", base.bins);
    get("d_mid", base.d_mid);
    get("d_feat", base.d_feat);
    get("d_hid", base.d_hid);
    get("lr_initial", base.lr_initial);
    get("lr_finetune", base.lr_finetune);
    get("lr_mmgn", base.lr_mmgn);
    get("weight_decay", base.weight_decay);
    get("margin", base.margin);
    get("batch_p", base.batch_p);
    get("batch_k", base.batch_k);
    get("mmgn_epochs", base.mmgn_epochs);
    get("trajectory_fraction", base.trajectory_fraction);
    get("mmgn_use_triplet", base.mmgn_use_triplet);
    get("seed", base.seed);
    return base;
}

inline nlohmann::ordered_json round_metrics_to_json(const RoundMetrics& r) {
    nlohmann::ordered_json j;
    j["round"] = r.round;
    j["mAP"] = r.map;
    j["r1"] = r.r1;
    j["r5"] = r.r5;
    j["r10"] = r.r10;
    j["ami_visual"] = r.ami_visual;
    j["ami_multimodal"] = r.ami_multimodal;
    j["coverage_visual"] = r.coverage_visual;
    j["coverage_multimodal"] = r.coverage_multimodal;
    j["ami_mmda_clusters"] = r.ami_mmda_clusters;
    j["notices"] = r.notices;
    return j;
}

inline nlohmann::ordered_json report_to_json(const RunReport& rep) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["mode"] = rep.mode;
    j["config"] = run_config_to_json(rep.config);
    j["n_videos"] = rep.n_videos;
    j["n_trajectories_used"] = rep.n_trajectories_used;
    j["has_gt"] = rep.has_gt;
    j["notices"] = rep.notices;
    j["rounds"] = nlohmann::ordered_json::array();
    for (const auto& r : rep.rounds) j["rounds"].push_back(round_metrics_to_json(r));
    if (rep.has_sensing) {
        nlohmann::ordered_json js;
        js["sensing_radius_m"] = rep.sensing.sensing_radius_m;
        js["total_fragments"] = rep.sensing.total_fragments();
        js["trajectories"] = nlohmann::ordered_json::array();
        for (std::size_t m = 0; m < rep.sensing.fragments.size(); ++m) {
            nlohmann::ordered_json jt;
            jt["trajectory_id"] = static_cast<int>(m);
            jt["fragments"] = nlohmann::ordered_json::array();
            for (const auto& f : rep.sensing.fragments[m])
                jt["fragments"].push_back({{"fragment_index", f.fragment_index},
                                           {"camera_id", f.camera_id},
                                           {"start_s", f.start_s},
                                           {"end_s", f.end_s},
                                           {"visitation_ordinal", f.visitation_ordinal}});
            js["trajectories"].push_back(std::move(jt));
        }
        j["sensing"] = std::move(js);
    }
    return j;
}

// Per-trajectory cluster report with P values (debug dump).
inline nlohmann::ordered_json mmda_report_json(const MmdaResult& mmda) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["trajectories"] = nlohmann::ordered_json::array();
    for (const auto& cs : mmda.cluster_sets) {
        nlohmann::ordered_json jt;
        jt["trajectory_id"] = cs.trajectory_id;
        jt["k_m"] = cs.k_m;
        jt["clusters"] = nlohmann::ordered_json::array();
        for (const auto& c : cs.clusters)
            jt["clusters"].push_back({{"video_ids", c.video_ids}, {"consistency", c.consistency}});
        j["trajectories"].push_back(std::move(jt));
    }
    return j;
}

} // namespace umtf
