// umtf: generate synthetic scenarios, run the full pipeline or the visual
// baseline, sweep ablation axes, and score saved feature dumps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "umtf/checkpoint.hpp"
#include "umtf/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw umtf::Error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw umtf::Error("write failed: " + path.string());
}

ordered_json features_to_json(const Eigen::MatrixXd& x) {
    ordered_json j;
    j["format_version"] = 1;
    ordered_json ids = ordered_json::array();
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        ids.push_back(i);
        std::vector<double> row(x.cols());
        for (Eigen::Index k = 0; k < x.cols(); ++k) row[k] = x(i, k);
        rows.push_back(row);
    }
    j["video_ids"] = std::move(ids);
    j["features"] = std::move(rows);
    return j;
}

Eigen::MatrixXd features_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw umtf::Error("cannot open for reading: " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw umtf::ParseError("feature dump " + path + ": " + e.what());
    }
    if (j.value("format_version", 0) != 1)
        throw umtf::ParseError("feature dump " + path + ": unsupported format_version");
    const auto rows = j.at("features").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw umtf::ParseError("feature dump " + path + ": empty");
    Eigen::MatrixXd x(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size())
            throw umtf::ParseError("feature dump " + path + ": ragged rows");
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return x;
}

struct RunFlags {
    std::string scenario_path;
    std::string config_path;
    std::string out_dir = ".";
    std::string dump_features;
    std::string dump_mmda;
};

void add_run_config_options(CLI::App* cmd, umtf::RunConfig& cfg) {
    cmd->add_option("--lambda", cfg.lambda, "cluster-count coefficient");
    cmd->add_option("--sensing-radius", cfg.sensing_radius_m, "wireless sensing radius, meters");
    cmd->add_option("--epochs-stage1", cfg.epochs_stage1, "initial training epochs");
    cmd->add_option("--epochs-stage2", cfg.epochs_stage2, "fine-tuning epochs");
    cmd->add_option("--relabel-period", cfg.relabel_period, "epochs between label re-estimations");
    cmd->add_option("--heads", cfg.heads, "MGM heads");
    cmd->add_option("--bins", cfg.bins, "histogram bins");
    cmd->add_option("--d-mid", cfg.d_mid, "embedding hidden width");
    cmd->add_option("--d-feat", cfg.d_feat, "embedding output width");
    cmd->add_option("--d-hid", cfg.d_hid, "MGM output width");
    cmd->add_option("--lr-initial", cfg.lr_initial, "initial-stage learning rate");
    cmd->add_option("--lr-finetune", cfg.lr_finetune, "fine-tune learning rate");
    cmd->add_option("--lr-mmgn", cfg.lr_mmgn, "MMGN learning rate");
    cmd->add_option("--weight-decay", cfg.weight_decay, "weight decay");
    cmd->add_option("--margin", cfg.margin, "triplet margin");
    cmd->add_option("--batch-p", cfg.batch_p, "identities per triplet batch");
    cmd->add_option("--batch-k", cfg.batch_k, "samples per identity per batch");
    cmd->add_option("--mmgn-epochs", cfg.mmgn_epochs, "MMGN epochs per round");
    cmd->add_option("--trajectory-fraction", cfg.trajectory_fraction,
                    "fraction of wireless trajectories used");
    cmd->add_flag("--mmgn-triplet", cfg.mmgn_use_triplet, "add triplet loss to MMGN training");
    cmd->add_option("--seed", cfg.seed, "run seed");
}

umtf::RunConfig resolve_run_config(const CLI::App* cmd, const umtf::RunConfig& flag_values,
                                   const std::string& config_path) {
    umtf::RunConfig cfg; // built-in defaults
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw umtf::Error("cannot open config file: " + config_path);
        ordered_json j;
        try {
            j = ordered_json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw umtf::ParseError("config file " + config_path + ": " + e.what());
        }
        cfg = umtf::run_config_from_json(j, cfg);
    }
    // flags override config-file values
    auto take = [&](const char* flag, auto member) {
        if (cmd->count(flag) > 0) cfg.*member = flag_values.*member;
    };
    take("--lambda", &umtf::RunConfig::lambda);
    take("--sensing-radius", &umtf::RunConfig::sensing_radius_m);
    take("--epochs-stage1", &umtf::RunConfig::epochs_stage1);
    take("--epochs-stage2", &umtf::RunConfig::epochs_stage2);
    take("--relabel-period", &umtf::RunConfig::relabel_period);
    take("--heads", &umtf::RunConfig::heads);
    take("--bins", &umtf::RunConfig::bins);
    take("--d-mid", &umtf::RunConfig::d_mid);
    take("--d-feat", &umtf::RunConfig::d_feat);
    take("--d-hid", &umtf::RunConfig::d_hid);
    take("--lr-initial", &umtf::RunConfig::lr_initial);
    take("--lr-finetune", &umtf::RunConfig::lr_finetune);
    take("--lr-mmgn", &umtf::RunConfig::lr_mmgn);
    take("--weight-decay", &umtf::RunConfig::weight_decay);
    take("--margin", &umtf::RunConfig::margin);
    take("--batch-p", &umtf::RunConfig::batch_p);
    take("--batch-k", &umtf::RunConfig::batch_k);
    take("--mmgn-epochs", &umtf::RunConfig::mmgn_epochs);
    take("--trajectory-fraction", &umtf::RunConfig::trajectory_fraction);
    take("--mmgn-triplet", &umtf::RunConfig::mmgn_use_triplet);
    take("--seed", &umtf::RunConfig::seed);
    return cfg;
}

int run_or_baseline(bool baseline, const RunFlags& flags, const umtf::RunConfig& cfg) {
    const umtf::Scenario scenario = umtf::load_scenario(flags.scenario_path);
    fs::create_directories(flags.out_dir);

    umtf::PipelineDebug debug;
    const bool want_debug = !flags.dump_features.empty() || !flags.dump_mmda.empty();
    const umtf::RunReport rep = baseline
                                    ? umtf::run_baseline(scenario, cfg, want_debug ? &debug : nullptr)
                                    : umtf::run_umtf(scenario, cfg, want_debug ? &debug : nullptr);

    write_text(fs::path(flags.out_dir) / "report.json", umtf::report_to_json(rep).dump(2) + "\n");
    write_text(fs::path(flags.out_dir) / "metrics.csv", umtf::metrics_csv(rep));
    if (!flags.dump_features.empty())
        write_text(flags.dump_features, features_to_json(debug.final_features).dump() + "\n");
    if (!flags.dump_mmda.empty()) {
        if (!debug.final_mmda)
            throw umtf::Error("no MMDA result to dump (baseline mode or degraded run)");
        write_text(flags.dump_mmda, umtf::mmda_report_json(*debug.final_mmda).dump(2) + "\n");
    }

    const auto& last = rep.rounds.back();
    std::cout << rep.mode << " finished: rounds=" << rep.rounds.size() - 1;
    if (rep.has_gt) std::cout << " final mAP=" << umtf::format_g9(last.map);
    std::cout << " coverage_visual=" << umtf::format_g9(last.coverage_visual) << std::endl;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"UMTF desk-scale simulator and pipeline"};
    app.require_subcommand(1);

    // generate ------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "generate a synthetic scenario document");
    umtf::GenerationParams gp;
    std::uint64_t gen_seed = 7;
    std::string gen_out_dir = ".";
    bool strip_gt = false;
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out-dir", gen_out_dir, "output directory");
    gen->add_flag("--strip-gt", strip_gt, "omit ground-truth fields from the document");
    gen->add_option("--n-cameras", gp.n_cameras, "camera count");
    gen->add_option("--n-identities", gp.n_identities, "identity count");
    gen->add_option("--phone-fraction", gp.phone_fraction, "fraction of identities with phones");
    gen->add_option("--view-radius", gp.view_radius_m, "camera view radius, meters");
    gen->add_option("--camera-spacing", gp.min_camera_spacing_m, "min camera spacing, meters");
    gen->add_option("--wireless-period", gp.wireless_period_s, "wireless sample period, seconds");
    gen->add_option("--sigma-pos", gp.sigma_pos_m, "positioning noise, meters");
    gen->add_option("--d-raw", gp.d_raw, "descriptor width");
    gen->add_option("--sigma-app", gp.sigma_app, "appearance noise");
    gen->add_option("--corrupt-prob", gp.corrupt_prob, "descriptor corruption probability");
    gen->add_option("--corrupt-alpha", gp.corrupt_alpha, "identity signal kept under corruption");
    gen->add_option("--sigma-corrupt", gp.sigma_corrupt, "corruption noise");
    gen->add_option("--camera-bias", gp.camera_bias, "per-camera appearance bias magnitude");
    gen->add_option("--min-visits", gp.min_visits, "min camera visits per identity");
    gen->add_option("--max-visits", gp.max_visits, "max camera visits per identity");
    gen->add_option("--walk-speed", gp.walk_speed_mps, "walking speed, m/s");
    gen->add_option("--start-stagger", gp.start_stagger_s, "start time spread, seconds");

    // run / baseline -------------------------------------------------------
    RunFlags run_flags, base_flags;
    umtf::RunConfig run_cfg, base_cfg;
    auto* run = app.add_subcommand("run", "run the full UMTF pipeline");
    run->add_option("--scenario", run_flags.scenario_path, "scenario document")->required();
    run->add_option("--config", run_flags.config_path, "run config JSON");
    run->add_option("--out-dir", run_flags.out_dir, "output directory");
    run->add_option("--dump-features", run_flags.dump_features, "write final features to this path");
    run->add_option("--dump-mmda", run_flags.dump_mmda, "write final MMDA cluster report");
    add_run_config_options(run, run_cfg);

    auto* base = app.add_subcommand("baseline", "run the visual-only baseline");
    base->add_option("--scenario", base_flags.scenario_path, "scenario document")->required();
    base->add_option("--config", base_flags.config_path, "run config JSON");
    base->add_option("--out-dir", base_flags.out_dir, "output directory");
    base->add_option("--dump-features", base_flags.dump_features, "write final features to this path");
    add_run_config_options(base, base_cfg);

    // sweep ------------------------------------------------------------
    RunFlags sweep_flags;
    umtf::RunConfig sweep_cfg;
    std::string sweep_axis = "lambda";
    std::string sweep_values = "";
    int sweep_jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "one UMTF run per value of an ablation axis");
    sweep->add_option("--scenario", sweep_flags.scenario_path, "scenario document")->required();
    sweep->add_option("--config", sweep_flags.config_path, "run config JSON");
    sweep->add_option("--out-dir", sweep_flags.out_dir, "output directory");
    sweep->add_option("--axis", sweep_axis, "lambda|radius|trajectory_fraction|heads")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep->add_option("--jobs", sweep_jobs, "parallel runs");
    add_run_config_options(sweep, sweep_cfg);

    // eval ------------------------------------------------------------
    std::string eval_scenario, eval_features, eval_out_dir = ".";
    auto* evalc = app.add_subcommand("eval", "score a saved feature dump against ground truth");
    evalc->add_option("--scenario", eval_scenario, "scenario document")->required();
    evalc->add_option("--features", eval_features, "feature dump JSON")->required();
    evalc->add_option("--out-dir", eval_out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            umtf::Scenario s = umtf::generate_scenario(gp, gen_seed);
            if (strip_gt) s = umtf::strip_ground_truth(std::move(s));
            fs::create_directories(gen_out_dir);
            const auto path = fs::path(gen_out_dir) / "scenario.json";
            umtf::save_scenario(s, path.string());
            std::cout << "wrote " << path.string() << " (" << s.videos.size() << " videos, "
                      << s.trajectories.size() << " trajectories)" << std::endl;
            return 0;
        }
        if (run->parsed())
            return run_or_baseline(false, run_flags,
                                   resolve_run_config(run, run_cfg, run_flags.config_path));
        if (base->parsed())
            return run_or_baseline(true, base_flags,
                                   resolve_run_config(base, base_cfg, base_flags.config_path));
        if (sweep->parsed()) {
            const umtf::RunConfig cfg = resolve_run_config(sweep, sweep_cfg, sweep_flags.config_path);
            const umtf::Scenario scenario = umtf::load_scenario(sweep_flags.scenario_path);
            const umtf::SweepAxis axis = umtf::sweep_axis_from_string(sweep_axis);
            std::vector<double> values;
            std::stringstream ss(sweep_values);
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!tok.empty()) values.push_back(std::stod(tok));
            const auto rows = umtf::ablation_sweep(scenario, cfg, axis, values, sweep_jobs);
            fs::create_directories(sweep_flags.out_dir);
            const auto path = fs::path(sweep_flags.out_dir) / "sweep.csv";
            write_text(path, umtf::sweep_csv(axis, rows));
            std::cout << "wrote " << path.string() << " (" << rows.size() << " rows)" << std::endl;
            return 0;
        }
        if (evalc->parsed()) {
            const umtf::Scenario scenario = umtf::load_scenario(eval_scenario);
            if (!scenario.has_ground_truth())
                throw umtf::Error("eval: scenario has no ground truth");
            const Eigen::MatrixXd x = features_from_json(eval_features);
            if (x.rows() != static_cast<Eigen::Index>(scenario.videos.size()))
                throw umtf::Error("eval: feature rows do not match scenario videos");
            std::vector<int> camera_ids, gt;
            for (const auto& v : scenario.videos) {
                camera_ids.push_back(v.camera_id);
                gt.push_back(*v.gt_identity);
            }
            const auto m = umtf::cmc_map(x, camera_ids, gt);
            ordered_json j;
            j["format_version"] = 1;
            j["mAP"] = m.map;
            j["r1"] = m.rank1;
            j["r5"] = m.rank5;
            j["r10"] = m.rank10;
            j["n_valid_queries"] = m.n_valid_queries;
            j["n_skipped_queries"] = m.n_skipped_queries;
            fs::create_directories(eval_out_dir);
            const auto path = fs::path(eval_out_dir) / "eval.json";
            write_text(path, j.dump(2) + "\n");
            std::cout << "mAP=" << umtf::format_g9(m.map) << " r1=" << umtf::format_g9(m.rank1)
                      << " r5=" << umtf::format_g9(m.rank5) << " r10=" << umtf::format_g9(m.rank10)
                      << std::endl;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
