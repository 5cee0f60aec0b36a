#pragma once
// Synthetic multi-camera worlds: cameras, identities walking waypoint paths,
// wireless positioning trajectories, and video sequences with noisy
// appearance descriptors.  Also defines the on-disk scenario document.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "umtf/common.hpp"

namespace umtf {

struct Camera {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    double view_radius = 0.0;

    bool operator==(const Camera&) const = default;
};

struct VideoSequence {
    int id = 0;
    int camera_id = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    std::vector<double> descriptor;
    std::optional<int> gt_identity; // evaluation only, never read by the pipeline

    bool operator==(const VideoSequence&) const = default;
};

struct TrajectorySample {
    double t_s = 0.0;
    double x_m = 0.0;
    double y_m = 0.0;

    bool operator==(const TrajectorySample&) const = default;
};

struct WirelessTrajectory {
    int id = 0;
    std::string signal_id;
    std::vector<TrajectorySample> samples; // strictly increasing in time

    bool operator==(const WirelessTrajectory&) const = default;
};

struct GenerationParams {
    int n_cameras = 6;
    int n_identities = 40;
    double phone_fraction = 0.8;
    double view_radius_m = 15.0;
    double min_camera_spacing_m = 50.0;
    double wireless_period_s = 1.0;
    double sigma_pos_m = 2.0;
    int d_raw = 64;
    double sigma_app = 0.08;
    double corrupt_prob = 0.2;
    double corrupt_alpha = 1.0;
    double sigma_corrupt = 0.25;
    double camera_bias = 0.3;
    int min_visits = 4;
    int max_visits = 6;
    double walk_speed_mps = 1.4;
    double start_stagger_s = 240.0;

    bool operator==(const GenerationParams&) const = default;
};

struct Scenario {
    std::vector<Camera> cameras;
    std::vector<VideoSequence> videos;
    std::vector<WirelessTrajectory> trajectories;
    // eval only: identity of each trajectory, aligned with `trajectories`.
    std::optional<std::vector<int>> trajectory_identity;
    GenerationParams params;
    std::uint64_t seed = 0;

    bool operator==(const Scenario&) const = default;

    bool has_ground_truth() const {
        if (!videos.empty() && !videos.front().gt_identity.has_value()) return false;
        for (const auto& v : videos)
            if (!v.gt_identity.has_value()) return false;
        return trajectories.empty() || trajectory_identity.has_value();
    }
};

namespace detail {

inline void require_param(bool ok, const char* field) {
    if (!ok) throw ParamError(std::string("invalid generation parameter: ") + field);
}

inline GenerationParams canonicalize(GenerationParams p) {
    require_param(p.n_cameras > 0, "n_cameras");
    require_param(p.n_identities > 0, "n_identities");
    require_param(p.phone_fraction >= 0.0 && p.phone_fraction <= 1.0, "phone_fraction");
    require_param(p.view_radius_m > 0.0, "view_radius_m");
    require_param(p.min_camera_spacing_m > 0.0, "min_camera_spacing_m");
    require_param(p.wireless_period_s > 0.0, "wireless_period_s");
    require_param(p.sigma_pos_m >= 0.0, "sigma_pos_m");
    require_param(p.d_raw > 0, "d_raw");
    require_param(p.sigma_app >= 0.0, "sigma_app");
    require_param(p.corrupt_prob >= 0.0 && p.corrupt_prob <= 1.0, "corrupt_prob");
    require_param(p.corrupt_alpha >= 0.0, "corrupt_alpha");
    require_param(p.sigma_corrupt >= 0.0, "sigma_corrupt");
    require_param(p.camera_bias >= 0.0, "camera_bias");
    require_param(p.min_visits >= 1, "min_visits");
    require_param(p.max_visits >= p.min_visits, "max_visits");
    require_param(p.walk_speed_mps > 0.0, "walk_speed_mps");
    require_param(p.start_stagger_s >= 0.0, "start_stagger_s");

    p.phone_fraction = round9(p.phone_fraction);
    p.view_radius_m = round9(p.view_radius_m);
    p.min_camera_spacing_m = round9(p.min_camera_spacing_m);
    p.wireless_period_s = round9(p.wireless_period_s);
    p.sigma_pos_m = round9(p.sigma_pos_m);
    p.sigma_app = round9(p.sigma_app);
    p.corrupt_prob = round9(p.corrupt_prob);
    p.corrupt_alpha = round9(p.corrupt_alpha);
    p.sigma_corrupt = round9(p.sigma_corrupt);
    p.camera_bias = round9(p.camera_bias);
    p.walk_speed_mps = round9(p.walk_speed_mps);
    p.start_stagger_s = round9(p.start_stagger_s);
    return p;
}

inline std::vector<double> unit_gaussian_vec(Rng& rng, int dim) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (auto& x : v) {
        x = rng.gaussian();
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    return v;
}

struct Waypoint {
    double t = 0.0, x = 0.0, y = 0.0;
};

// Piecewise-linear position at time t (t clamped to the path span).
inline std::pair<double, double> path_at(const std::vector<Waypoint>& path, double t) {
    if (t <= path.front().t) return {path.front().x, path.front().y};
    for (std::size_t s = 1; s < path.size(); ++s) {
        if (t <= path[s].t) {
            const auto& a = path[s - 1];
            const auto& b = path[s];
            const double span = b.t - a.t;
            const double u = span > 0.0 ? (t - a.t) / span : 0.0;
            return {a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u};
        }
    }
    return {path.back().x, path.back().y};
}

} // namespace detail

inline Scenario generate_scenario(const GenerationParams& raw_params, std::uint64_t seed) {
    const GenerationParams params = detail::canonicalize(raw_params);
    Rng rng(mix_seed(seed, "scenario"));

    Scenario s;
    s.params = params;
    s.seed = seed;

    // Cameras on a jittered grid; pitch keeps every pair at least
    // min_camera_spacing_m apart and spreads the network wide enough that
    // typical sensing discs are crossed transiently rather than overlapping.
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(params.n_cameras))));
    const double pitch = params.min_camera_spacing_m * 3.0;
    const double jitter = params.min_camera_spacing_m * 0.25;
    for (int c = 0; c < params.n_cameras; ++c) {
        Camera cam;
        cam.id = c;
        cam.x = round9((c % cols) * pitch + rng.uniform(-jitter, jitter));
        cam.y = round9((c / cols) * pitch + rng.uniform(-jitter, jitter));
        cam.view_radius = params.view_radius_m;
        s.cameras.push_back(cam);
    }

    std::vector<std::vector<double>> prototypes(params.n_identities);
    for (auto& p : prototypes) p = detail::unit_gaussian_vec(rng, params.d_raw);
    std::vector<std::vector<double>> camera_bias(params.n_cameras);
    for (auto& b : camera_bias) {
        b = detail::unit_gaussian_vec(rng, params.d_raw);
        for (auto& x : b) x *= params.camera_bias;
    }

    // Waypoint path per identity: approach the first camera from outside,
    // pass near a random sequence of camera neighborhoods, walk away.
    std::vector<std::vector<detail::Waypoint>> paths(params.n_identities);
    for (int ident = 0; ident < params.n_identities; ++ident) {
        // Visit sequence: successive shuffled blocks over all cameras,
        // truncated to n_visits.  A walk of >= n_cameras visits covers every
        // camera; shorter walks cover a random subset.  Consecutive repeats
        // across block boundaries are swapped away.
        const int n_visits = static_cast<int>(rng.uniform_int(params.min_visits, params.max_visits));
        std::vector<int> visit;
        visit.reserve(n_visits);
        std::vector<int> block(params.n_cameras);
        for (int c = 0; c < params.n_cameras; ++c) block[c] = c;
        while (static_cast<int>(visit.size()) < n_visits) {
            rng.shuffle(block);
            if (!visit.empty() && params.n_cameras > 1 && block.front() == visit.back())
                std::swap(block[0], block[1]);
            for (int c : block) {
                if (static_cast<int>(visit.size()) == n_visits) break;
                visit.push_back(c);
            }
        }

        auto offset_point = [&](const Camera& cam, double r_lo, double r_hi) {
            const double ang = rng.uniform(0.0, 2.0 * M_PI);
            const double r = rng.uniform(r_lo, r_hi);
            return std::pair<double, double>{cam.x + r * std::cos(ang), cam.y + r * std::sin(ang)};
        };

        std::vector<std::pair<double, double>> points;
        points.push_back(offset_point(s.cameras[visit.front()], 60.0, 90.0));
        for (int c : visit) points.push_back(offset_point(s.cameras[c], 0.0, 0.5 * params.view_radius_m));
        points.push_back(offset_point(s.cameras[visit.back()], 60.0, 90.0));

        auto& path = paths[ident];
        double t = rng.uniform(0.0, params.start_stagger_s);
        path.push_back({t, points[0].first, points[0].second});
        for (std::size_t k = 1; k < points.size(); ++k) {
            const double dx = points[k].first - points[k - 1].first;
            const double dy = points[k].second - points[k - 1].second;
            t += std::hypot(dx, dy) / params.walk_speed_mps;
            path.push_back({t, points[k].first, points[k].second});
        }
    }

    // Emit one video per contiguous stretch inside a camera's view disc.
    const double scan_dt = 0.1;
    for (int ident = 0; ident < params.n_identities; ++ident) {
        const auto& path = paths[ident];
        const double t0 = path.front().t;
        const double t1 = path.back().t;
        const int n_steps = static_cast<int>(std::floor((t1 - t0) / scan_dt));
        for (const auto& cam : s.cameras) {
            std::optional<double> run_start;
            double run_end = 0.0;
            auto flush = [&]() {
                if (!run_start) return;
                VideoSequence v;
                v.camera_id = cam.id;
                v.start_s = round9(*run_start);
                v.end_s = round9(run_end);
                v.gt_identity = ident;

                std::vector<double> d(params.d_raw);
                if (rng.uniform() < params.corrupt_prob) {
                    for (int i = 0; i < params.d_raw; ++i)
                        d[i] = params.corrupt_alpha * prototypes[ident][i] +
                               params.sigma_corrupt * rng.gaussian();
                } else {
                    for (int i = 0; i < params.d_raw; ++i)
                        d[i] = prototypes[ident][i] + camera_bias[cam.id][i] +
                               params.sigma_app * rng.gaussian();
                }
                double norm = 0.0;
                for (double x : d) norm += x * x;
                norm = std::sqrt(norm);
                for (auto& x : d) x = round9(x / norm);
                v.descriptor = std::move(d);
                s.videos.push_back(std::move(v));
                run_start.reset();
            };
            for (int step = 0; step <= n_steps; ++step) {
                const double t = t0 + step * scan_dt;
                const auto [px, py] = detail::path_at(path, t);
                const bool inside = std::hypot(px - cam.x, py - cam.y) < cam.view_radius;
                if (inside) {
                    if (!run_start) run_start = t;
                    run_end = t;
                } else {
                    flush();
                }
            }
            flush();
        }
    }
    std::sort(s.videos.begin(), s.videos.end(), [](const VideoSequence& a, const VideoSequence& b) {
        return std::tie(a.start_s, a.camera_id, a.gt_identity) <
               std::tie(b.start_s, b.camera_id, b.gt_identity);
    });
    for (std::size_t i = 0; i < s.videos.size(); ++i) s.videos[i].id = static_cast<int>(i);

    // Phone owners: floor(phone_fraction * n_identities) identities, chosen
    // by a seeded shuffle, trajectories ordered by identity.
    const int n_owners = static_cast<int>(std::floor(params.phone_fraction * params.n_identities));
    std::vector<int> ids(params.n_identities);
    for (int i = 0; i < params.n_identities; ++i) ids[i] = i;
    rng.shuffle(ids);
    std::vector<int> owners(ids.begin(), ids.begin() + n_owners);
    std::sort(owners.begin(), owners.end());

    std::vector<int> traj_identity;
    for (int ident : owners) {
        const auto& path = paths[ident];
        WirelessTrajectory traj;
        traj.id = static_cast<int>(s.trajectories.size());
        char mac[18];
        std::snprintf(mac, sizeof(mac), "%02x:%02x:%02x:%02x:%02x:%02x",
                      unsigned(rng.uniform_int(0, 255)), unsigned(rng.uniform_int(0, 255)),
                      unsigned(rng.uniform_int(0, 255)), unsigned(rng.uniform_int(0, 255)),
                      unsigned(rng.uniform_int(0, 255)), unsigned(rng.uniform_int(0, 255)));
        traj.signal_id = mac;
        const double t0 = path.front().t;
        const double t1 = path.back().t;
        for (int k = 0;; ++k) {
            const double t = t0 + k * params.wireless_period_s;
            if (t > t1) break;
            const auto [px, py] = detail::path_at(path, t);
            TrajectorySample smp;
            smp.t_s = round9(t);
            smp.x_m = round9(px + params.sigma_pos_m * rng.gaussian());
            smp.y_m = round9(py + params.sigma_pos_m * rng.gaussian());
            traj.samples.push_back(smp);
        }
        s.trajectories.push_back(std::move(traj));
        traj_identity.push_back(ident);
    }
    s.trajectory_identity = std::move(traj_identity);
    return s;
}

// Removes every ground-truth field; the pipeline must run on the result.
inline Scenario strip_ground_truth(Scenario s) {
    for (auto& v : s.videos) v.gt_identity.reset();
    s.trajectory_identity.reset();
    return s;
}

// ---------------------------------------------------------------------------
// Scenario document (JSON).  Top-level keys: format_version, seed, params,
// cameras, videos, trajectories, eval_only.  All floats carry at most
// 9 significant digits.

namespace detail {

using json = nlohmann::ordered_json;

template <typename T>
T get_field(const nlohmann::ordered_json& j, const char* key, const std::string& where) {
    if (!j.contains(key))
        throw ParseError("scenario document: missing field '" + std::string(key) + "' in " + where);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scenario document: bad field '" + std::string(key) + "' in " + where +
                         ": " + e.what());
    }
}

inline json params_to_json(const GenerationParams& p) {
    json j;
    j["n_cameras"] = p.n_cameras;
    j["n_identities"] = p.n_identities;
    j["phone_fraction"] = p.phone_fraction;
    j["view_radius_m"] = p.view_radius_m;
    j["min_camera_spacing_m"] = p.min_camera_spacing_m;
    j["wireless_period_s"] = p.wireless_period_s;
    j["sigma_pos_m"] = p.sigma_pos_m;
    j["d_raw"] = p.d_raw;
    j["sigma_app"] = p.sigma_app;
    j["corrupt_prob"] = p.corrupt_prob;
    j["corrupt_alpha"] = p.corrupt_alpha;
    j["sigma_corrupt"] = p.sigma_corrupt;
    j["camera_bias"] = p.camera_bias;
    j["min_visits"] = p.min_visits;
    j["max_visits"] = p.max_visits;
    j["walk_speed_mps"] = p.walk_speed_mps;
    j["start_stagger_s"] = p.start_stagger_s;
    return j;
}

inline GenerationParams params_from_json(const json& j) {
    GenerationParams p;
    p.n_cameras = get_field<int>(j, "n_cameras", "params");
    p.n_identities = get_field<int>(j, "n_identities", "params");
    p.phone_fraction = get_field<double>(j, "phone_fraction", "params");
    p.view_radius_m = get_field<double>(j, "view_radius_m", "params");
    p.min_camera_spacing_m = get_field<double>(j, "min_camera_spacing_m", "params");
    p.wireless_period_s = get_field<double>(j, "wireless_period_s", "params");
    p.sigma_pos_m = get_field<double>(j, "sigma_pos_m", "params");
    p.d_raw = get_field<int>(j, "d_raw", "params");
    p.sigma_app = get_field<double>(j, "sigma_app", "params");
    p.corrupt_prob = get_field<double>(j, "corrupt_prob", "params");
    p.corrupt_alpha = get_field<double>(j, "corrupt_alpha", "params");
    p.sigma_corrupt = get_field<double>(j, "sigma_corrupt", "params");
    p.camera_bias = get_field<double>(j, "camera_bias", "params");
    p.min_visits = get_field<int>(j, "min_visits", "params");
    p.max_visits = get_field<int>(j, "max_visits", "params");
    p.walk_speed_mps = get_field<double>(j, "walk_speed_mps", "params");
    p.start_stagger_s = get_field<double>(j, "start_stagger_s", "params");
    return p;
}

} // namespace detail

inline nlohmann::ordered_json scenario_to_json(const Scenario& s) {
    using detail::json;
    json j;
    j["format_version"] = 1;
    j["seed"] = s.seed;
    j["params"] = detail::params_to_json(s.params);

    j["cameras"] = json::array();
    for (const auto& c : s.cameras)
        j["cameras"].push_back({{"id", c.id}, {"x", c.x}, {"y", c.y}, {"view_radius", c.view_radius}});

    j["videos"] = json::array();
    for (const auto& v : s.videos)
        j["videos"].push_back({{"id", v.id},
                               {"camera_id", v.camera_id},
                               {"start_s", v.start_s},
                               {"end_s", v.end_s},
                               {"descriptor", v.descriptor}});

    j["trajectories"] = json::array();
    for (const auto& t : s.trajectories) {
        json samples = json::array();
        for (const auto& smp : t.samples) samples.push_back({smp.t_s, smp.x_m, smp.y_m});
        j["trajectories"].push_back(
            {{"id", t.id}, {"signal_id", t.signal_id}, {"samples", std::move(samples)}});
    }

    if (s.has_ground_truth() && !s.videos.empty()) {
        json eval;
        json vid_ident = json::array();
        for (const auto& v : s.videos) vid_ident.push_back(*v.gt_identity);
        eval["video_identity"] = std::move(vid_ident);
        if (s.trajectory_identity) eval["trajectory_identity"] = *s.trajectory_identity;
        j["eval_only"] = std::move(eval);
    }
    return j;
}

inline Scenario scenario_from_json(const nlohmann::ordered_json& j) {
    using detail::get_field;
    Scenario s;
    const int version = get_field<int>(j, "format_version", "document root");
    if (version != 1)
        throw ParseError("scenario document: unsupported format_version " + std::to_string(version));
    s.seed = get_field<std::uint64_t>(j, "seed", "document root");
    if (!j.contains("params")) throw ParseError("scenario document: missing field 'params'");
    s.params = detail::params_from_json(j.at("params"));

    for (const auto& [idx, jc] : j.at("cameras").items()) {
        Camera c;
        c.id = get_field<int>(jc, "id", "cameras[" + idx + "]");
        c.x = get_field<double>(jc, "x", "cameras[" + idx + "]");
        c.y = get_field<double>(jc, "y", "cameras[" + idx + "]");
        c.view_radius = get_field<double>(jc, "view_radius", "cameras[" + idx + "]");
        if (c.view_radius <= 0.0)
            throw ParseError("scenario document: cameras[" + idx + "] has non-positive view_radius");
        if (c.id != static_cast<int>(s.cameras.size()))
            throw ParseError("scenario document: camera ids must be dense and ordered, got id " +
                             std::to_string(c.id) + " at index " + idx);
        s.cameras.push_back(c);
    }

    for (const auto& [idx, jv] : j.at("videos").items()) {
        VideoSequence v;
        const std::string where = "videos[" + idx + "]";
        v.id = get_field<int>(jv, "id", where);
        v.camera_id = get_field<int>(jv, "camera_id", where);
        v.start_s = get_field<double>(jv, "start_s", where);
        v.end_s = get_field<double>(jv, "end_s", where);
        v.descriptor = get_field<std::vector<double>>(jv, "descriptor", where);
        if (v.id != static_cast<int>(s.videos.size()))
            throw ParseError("scenario document: video ids must be dense and ordered, got id " +
                             std::to_string(v.id) + " at index " + idx);
        if (v.camera_id < 0 || v.camera_id >= static_cast<int>(s.cameras.size()))
            throw IntegrityError("scenario document: " + where + " references missing camera_id " +
                                 std::to_string(v.camera_id));
        if (v.end_s < v.start_s)
            throw ParseError("scenario document: " + where + " has end_s < start_s");
        double norm = 0.0;
        for (double x : v.descriptor) norm += x * x;
        if (std::abs(std::sqrt(norm) - 1.0) > 1e-6)
            throw ParseError("scenario document: " + where + " descriptor is not unit norm");
        s.videos.push_back(std::move(v));
    }

    for (const auto& [idx, jt] : j.at("trajectories").items()) {
        WirelessTrajectory t;
        const std::string where = "trajectories[" + idx + "]";
        t.id = get_field<int>(jt, "id", where);
        t.signal_id = get_field<std::string>(jt, "signal_id", where);
        if (t.id != static_cast<int>(s.trajectories.size()))
            throw ParseError("scenario document: trajectory ids must be dense and ordered, got id " +
                             std::to_string(t.id) + " at index " + idx);
        const auto rows = get_field<std::vector<std::vector<double>>>(jt, "samples", where);
        for (const auto& r : rows) {
            if (r.size() != 3)
                throw ParseError("scenario document: " + where + " sample is not [t, x, y]");
            if (!t.samples.empty() && r[0] <= t.samples.back().t_s)
                throw ParseError("scenario document: " + where + " sample times not strictly increasing");
            t.samples.push_back({r[0], r[1], r[2]});
        }
        if (t.samples.size() < 2)
            throw ParseError("scenario document: " + where + " needs at least 2 samples");
        s.trajectories.push_back(std::move(t));
    }

    if (j.contains("eval_only")) {
        const auto& je = j.at("eval_only");
        const auto vid_ident = get_field<std::vector<int>>(je, "video_identity", "eval_only");
        if (vid_ident.size() != s.videos.size())
            throw ParseError("scenario document: eval_only.video_identity length mismatch");
        for (std::size_t i = 0; i < vid_ident.size(); ++i) s.videos[i].gt_identity = vid_ident[i];
        if (je.contains("trajectory_identity")) {
            auto ti = get_field<std::vector<int>>(je, "trajectory_identity", "eval_only");
            if (ti.size() != s.trajectories.size())
                throw ParseError("scenario document: eval_only.trajectory_identity length mismatch");
            s.trajectory_identity = std::move(ti);
        } else if (!s.trajectories.empty()) {
            throw ParseError("scenario document: eval_only present without trajectory_identity");
        } else {
            s.trajectory_identity = std::vector<int>{};
        }
    }
    return s;
}

inline void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << scenario_to_json(s).dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("scenario document " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

} // namespace umtf
