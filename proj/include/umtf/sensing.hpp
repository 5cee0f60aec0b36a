#pragma once
// Wireless fragment extraction: the sub-paths of a trajectory inside a
// camera's sensing disc, with revisit marking, and the videos temporally
// related to each fragment.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "umtf/scenario.hpp"

namespace umtf {

struct WirelessFragment {
    int trajectory_id = 0;
    int fragment_index = 0; // 0..R_m-1, time-ordered within the trajectory
    int camera_id = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    int visitation_ordinal = 0; // per (trajectory, camera), counts revisits

    bool operator==(const WirelessFragment&) const = default;
};

struct RelatedVideoSet {
    int trajectory_id = 0;
    int fragment_index = 0;
    std::vector<int> video_ids; // sorted ascending
};

// One fragment per maximal run of consecutive samples with strict
// distance-to-camera < sensing_radius.  A trajectory inside two overlapping
// discs yields independent fragments per camera.
inline std::vector<WirelessFragment> extract_fragments(const WirelessTrajectory& traj,
                                                       const std::vector<Camera>& cameras,
                                                       double sensing_radius_m) {
    if (sensing_radius_m <= 0.0) throw ParamError("invalid parameter: sensing_radius_m");

    std::vector<WirelessFragment> out;
    for (const auto& cam : cameras) {
        int ordinal = 0;
        bool open = false;
        double start = 0.0, end = 0.0;
        auto close = [&]() {
            if (!open) return;
            WirelessFragment f;
            f.trajectory_id = traj.id;
            f.camera_id = cam.id;
            f.start_s = start;
            f.end_s = end;
            f.visitation_ordinal = ordinal++;
            out.push_back(f);
            open = false;
        };
        for (const auto& smp : traj.samples) {
            const bool inside = std::hypot(smp.x_m - cam.x, smp.y_m - cam.y) < sensing_radius_m;
            if (inside) {
                if (!open) {
                    open = true;
                    start = smp.t_s;
                }
                end = smp.t_s;
            } else {
                close();
            }
        }
        close();
    }
    std::sort(out.begin(), out.end(), [](const WirelessFragment& a, const WirelessFragment& b) {
        return std::tie(a.start_s, a.camera_id, a.visitation_ordinal) <
               std::tie(b.start_s, b.camera_id, b.visitation_ordinal);
    });
    for (std::size_t r = 0; r < out.size(); ++r) out[r].fragment_index = static_cast<int>(r);
    return out;
}

// Videos at the fragment's camera whose interval overlaps the fragment's
// (closed intervals: max of starts <= min of ends).
inline RelatedVideoSet related_videos(const WirelessFragment& frag,
                                      const std::vector<VideoSequence>& videos) {
    RelatedVideoSet set;
    set.trajectory_id = frag.trajectory_id;
    set.fragment_index = frag.fragment_index;
    for (const auto& v : videos) {
        if (v.camera_id != frag.camera_id) continue;
        if (std::max(v.start_s, frag.start_s) <= std::min(v.end_s, frag.end_s))
            set.video_ids.push_back(v.id);
    }
    return set;
}

// Fragments and related sets for every trajectory, indexed by trajectory id.
struct SensingResult {
    std::vector<std::vector<WirelessFragment>> fragments;  // [m][r]
    std::vector<std::vector<RelatedVideoSet>> related;     // [m][r]
    double sensing_radius_m = 0.0;

    int total_fragments() const {
        int n = 0;
        for (const auto& f : fragments) n += static_cast<int>(f.size());
        return n;
    }
};

inline SensingResult run_sensing(const Scenario& s, double sensing_radius_m) {
    SensingResult res;
    res.sensing_radius_m = sensing_radius_m;
    res.fragments.reserve(s.trajectories.size());
    for (const auto& traj : s.trajectories) {
        auto frags = extract_fragments(traj, s.cameras, sensing_radius_m);
        std::vector<RelatedVideoSet> rel;
        rel.reserve(frags.size());
        for (const auto& f : frags) rel.push_back(related_videos(f, s.videos));
        res.fragments.push_back(std::move(frags));
        res.related.push_back(std::move(rel));
    }
    return res;
}

} // namespace umtf
