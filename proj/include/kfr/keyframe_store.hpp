#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kfr/geometry.hpp"

namespace kfr {

enum class Policy { LfuDecay, MaxDistance };

struct KeyframeEntry {
    ImageBuffer image;
    LandmarkSet landmarks;
    double use_count = 0.0;
    std::uint64_t arrival_index = 0;
};

struct InsertReport {
    bool added = false;
    std::optional<std::uint64_t> evicted_arrival;
};

struct TraceEvent {
    enum class Kind { Insert, Select };

    Kind kind = Kind::Insert;
    std::int64_t frame = 0;
    // insert fields
    bool added = false;
    std::optional<std::uint64_t> evicted_arrival;
    std::uint64_t arrival = 0;
    // select fields
    std::uint64_t selected_arrival = 0;
    double distance = 0.0;
    std::vector<std::pair<std::uint64_t, double>> distances;  // (arrival, d) per entry
    // post-operation state snapshot: (arrival, use_count) per entry
    std::vector<std::pair<std::uint64_t, double>> counts;
};

using PolicyTrace = std::vector<TraceEvent>;

// One event per line: kind, frame index, distances, use_count snapshot.
std::string serialize_trace(const PolicyTrace& trace);

// Bounded set of reference keyframes. Single-writer: callers serialize
// insert/select; traces may be read once a mutation has completed.
class KeyframeStore {
public:
    KeyframeStore(std::size_t max_cardinality, Policy policy);

    // LfuDecay: halves every use_count, then appends or evicts the minimum.
    // MaxDistance: keeps the max_cardinality-subset of entries+newcomer that
    // maximizes total pairwise landmark distance (newcomer may be rejected).
    InsertReport insert_keyframe(ImageBuffer image, LandmarkSet lms, std::int64_t frame);

    // Entry minimizing landmark_distance to degraded_lms, ties broken by
    // earliest arrival. Increments the winner's use_count under LfuDecay.
    std::pair<const KeyframeEntry*, std::size_t> select_reference(
        const LandmarkSet& degraded_lms, std::int64_t frame);

    const std::vector<KeyframeEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t max_cardinality() const { return max_cardinality_; }
    Policy policy() const { return policy_; }

    PolicyTrace export_trace() const { return trace_; }

private:
    void snapshot(TraceEvent& ev) const;

    std::size_t max_cardinality_;
    Policy policy_;
    std::vector<KeyframeEntry> entries_;
    std::uint64_t next_arrival_ = 0;
    PolicyTrace trace_;
};

}  // namespace kfr
