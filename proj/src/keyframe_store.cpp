#include "kfr/keyframe_store.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "kfr/errors.hpp"

namespace kfr {

namespace {

void append_kv(std::string& out, const char* key, const std::string& value) {
    out += ' ';
    out += key;
    out += '=';
    out += value;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_pairs(const std::vector<std::pair<std::uint64_t, double>>& pairs) {
    if (pairs.empty()) return "-";
    std::string s;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(pairs[i].first);
        s += ':';
        s += fmt_double(pairs[i].second);
    }
    return s;
}

}  // namespace

std::string serialize_trace(const PolicyTrace& trace) {
    std::string out;
    for (const TraceEvent& ev : trace) {
        if (ev.kind == TraceEvent::Kind::Insert) {
            out += "event=insert";
            append_kv(out, "frame", std::to_string(ev.frame));
            append_kv(out, "arrival", std::to_string(ev.arrival));
            append_kv(out, "added", ev.added ? "1" : "0");
            append_kv(out, "evicted",
                      ev.evicted_arrival ? std::to_string(*ev.evicted_arrival) : "-");
        } else {
            out += "event=select";
            append_kv(out, "frame", std::to_string(ev.frame));
            append_kv(out, "selected", std::to_string(ev.selected_arrival));
            append_kv(out, "distance", fmt_double(ev.distance));
            append_kv(out, "distances", fmt_pairs(ev.distances));
        }
        append_kv(out, "counts", fmt_pairs(ev.counts));
        out += '\n';
    }
    return out;
}

KeyframeStore::KeyframeStore(std::size_t max_cardinality, Policy policy)
    : max_cardinality_(max_cardinality), policy_(policy) {
    if (max_cardinality_ == 0)
        throw Error("KeyframeStore: max_cardinality must be positive");
}

void KeyframeStore::snapshot(TraceEvent& ev) const {
    ev.counts.clear();
    ev.counts.reserve(entries_.size());
    for (const KeyframeEntry& e : entries_)
        ev.counts.emplace_back(e.arrival_index, e.use_count);
}

InsertReport KeyframeStore::insert_keyframe(ImageBuffer image, LandmarkSet lms,
                                            std::int64_t frame) {
    InsertReport report;
    KeyframeEntry entry;
    entry.image = std::move(image);
    entry.landmarks = std::move(lms);
    entry.arrival_index = next_arrival_++;

    if (policy_ == Policy::LfuDecay) {
        // Exponential decay on every arrival, applied before any eviction.
        for (KeyframeEntry& e : entries_) e.use_count *= 0.5;
        if (entries_.size() == max_cardinality_) {
            std::size_t victim = 0;
            for (std::size_t i = 1; i < entries_.size(); ++i) {
                if (entries_[i].use_count < entries_[victim].use_count) victim = i;
            }
            report.evicted_arrival = entries_[victim].arrival_index;
            entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
        }
        entries_.push_back(std::move(entry));
        report.added = true;
    } else {
        if (entries_.size() < max_cardinality_) {
            entries_.push_back(std::move(entry));
            report.added = true;
        } else {
            // Among entries plus the newcomer, the size-K subset with maximal
            // total pairwise distance excludes the candidate whose summed
            // distance to the others is minimal.
            std::vector<const KeyframeEntry*> cand;
            cand.reserve(entries_.size() + 1);
            for (const KeyframeEntry& e : entries_) cand.push_back(&e);
            cand.push_back(&entry);
            const std::size_t m = cand.size();
            std::vector<double> row_sum(m, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = i + 1; j < m; ++j) {
                    const double d = landmark_distance(cand[i]->landmarks,
                                                       cand[j]->landmarks);
                    row_sum[i] += d;
                    row_sum[j] += d;
                }
            }
            std::size_t excluded = 0;
            for (std::size_t i = 1; i < m; ++i) {
                if (row_sum[i] < row_sum[excluded] ||
                    (row_sum[i] == row_sum[excluded] &&
                     cand[i]->arrival_index < cand[excluded]->arrival_index))
                    excluded = i;
            }
            if (excluded == m - 1) {
                report.added = false;  // newcomer rejected
            } else {
                report.added = true;
                report.evicted_arrival = entries_[excluded].arrival_index;
                entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(excluded));
                entries_.push_back(std::move(entry));
            }
        }
    }

    TraceEvent ev;
    ev.kind = TraceEvent::Kind::Insert;
    ev.frame = frame;
    ev.arrival = next_arrival_ - 1;
    ev.added = report.added;
    ev.evicted_arrival = report.evicted_arrival;
    snapshot(ev);
    trace_.push_back(std::move(ev));
    return report;
}

std::pair<const KeyframeEntry*, std::size_t> KeyframeStore::select_reference(
    const LandmarkSet& degraded_lms, std::int64_t frame) {
    if (entries_.empty()) throw EmptyStore("select_reference: no keyframes available");

    TraceEvent ev;
    ev.kind = TraceEvent::Kind::Select;
    ev.frame = frame;
    ev.distances.reserve(entries_.size());

    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const double d = landmark_distance(entries_[i].landmarks, degraded_lms);
        ev.distances.emplace_back(entries_[i].arrival_index, d);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
        // ties keep the earlier arrival, which the scan order guarantees
        // only when arrivals are stored in order; enforce explicitly
        else if (d == best_d &&
                 entries_[i].arrival_index < entries_[best].arrival_index) {
            best = i;
        }
    }
    if (policy_ == Policy::LfuDecay) entries_[best].use_count += 1.0;

    ev.selected_arrival = entries_[best].arrival_index;
    ev.distance = best_d;
    snapshot(ev);
    trace_.push_back(std::move(ev));
    return {&entries_[best], best};
}

}  // namespace kfr
