#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/data/cohort.hpp"

namespace dsa::analyze {

enum class OutcomeLabel { Dangerous, Intermediate, Stable };

inline std::string outcome_label_name(OutcomeLabel l) {
    switch (l) {
        case OutcomeLabel::Dangerous: return "dangerous";
        case OutcomeLabel::Intermediate: return "intermediate";
        case OutcomeLabel::Stable: return "stable";
    }
    return "?";
}

// Dead/surviving endpoint counts per cluster (the 2 x k layout of the
// reference endpoint table).
struct EndpointCounts {
    std::vector<long> dead;
    std::vector<long> surviving;

    long total(int cluster) const {
        return dead[static_cast<std::size_t>(cluster)] +
               surviving[static_cast<std::size_t>(cluster)];
    }
};

struct OutcomeLabeling {
    std::vector<OutcomeLabel> labels;  // per cluster
    EndpointCounts endpoints;
    int dangerous_cluster = -1;
    int stable_cluster = -1;
    bool tie = false;         // a tie was broken by cluster index
    bool degenerate = false;  // e.g. no dead endpoints at all
};

// The cluster where dead endpoints concentrate is dangerous; the one where
// surviving endpoints concentrate is stable; everything else intermediate.
// Fractions are within-cluster: dead / (dead + surviving).
inline OutcomeLabeling label_clusters_by_outcome(const std::vector<int>& endpoint_clusters,
                                                 const std::vector<std::uint8_t>& endpoint_death,
                                                 int k) {
    require(k >= 1, "label_clusters_by_outcome: k must be positive");
    require(endpoint_clusters.size() == endpoint_death.size(),
            "label_clusters_by_outcome: endpoint count mismatch");
    require(!endpoint_clusters.empty(), "label_clusters_by_outcome: no endpoints");

    OutcomeLabeling out;
    out.endpoints.dead.assign(static_cast<std::size_t>(k), 0);
    out.endpoints.surviving.assign(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < endpoint_clusters.size(); ++i) {
        const int c = endpoint_clusters[i];
        require(c >= 0 && c < k, "label_clusters_by_outcome: cluster label out of range");
        if (endpoint_death[i])
            out.endpoints.dead[static_cast<std::size_t>(c)]++;
        else
            out.endpoints.surviving[static_cast<std::size_t>(c)]++;
    }

    auto dead_fraction = [&](int c) {
        const long total = out.endpoints.total(c);
        return total == 0 ? -1.0
                          : static_cast<double>(out.endpoints.dead[static_cast<std::size_t>(c)]) /
                                static_cast<double>(total);
    };

    int dangerous = 0;
    for (int c = 1; c < k; ++c) {
        if (dead_fraction(c) > dead_fraction(dangerous)) dangerous = c;
        else if (dead_fraction(c) == dead_fraction(dangerous)) out.tie = true;
    }
    int stable = -1;
    for (int c = 0; c < k; ++c) {
        if (c == dangerous) continue;
        if (stable < 0 || dead_fraction(c) < dead_fraction(stable)) stable = c;
        else if (dead_fraction(c) == dead_fraction(stable)) out.tie = true;
    }
    if (stable < 0) stable = dangerous;  // k == 1

    long total_dead = 0;
    for (long d : out.endpoints.dead) total_dead += d;
    out.degenerate = total_dead == 0 || total_dead == static_cast<long>(endpoint_clusters.size());

    out.dangerous_cluster = dangerous;
    out.stable_cluster = stable;
    out.labels.assign(static_cast<std::size_t>(k), OutcomeLabel::Intermediate);
    out.labels[static_cast<std::size_t>(dangerous)] = OutcomeLabel::Dangerous;
    if (stable != dangerous) out.labels[static_cast<std::size_t>(stable)] = OutcomeLabel::Stable;
    return out;
}

// Mean abnormality signal per (cluster, lab item) over observed cells.
struct SignalEntry {
    int item = 0;
    std::string item_name;
    double mean_signal = 0.0;  // in [-1, 1]
    long observed = 0;
};

struct ClusterSignals {
    int cluster = 0;
    std::vector<SignalEntry> ranked;    // by |mean| descending
    std::vector<std::string> excluded;  // items with no observed points in this cluster
};

struct SignalReport {
    std::vector<ClusterSignals> clusters;
    int top_n = 10;
};

// Averages the {-1, 0, +1} signal codes of observed lab cells within each
// cluster and ranks items by the magnitude of the mean. Items with zero
// observed cells in a cluster are excluded from that cluster's ranking.
inline SignalReport signal_report(const CohortTensor& cohort,
                                  const std::vector<std::vector<int>>& labels_per_patient, int k,
                                  int top_n) {
    require(labels_per_patient.size() == cohort.patients.size(),
            "signal_report: label rows do not match patients");
    const auto labs = cohort.lab_indices();
    SignalReport report;
    report.top_n = top_n;
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                          std::vector<double>(labs.size(), 0.0));
    std::vector<std::vector<long>> counts(static_cast<std::size_t>(k),
                                          std::vector<long>(labs.size(), 0));
    for (std::size_t p = 0; p < cohort.patients.size(); ++p) {
        const auto& s = cohort.patients[p];
        require(static_cast<int>(labels_per_patient[p].size()) == s.steps,
                "signal_report: label row length mismatch");
        for (int t = 0; t < s.steps; ++t) {
            const int c = labels_per_patient[p][static_cast<std::size_t>(t)];
            require(c >= 0 && c < k, "signal_report: cluster label out of range");
            for (std::size_t li = 0; li < labs.size(); ++li) {
                const int d = labs[li];
                if (!s.mask_at(t, d)) continue;
                const SignalCode code = s.signal_at(t, d);
                if (code == kSignalMissing) continue;
                sums[static_cast<std::size_t>(c)][li] += static_cast<double>(code);
                counts[static_cast<std::size_t>(c)][li]++;
            }
        }
    }
    for (int c = 0; c < k; ++c) {
        ClusterSignals cs;
        cs.cluster = c;
        for (std::size_t li = 0; li < labs.size(); ++li) {
            const auto& item = cohort.items[static_cast<std::size_t>(labs[li])];
            if (counts[static_cast<std::size_t>(c)][li] == 0) {
                cs.excluded.push_back(item.name);
                continue;
            }
            SignalEntry e;
            e.item = labs[li];
            e.item_name = item.name;
            e.observed = counts[static_cast<std::size_t>(c)][li];
            e.mean_signal = sums[static_cast<std::size_t>(c)][li] /
                            static_cast<double>(counts[static_cast<std::size_t>(c)][li]);
            cs.ranked.push_back(std::move(e));
        }
        std::sort(cs.ranked.begin(), cs.ranked.end(), [](const SignalEntry& a, const SignalEntry& b) {
            const double ma = std::fabs(a.mean_signal);
            const double mb = std::fabs(b.mean_signal);
            if (ma != mb) return ma > mb;
            return a.item < b.item;
        });
        report.clusters.push_back(std::move(cs));
    }
    return report;
}

// Per-drug view: filters patients by tag and re-uses the global clustering
// (labels are passed in; nothing is refitted).
struct SubcohortResult {
    std::string tag;
    bool empty = false;
    std::vector<int> patient_indices;
    EndpointCounts endpoints;
    SignalReport signals;
};

inline SubcohortResult subcohort_analysis(const CohortTensor& cohort,
                                          const std::vector<std::vector<int>>& labels_per_patient,
                                          int k, const std::string& drug_tag, int top_n) {
    SubcohortResult out;
    out.tag = drug_tag;
    out.endpoints.dead.assign(static_cast<std::size_t>(k), 0);
    out.endpoints.surviving.assign(static_cast<std::size_t>(k), 0);

    CohortTensor filtered;
    filtered.items = cohort.items;
    std::vector<std::vector<int>> filtered_labels;
    for (std::size_t p = 0; p < cohort.patients.size(); ++p) {
        const auto& s = cohort.patients[p];
        if (std::find(s.drug_tags.begin(), s.drug_tags.end(), drug_tag) == s.drug_tags.end())
            continue;
        out.patient_indices.push_back(static_cast<int>(p));
        const int endpoint_cluster = labels_per_patient[p].back();
        if (s.death_flag)
            out.endpoints.dead[static_cast<std::size_t>(endpoint_cluster)]++;
        else
            out.endpoints.surviving[static_cast<std::size_t>(endpoint_cluster)]++;
        filtered.patients.push_back(s);
        filtered_labels.push_back(labels_per_patient[p]);
    }
    if (filtered.patients.empty()) {
        out.empty = true;
        out.signals.top_n = top_n;
        return out;
    }
    out.signals = signal_report(filtered, filtered_labels, k, top_n);
    return out;
}

}  // namespace dsa::analyze
