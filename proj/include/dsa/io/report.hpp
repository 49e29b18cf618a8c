#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dsa/analyze/markov.hpp"
#include "dsa/analyze/outcomes.hpp"
#include "dsa/analyze/umap.hpp"
#include "dsa/dssm/sequence.hpp"
#include "dsa/io/artifacts.hpp"
#include "dsa/io/tables.hpp"

namespace dsa::io {

// Plain-text report emission. Matrix tables carry row/column headers; every
// file starts with the provenance stamp.

inline void write_transition_table(const std::filesystem::path& path,
                                   const analyze::TransitionTable& table,
                                   const ArtifactStamp& stamp) {
    auto out = open_output(path);
    out << stamp.header();
    out << "# population=" << analyze::population_name(table.population)
        << " grand_total=" << table.grand_total << (table.empty ? " empty=true" : "") << "\n";
    auto matrix = [&](const std::string& name, auto cell) {
        out << "# section=" << name << "\nfrom\\to";
        for (int b = 0; b < table.k; ++b) out << "\tc" << b + 1;
        out << "\n";
        for (int a = 0; a < table.k; ++a) {
            out << "c" << a + 1;
            for (int b = 0; b < table.k; ++b) out << '\t' << cell(a, b);
            out << "\n";
        }
    };
    matrix("percent_of_grand_total",
           [&](int a, int b) { return format_double(table.percent_at(a, b)); });
    matrix("counts", [&](int a, int b) { return std::to_string(table.count_at(a, b)); });
    matrix("row_stochastic", [&](int a, int b) {
        return format_double(table.row_stochastic[static_cast<std::size_t>(a) * table.k + b]);
    });
}

inline void write_endpoint_counts(const std::filesystem::path& path,
                                  const analyze::OutcomeLabeling& outcome,
                                  const ArtifactStamp& stamp,
                                  const std::string& subcohort_tag = "") {
    auto out = open_output(path);
    out << stamp.header();
    if (!subcohort_tag.empty()) out << "# drug_tag=" << subcohort_tag << "\n";
    if (outcome.tie) out << "# tie_broken_by_cluster_index=true\n";
    if (outcome.degenerate) out << "# degenerate_outcome_distribution=true\n";
    const int k = static_cast<int>(outcome.labels.size());
    out << "status";
    for (int c = 0; c < k; ++c)
        out << "\tc" << c + 1 << "(" << analyze::outcome_label_name(outcome.labels[static_cast<std::size_t>(c)])
            << ")";
    out << "\n";
    out << "dead";
    for (int c = 0; c < k; ++c) out << '\t' << outcome.endpoints.dead[static_cast<std::size_t>(c)];
    out << "\nsurviving";
    for (int c = 0; c < k; ++c)
        out << '\t' << outcome.endpoints.surviving[static_cast<std::size_t>(c)];
    out << "\n";
}

// Endpoint counts for a subcohort against already-fitted global clusters.
inline void write_subcohort_endpoints(const std::filesystem::path& path,
                                      const analyze::SubcohortResult& sub,
                                      const std::vector<analyze::OutcomeLabel>& labels,
                                      const ArtifactStamp& stamp) {
    auto out = open_output(path);
    out << stamp.header() << "# drug_tag=" << sub.tag << "\n";
    if (sub.empty) {
        out << "# empty_subcohort=true\n";
        return;
    }
    const int k = static_cast<int>(labels.size());
    out << "status";
    for (int c = 0; c < k; ++c)
        out << "\tc" << c + 1 << "("
            << analyze::outcome_label_name(labels[static_cast<std::size_t>(c)]) << ")";
    out << "\n";
    out << "dead";
    for (int c = 0; c < k; ++c) out << '\t' << sub.endpoints.dead[static_cast<std::size_t>(c)];
    out << "\nsurviving";
    for (int c = 0; c < k; ++c) out << '\t' << sub.endpoints.surviving[static_cast<std::size_t>(c)];
    out << "\n";
}

inline void write_signal_report(const std::filesystem::path& path,
                                const analyze::SignalReport& report, const ArtifactStamp& stamp,
                                const std::string& subcohort_tag = "") {
    auto out = open_output(path);
    out << stamp.header();
    if (!subcohort_tag.empty()) out << "# drug_tag=" << subcohort_tag << "\n";
    out << "cluster\trank\titem\tmean_abnormality\tn_observed\n";
    for (const auto& cs : report.clusters) {
        const int limit = std::min<int>(report.top_n, static_cast<int>(cs.ranked.size()));
        for (int i = 0; i < limit; ++i)
            out << "c" << cs.cluster + 1 << '\t' << i + 1 << '\t' << cs.ranked[static_cast<std::size_t>(i)].item_name
                << '\t' << format_double(cs.ranked[static_cast<std::size_t>(i)].mean_signal) << '\t'
                << cs.ranked[static_cast<std::size_t>(i)].observed << "\n";
        for (const auto& name : cs.excluded)
            out << "# cluster c" << cs.cluster + 1 << ": item " << name
                << " has no observed points and was excluded\n";
    }
}

// Plot-ready point table: embedding coordinates, cluster labels, endpoint and
// death flags, patient and step ids. Per-patient polylines follow from
// sorting by (patient, step), which is the emission order.
inline void write_plotdata(const std::filesystem::path& path, const analyze::Embedding2D& emb,
                           const std::vector<int>& point_clusters, const CohortTensor& cohort,
                           const ArtifactStamp& stamp) {
    require_shape(static_cast<std::size_t>(emb.coords.count) == point_clusters.size(),
                  "write_plotdata: cluster labels do not match embedding points");
    auto out = open_output(path);
    out << stamp.header() << "patient_id\tstep\tx\ty\tcluster\tendpoint\tdeath_flag\n";
    for (int i = 0; i < emb.coords.count; ++i) {
        const auto& patient =
            cohort.patients[static_cast<std::size_t>(emb.patient_index[static_cast<std::size_t>(i)])];
        out << patient.patient_id << '\t' << emb.step_index[static_cast<std::size_t>(i)] << '\t'
            << format_double(emb.coords.at(i, 0)) << '\t' << format_double(emb.coords.at(i, 1))
            << '\t' << point_clusters[static_cast<std::size_t>(i)] + 1 << '\t'
            << static_cast<int>(emb.endpoint[static_cast<std::size_t>(i)]) << '\t'
            << (patient.death_flag ? 1 : 0) << "\n";
    }
}

inline void write_training_trace(const std::filesystem::path& path,
                                 const std::vector<dssm::ElboBreakdown>& trace,
                                 const ArtifactStamp& stamp) {
    auto out = open_output(path);
    out << stamp.header() << "epoch\telbo\treconstruction\tinitial_kl\ttransition_kl\n";
    for (std::size_t e = 0; e < trace.size(); ++e)
        out << e + 1 << '\t' << format_double(trace[e].total) << '\t'
            << format_double(trace[e].reconstruction) << '\t' << format_double(trace[e].initial_kl)
            << '\t' << format_double(trace[e].transition_kl) << "\n";
}

inline void write_cluster_report(const std::filesystem::path& path, const ClusterArtifact& a,
                                 const ArtifactStamp& stamp) {
    auto out = open_output(path);
    out << stamp.header();
    out << "# selected_k=" << a.model.result.k << " silhouette="
        << format_double(a.model.silhouette) << " size_cv=" << format_double(a.model.size_cv)
        << "\n";
    out << "k\tsilhouette\tsize_cv\tinertia\n";
    for (const auto& cand : a.model.candidates)
        out << cand.k << '\t' << format_double(cand.silhouette) << '\t'
            << format_double(cand.size_cv) << '\t' << format_double(cand.inertia) << "\n";
}

}  // namespace dsa::io
