#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsa/core/error.hpp"

namespace dsa::analyze {

enum class Population { All, Dead, Surviving };

inline std::string population_name(Population p) {
    switch (p) {
        case Population::All: return "all";
        case Population::Dead: return "dead";
        case Population::Surviving: return "surviving";
    }
    return "?";
}

// Consecutive-step cluster transitions counted within patients and pooled
// over the selected population. Percentages are normalized by the grand
// total (the table format of the reference workflow); a row-stochastic view
// is emitted alongside since Markov transition probabilities conventionally
// mean row normalization.
struct TransitionTable {
    int k = 0;
    Population population = Population::All;
    std::vector<long> counts;           // k x k row-major, before -> after
    std::vector<double> percent;        // 100 * count / grand_total
    std::vector<double> row_stochastic; // per-row normalization; zero rows stay zero
    long grand_total = 0;
    bool empty = false;

    long count_at(int from, int to) const {
        return counts[static_cast<std::size_t>(from) * k + to];
    }
    double percent_at(int from, int to) const {
        return percent[static_cast<std::size_t>(from) * k + to];
    }
};

inline TransitionTable transition_table(const std::vector<std::vector<int>>& labels_per_patient,
                                        const std::vector<std::uint8_t>& death_flags, int k,
                                        Population population) {
    require(k >= 1, "transition_table: k must be positive");
    require(labels_per_patient.size() == death_flags.size(),
            "transition_table: death flag count mismatch");
    TransitionTable out;
    out.k = k;
    out.population = population;
    out.counts.assign(static_cast<std::size_t>(k) * k, 0);
    for (std::size_t p = 0; p < labels_per_patient.size(); ++p) {
        if (population == Population::Dead && !death_flags[p]) continue;
        if (population == Population::Surviving && death_flags[p]) continue;
        const auto& labels = labels_per_patient[p];
        for (std::size_t t = 1; t < labels.size(); ++t) {
            const int a = labels[t - 1];
            const int b = labels[t];
            require(a >= 0 && a < k && b >= 0 && b < k, "transition_table: label out of range");
            out.counts[static_cast<std::size_t>(a) * k + b]++;
            out.grand_total++;
        }
    }
    out.percent.assign(out.counts.size(), 0.0);
    out.row_stochastic.assign(out.counts.size(), 0.0);
    out.empty = out.grand_total == 0;
    if (!out.empty)
        for (std::size_t i = 0; i < out.counts.size(); ++i)
            out.percent[i] = 100.0 * static_cast<double>(out.counts[i]) /
                             static_cast<double>(out.grand_total);
    for (int a = 0; a < k; ++a) {
        long row = 0;
        for (int b = 0; b < k; ++b) row += out.count_at(a, b);
        if (row == 0) continue;
        for (int b = 0; b < k; ++b)
            out.row_stochastic[static_cast<std::size_t>(a) * k + b] =
                static_cast<double>(out.count_at(a, b)) / static_cast<double>(row);
    }
    return out;
}

}  // namespace dsa::analyze
