#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsa/core/error.hpp"

namespace dsa {

enum class ItemKind { Lab, Vital, Anthro, Gender };

inline std::string item_kind_name(ItemKind k) {
    switch (k) {
        case ItemKind::Lab: return "lab";
        case ItemKind::Vital: return "vital";
        case ItemKind::Anthro: return "anthro";
        case ItemKind::Gender: return "gender";
    }
    return "?";
}

inline ItemKind item_kind_from_name(const std::string& s) {
    if (s == "lab") return ItemKind::Lab;
    if (s == "vital") return ItemKind::Vital;
    if (s == "anthro") return ItemKind::Anthro;
    if (s == "gender") return ItemKind::Gender;
    throw DataError("unknown item kind: " + s);
}

// Catalog entry for one input item. Labs carry a reference range; other
// kinds do not participate in abnormality encoding.
struct ItemSpec {
    std::string name;
    ItemKind kind = ItemKind::Lab;
    double ref_low = 0.0;
    double ref_high = 0.0;
    std::string units;

    bool has_range() const { return kind == ItemKind::Lab; }
};

// One dated raw measurement.
struct RawObservation {
    long date = 0;  // day index; total order after ingestion
    std::string item;
    double value = 0.0;
};

// One patient's raw record: dated entries plus static fields.
struct RawRecordSet {
    std::string patient_id;
    std::vector<RawObservation> observations;
    int gender = 0;  // 1 male, 0 female
    bool death_flag = false;
    std::vector<std::string> drug_tags;
};

// A raw cohort as ingested from the three delimited-text tables.
struct RawCohort {
    std::vector<RawRecordSet> patients;
    std::vector<ItemSpec> items;
};

// Signal codes for abnormality: +1 abnormal-high, 0 normal, -1 abnormal-low.
// kSignalMissing marks unobserved cells and non-lab items.
using SignalCode = std::int8_t;
inline constexpr SignalCode kSignalMissing = 127;

// One patient's model-ready item x time matrix with mask and codes.
struct ObservationSeries {
    std::string patient_id;
    int steps = 0;  // T
    int dims = 0;   // D
    std::vector<double> values;      // T x D, row-major, in [0,1] for cohorts
    std::vector<std::uint8_t> mask;  // T x D; 1 = observed
    std::vector<SignalCode> signal;  // T x D abnormality signal codes
    bool death_flag = false;
    std::vector<std::string> drug_tags;

    double value_at(int t, int d) const { return values[static_cast<std::size_t>(t) * dims + d]; }
    std::uint8_t mask_at(int t, int d) const { return mask[static_cast<std::size_t>(t) * dims + d]; }
    SignalCode signal_at(int t, int d) const { return signal[static_cast<std::size_t>(t) * dims + d]; }

    void validate() const {
        const std::size_t n = static_cast<std::size_t>(steps) * dims;
        require_shape(steps >= 1 && dims >= 1, "ObservationSeries: empty series");
        require_shape(values.size() == n && mask.size() == n && signal.size() == n,
                      "ObservationSeries: buffer sizes inconsistent with steps x dims");
        for (std::size_t i = 0; i < n; ++i) {
            require(mask[i] == 0 || mask[i] == 1, "ObservationSeries: mask entries must be 0/1");
            if (mask[i] == 0)
                require(signal[i] == kSignalMissing,
                        "ObservationSeries: masked cell carries a signal code");
        }
    }
};

// Model-ready cohort: per-patient series plus the shared item catalog.
struct CohortTensor {
    std::vector<ObservationSeries> patients;
    std::vector<ItemSpec> items;
    double missing_rate = 0.0;

    int dims() const { return static_cast<int>(items.size()); }

    std::vector<int> lab_indices() const {
        std::vector<int> idx;
        for (int d = 0; d < dims(); ++d)
            if (items[static_cast<std::size_t>(d)].kind == ItemKind::Lab) idx.push_back(d);
        return idx;
    }
};

// Per-patient posterior trajectory from the inference network (or a baseline
// projection): T x latent_dim means and variances.
struct LatentTrajectory {
    std::string patient_id;
    int steps = 0;
    int latent_dim = 0;
    std::vector<double> means;      // T x k
    std::vector<double> variances;  // T x k

    double mean_at(int t, int d) const { return means[static_cast<std::size_t>(t) * latent_dim + d]; }
    double var_at(int t, int d) const { return variances[static_cast<std::size_t>(t) * latent_dim + d]; }

    std::vector<double> step_mean(int t) const {
        return {means.begin() + static_cast<std::ptrdiff_t>(t) * latent_dim,
                means.begin() + static_cast<std::ptrdiff_t>(t + 1) * latent_dim};
    }
};

}  // namespace dsa
