#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/core/random.hpp"
#include "dsa/data/cohort.hpp"
#include "dsa/nn/activation.hpp"

namespace dsa::synth {

// Generator parameters for one item. Raw values follow
//   base + risk_loading * r_t + burden_loading * b_t + nuisance_loading * u_t
//        + patient_offset + noise
// where r is the acute risk coordinate, b the slow burden coordinate (a
// lagged trace of sustained risk), and u a nuisance coordinate. Acute
// markers load on r; chronic markers (the anemia-like trio) load on b. Drug
// boosts add to the risk loading for tagged patients, so per-drug signatures
// are a designed, recoverable property.
struct SyntheticItem {
    std::string name;
    ItemKind kind = ItemKind::Lab;
    double ref_low = 0.0;
    double ref_high = 0.0;
    double base = 0.0;
    double risk_loading = 0.0;
    double burden_loading = 0.0;
    double nuisance_loading = 0.0;
    double noise_sd = 0.1;
    double offset_sd = 0.0;  // per-patient static offset scale
    std::vector<std::pair<std::string, double>> drug_boost;
};

// Latent regimes. Switching is Markov between adjacent regimes only, so the
// stable <-> declining <-> terminal adjacency is ground truth.
enum class Regime { Stable = 0, Declining = 1, Terminal = 2 };

struct CohortSpec {
    int patients = 500;
    int min_steps = 50;
    int max_steps = 238;
    double target_missing_rate = 0.5923;
    double duplicate_day_prob = 0.03;
    // Global multiplier on per-observation noise. Higher values weaken any
    // single-row estimate of the latent coordinates while trajectory-level
    // estimates stay accurate, which is the designed advantage of the
    // time-series models.
    double noise_scale = 2.2;

    // Informative missingness: observation density rises with burden (sicker
    // patients get tested more), normalized within each patient so the
    // cohort-wide missing rate still meets the target. The mask channel is
    // visible to the masked sequence models and invisible to baselines that
    // consume imputed values only.
    double missing_burden_slope = 0.20;

    // Risk/nuisance dynamics: mean-reverting pulls toward regime levels.
    double stable_level = 0.0;
    double declining_level = 3.0;
    double terminal_level = 6.0;
    double risk_pull = 0.15;
    double risk_noise_sd = 0.80;
    double nuisance_noise_sd = 0.6;
    double nuisance_pull = 0.10;

    // Adjacent-regime switching probabilities per step.
    double p_stable_to_declining = 0.065;
    double p_declining_to_stable = 0.075;
    double p_declining_to_terminal = 0.030;
    double p_terminal_to_declining = 0.060;

    // Per-patient baseline on the burden-loaded items, collinear with the
    // burden loadings. A single observation row only ever sees
    // (burden + baseline); separating the within-patient trend from the
    // baseline requires the trajectory.
    double signature_baseline_sd = 0.4;

    // The burden coordinate trails risk with a long time constant:
    //   b_{t+1} = b_t + burden_beta * (r_t - b_t).
    double burden_beta = 0.18;

    // Logistic hazard in the burden coordinate, active in the terminal
    // regime after the warmup step; dying ends the series at the death step.
    // Tying death to sustained rather than instantaneous deterioration puts
    // the outcome signal into the trajectory, where a time-series model can
    // see far more of it than any single-row snapshot.
    double hazard_slope = 5.0;
    double hazard_center = 5.9;
    int hazard_warmup = 55;

    // Initial regime mix.
    double p_start_declining = 0.25;
    double p_start_terminal = 0.05;

    std::vector<SyntheticItem> items;
    std::vector<std::string> drug_tags = {"nivolumab",  "trastuzumab", "cisplatin",
                                          "bicalutamide", "imatinib",    "osimertinib",
                                          "afatinib",    "erlotinib"};
    double second_drug_prob = 0.15;

    // The three designed terminal-signature items (driven abnormal-low).
    std::vector<std::string> signature_items = {"rbc", "hgb", "hct"};

    void validate() const {
        require(patients >= 1, "CohortSpec: patients must be positive");
        require(min_steps >= 1 && max_steps >= min_steps, "CohortSpec: bad step bounds");
        if (!(target_missing_rate >= 0.0 && target_missing_rate < 1.0))
            throw DataError("CohortSpec: target missing rate must be in [0, 1)");
        require(!items.empty(), "CohortSpec: no items");
        require(!drug_tags.empty(), "CohortSpec: no drug tags");
    }
};

// Desk-scale catalog: 2 anthro + 1 gender + 4 vitals + 13 labs (D = 20).
// Item tuples: {name, kind, ref_low, ref_high, base, risk, burden, nuisance,
// noise_sd, offset_sd, drug boosts}.
inline std::vector<SyntheticItem> desk_scale_items() {
    std::vector<SyntheticItem> v;
    v.push_back({"height", ItemKind::Anthro, 0, 0, 162.0, 0.0, 0.0, 0.0, 0.4, 8.0, {}});
    v.push_back({"weight", ItemKind::Anthro, 0, 0, 58.0, 0.0, -0.1, 0.2, 0.8, 9.0, {}});
    v.push_back({"gender", ItemKind::Gender, 0, 0, 0, 0, 0, 0, 0, 0, {}});
    v.push_back({"temperature", ItemKind::Vital, 0, 0, 36.8, 0.10, 0.0, 0.05, 0.30, 0.15, {}});
    v.push_back({"pulse", ItemKind::Vital, 0, 0, 78.0, 2.5, 0.0, 1.0, 7.0, 5.0, {}});
    v.push_back({"bp_max", ItemKind::Vital, 0, 0, 126.0, -2.5, 0.0, 1.5, 9.0, 8.0, {}});
    v.push_back({"bp_min", ItemKind::Vital, 0, 0, 78.0, -1.5, 0.0, 1.0, 6.0, 5.0, {}});
    // The anemia-like trio carries the designed terminal signature on the
    // slow burden coordinate.
    v.push_back({"rbc", ItemKind::Lab, 4.0, 5.6, 4.75, 0.0, -0.35, 0.02, 0.35, 0.22, {}});
    v.push_back({"hgb", ItemKind::Lab, 12.0, 17.0, 14.2, 0.0, -1.10, 0.08, 1.00, 0.65, {}});
    v.push_back({"hct", ItemKind::Lab, 36.0, 50.0, 42.5, 0.0, -3.00, 0.20, 2.80, 1.80, {}});
    v.push_back({"crp", ItemKind::Lab, 0.0, 2.0, 0.8, 1.10, 0.0, 0.10, 1.00, 0.45, {}});
    v.push_back({"d_dimer", ItemKind::Lab, 0.0, 1.5, 0.7, 0.80, 0.0, 0.08, 0.80, 0.35, {}});
    v.push_back({"segmented", ItemKind::Lab, 40.0, 75.0, 57.0, 0.4, 0.0, 1.0, 6.0, 3.0,
                 {{"nivolumab", 4.5}, {"osimertinib", 3.5}}});
    v.push_back({"lymphocytes", ItemKind::Lab, 18.0, 45.0, 31.0, -0.3, 0.0, 0.8, 4.0, 2.0,
                 {{"nivolumab", -3.2}}});
    v.push_back({"ck", ItemKind::Lab, 50.0, 200.0, 110.0, -1.0, 0.0, 3.0, 24.0, 12.0,
                 {{"bicalutamide", -16.0}}});
    v.push_back({"ldh", ItemKind::Lab, 120.0, 240.0, 175.0, 2.0, 0.0, 3.0, 22.0, 11.0,
                 {{"bicalutamide", 22.0}, {"afatinib", 18.0}, {"erlotinib", 18.0}}});
    v.push_back({"bun", ItemKind::Lab, 8.0, 22.0, 14.5, 0.3, 0.0, 0.3, 2.2, 1.1,
                 {{"bicalutamide", 2.2}}});
    v.push_back({"ca", ItemKind::Lab, 8.5, 10.5, 9.4, 0.0, -0.015, 0.02, 0.32, 0.14, {}});
    v.push_back({"tp", ItemKind::Lab, 6.3, 8.0, 7.1, 0.0, -0.02, 0.02, 0.28, 0.13, {}});
    v.push_back({"alb", ItemKind::Lab, 3.7, 5.0, 4.2, 0.0, -0.025, 0.02, 0.22, 0.11, {}});
    return v;
}

// Full-scale catalog: the desk items plus filler labs up to 50 labs (D = 57).
inline std::vector<SyntheticItem> full_scale_items() {
    auto v = desk_scale_items();
    int labs = 0;
    for (const auto& item : v) labs += item.kind == ItemKind::Lab ? 1 : 0;
    for (int i = labs; i < 50; ++i) {
        SyntheticItem s;
        s.name = "lab" + std::to_string(i + 1);
        s.kind = ItemKind::Lab;
        const double width = 1.0 + 0.15 * (i % 7);
        s.ref_low = 10.0 + i;
        s.ref_high = s.ref_low + 4.0 * width;
        s.base = 0.5 * (s.ref_low + s.ref_high);
        s.risk_loading = ((i % 3) - 1) * 0.05 * width;
        s.burden_loading = ((i % 5) - 2) * 0.02 * width;
        s.nuisance_loading = 0.08 * width;
        s.noise_sd = 0.9 * width;
        s.offset_sd = 0.5 * width;
        v.push_back(std::move(s));
    }
    return v;
}

inline CohortSpec desk_scale_spec() {
    CohortSpec spec;
    spec.items = desk_scale_items();
    return spec;
}

inline CohortSpec full_scale_spec() {
    CohortSpec spec;
    spec.items = full_scale_items();
    return spec;
}

// Ground truth for tests and report sidecars; never a model input.
struct PatientTruth {
    std::string patient_id;
    std::vector<int> regimes;     // per step
    std::vector<double> risk;     // per step
    std::vector<double> burden;   // per step
    std::vector<double> nuisance; // per step
    bool dead = false;
    int death_step = -1;          // step index if dead
};

struct GroundTruthCohort {
    std::vector<PatientTruth> patients;
};

inline double regime_level(const CohortSpec& spec, Regime r) {
    switch (r) {
        case Regime::Stable: return spec.stable_level;
        case Regime::Declining: return spec.declining_level;
        case Regime::Terminal: return spec.terminal_level;
    }
    return 0.0;
}

// Draws the cohort. Every day keeps at least one observation so the
// preprocessing step axis matches the ground-truth step axis exactly.
inline std::pair<RawCohort, GroundTruthCohort> simulate_cohort(const CohortSpec& spec,
                                                               std::uint64_t seed) {
    spec.validate();
    RawCohort raw;
    GroundTruthCohort truth;
    for (const auto& item : spec.items)
        raw.items.push_back({item.name, item.kind, item.ref_low, item.ref_high, ""});

    // Per-cell missing probability on non-gender items that yields the
    // target rate over all D columns (gender is always observed).
    const int dims = static_cast<int>(spec.items.size());
    int non_gender = 0;
    for (const auto& item : spec.items) non_gender += item.kind == ItemKind::Gender ? 0 : 1;
    require(non_gender >= 1, "simulate_cohort: catalog needs non-gender items");
    const double cell_missing =
        std::min(0.999, spec.target_missing_rate * dims / static_cast<double>(non_gender));

    for (int p = 0; p < spec.patients; ++p) {
        RandomStream rng(mix_seed(seed, 0xc0110000ULL + static_cast<std::uint64_t>(p)));
        RawRecordSet patient;
        PatientTruth pt;
        patient.patient_id = "p" + std::to_string(p);
        pt.patient_id = patient.patient_id;
        patient.gender = rng.bernoulli(0.55) ? 1 : 0;

        patient.drug_tags.push_back(
            spec.drug_tags[static_cast<std::size_t>(rng.uniform_int(
                static_cast<int>(spec.drug_tags.size())))]);
        if (rng.bernoulli(spec.second_drug_prob)) {
            const auto& second = spec.drug_tags[static_cast<std::size_t>(rng.uniform_int(
                static_cast<int>(spec.drug_tags.size())))];
            if (second != patient.drug_tags.front()) patient.drug_tags.push_back(second);
        }

        // Static per-patient offsets and effective loadings. The signature
        // baseline rides the burden loadings, so it shifts burden-loaded
        // items coherently.
        const double baseline = rng.normal(0.0, spec.signature_baseline_sd);
        std::vector<double> offsets(spec.items.size(), 0.0);
        std::vector<double> loadings(spec.items.size(), 0.0);
        for (std::size_t i = 0; i < spec.items.size(); ++i) {
            const auto& item = spec.items[i];
            offsets[i] = item.offset_sd > 0.0 ? rng.normal(0.0, item.offset_sd) : 0.0;
            offsets[i] += item.burden_loading * baseline;
            loadings[i] = item.risk_loading;
            for (const auto& [tag, boost] : item.drug_boost)
                for (const auto& carried : patient.drug_tags)
                    if (carried == tag) loadings[i] += boost;
        }

        const int planned =
            spec.min_steps + rng.uniform_int(spec.max_steps - spec.min_steps + 1);
        Regime regime = Regime::Stable;
        {
            const double u = rng.uniform();
            if (u < spec.p_start_terminal)
                regime = Regime::Terminal;
            else if (u < spec.p_start_terminal + spec.p_start_declining)
                regime = Regime::Declining;
        }
        double risk = regime_level(spec, regime) + rng.normal(0.0, 0.8);
        double burden = risk + rng.normal(0.0, 0.4);
        double nuisance = rng.normal(0.0, 1.0);

        // Pass 1: latent dynamics and the death time.
        for (int day = 0; day < planned; ++day) {
            if (day > 0) {
                // Adjacent-regime Markov switch, then mean-reverting drift.
                const double u = rng.uniform();
                switch (regime) {
                    case Regime::Stable:
                        if (u < spec.p_stable_to_declining) regime = Regime::Declining;
                        break;
                    case Regime::Declining:
                        if (u < spec.p_declining_to_terminal)
                            regime = Regime::Terminal;
                        else if (u < spec.p_declining_to_terminal + spec.p_declining_to_stable)
                            regime = Regime::Stable;
                        break;
                    case Regime::Terminal:
                        if (u < spec.p_terminal_to_declining) regime = Regime::Declining;
                        break;
                }
                risk += spec.risk_pull * (regime_level(spec, regime) - risk) +
                        rng.normal(0.0, spec.risk_noise_sd);
                nuisance += spec.nuisance_pull * (0.0 - nuisance) +
                            rng.normal(0.0, spec.nuisance_noise_sd);
                burden += spec.burden_beta * (risk - burden);
            }
            pt.regimes.push_back(static_cast<int>(regime));
            pt.risk.push_back(risk);
            pt.burden.push_back(burden);
            pt.nuisance.push_back(nuisance);

            // Hazard after warmup, in the terminal regime only; dying ends
            // the series at this step.
            if (regime == Regime::Terminal && day >= spec.hazard_warmup) {
                const double hazard =
                    nn::sigmoid(spec.hazard_slope * (burden - spec.hazard_center));
                if (rng.bernoulli(hazard)) {
                    pt.dead = true;
                    pt.death_step = day;
                    break;
                }
            }
        }

        // Pass 2: observations. Per-cell missingness scales with
        // exp(-slope * burden); a bisected per-patient scale keeps the mean
        // of the clamped probabilities on target, accounting for the forced
        // fallback observation on all-missing days.
        const int days_total = static_cast<int>(pt.regimes.size());
        std::vector<double> density(static_cast<std::size_t>(days_total));
        for (int day = 0; day < days_total; ++day)
            density[static_cast<std::size_t>(day)] =
                std::exp(-spec.missing_burden_slope * pt.burden[static_cast<std::size_t>(day)]);
        auto effective_mean = [&](double scale) {
            double acc = 0.0;
            for (double w : density) {
                const double q = std::min(0.99, std::max(0.01, scale * w));
                acc += q - std::pow(q, non_gender) / non_gender;
            }
            return acc / static_cast<double>(days_total);
        };
        double scale_lo = 0.0, scale_hi = 100.0;
        for (int iter = 0; iter < 60; ++iter) {
            const double mid = 0.5 * (scale_lo + scale_hi);
            if (effective_mean(mid) < cell_missing)
                scale_lo = mid;
            else
                scale_hi = mid;
        }
        const double density_scale = 0.5 * (scale_lo + scale_hi);
        for (int day = 0; day < days_total; ++day) {
            const double day_q = std::min(
                0.99, std::max(0.01, density_scale * density[static_cast<std::size_t>(day)]));
            const double day_risk = pt.risk[static_cast<std::size_t>(day)];
            const double day_burden = pt.burden[static_cast<std::size_t>(day)];
            const double day_nuisance = pt.nuisance[static_cast<std::size_t>(day)];
            auto draw_value = [&](std::size_t i) {
                const auto& item = spec.items[i];
                return item.base + loadings[i] * day_risk + item.burden_loading * day_burden +
                       item.nuisance_loading * day_nuisance + offsets[i] +
                       rng.normal(0.0, item.noise_sd * spec.noise_scale);
            };
            bool any = false;
            int fallback = -1;
            for (std::size_t i = 0; i < spec.items.size(); ++i) {
                if (spec.items[i].kind == ItemKind::Gender) continue;
                if (fallback < 0) fallback = static_cast<int>(i);
                const bool missing = rng.bernoulli(day_q);
                const double value = draw_value(i);
                if (missing) continue;
                patient.observations.push_back({day, spec.items[i].name, value});
                any = true;
                if (rng.bernoulli(spec.duplicate_day_prob))
                    patient.observations.push_back({day, spec.items[i].name, draw_value(i)});
            }
            if (!any) {
                // Keep the day on the step axis.
                patient.observations.push_back(
                    {day, spec.items[static_cast<std::size_t>(fallback)].name,
                     draw_value(static_cast<std::size_t>(fallback))});
            }
        }
        patient.death_flag = pt.dead;

        // Guarantee every item is observed at least once so preprocessing
        // never excludes a generated patient.
        for (std::size_t i = 0; i < spec.items.size(); ++i) {
            const auto& item = spec.items[i];
            if (item.kind == ItemKind::Gender) continue;
            bool seen = false;
            for (const auto& o : patient.observations) seen |= o.item == item.name;
            if (!seen) {
                const int day = rng.uniform_int(days_total);
                patient.observations.push_back(
                    {day, item.name,
                     item.base + loadings[i] * pt.risk[static_cast<std::size_t>(day)] +
                         item.burden_loading * pt.burden[static_cast<std::size_t>(day)] +
                         item.nuisance_loading * pt.nuisance[static_cast<std::size_t>(day)] +
                         offsets[i] + rng.normal(0.0, item.noise_sd * spec.noise_scale)});
            }
        }

        raw.patients.push_back(std::move(patient));
        truth.patients.push_back(std::move(pt));
    }
    return {raw, truth};
}

}  // namespace dsa::synth
