#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/data/cohort.hpp"

namespace dsa::preprocess {

// Abnormality encoding relative to the reference range. Boundaries are
// inclusive-normal: value == ref_high is normal.
struct EncodedValue {
    double model_code = 0.5;  // 1 high, 0.5 normal, 0 low
    SignalCode signal = 0;    // +1 high, 0 normal, -1 low
};

inline EncodedValue encode_abnormality(double value, const ItemSpec& spec) {
    require(spec.kind == ItemKind::Lab, "encode_abnormality: item is not a lab");
    if (!(spec.ref_low < spec.ref_high))
        throw ConfigError("encode_abnormality: invalid reference range for " + spec.name);
    if (value > spec.ref_high) return {1.0, +1};
    if (value < spec.ref_low) return {0.0, -1};
    return {0.5, 0};
}

// (x - min) / (max - min) against cohort-wide extrema; a degenerate range
// maps everything to 0.5.
inline double minmax_normalize(double value, double min_value, double max_value) {
    if (!(max_value > min_value)) return 0.5;
    return (value - min_value) / (max_value - min_value);
}

// Zero-order (step function) fill of one item column. Gaps take the most
// recent observed value; leading gaps are backfilled with the first
// observation. Returns the filled values and the observation mask.
inline std::pair<std::vector<double>, std::vector<std::uint8_t>> impute_zero_order(
    const std::vector<std::pair<int, double>>& observed, int steps) {
    require(!observed.empty(), "impute_zero_order: item has no observations in the window");
    std::vector<double> values(static_cast<std::size_t>(steps), 0.0);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(steps), 0);
    for (const auto& [t, v] : observed) {
        require(t >= 0 && t < steps, "impute_zero_order: step index out of range");
        values[static_cast<std::size_t>(t)] = v;
        mask[static_cast<std::size_t>(t)] = 1;
    }
    const int first = observed.front().first;
    for (int t = 0; t < first; ++t) values[static_cast<std::size_t>(t)] = observed.front().second;
    double last = observed.front().second;
    for (int t = 0; t < steps; ++t) {
        if (mask[static_cast<std::size_t>(t)])
            last = values[static_cast<std::size_t>(t)];
        else if (t > first)
            values[static_cast<std::size_t>(t)] = last;
    }
    return {values, mask};
}

namespace detail {

// Daily-collapsed view of one patient: per item, (date -> mode value).
// Same-day repeats collapse to the mode; ties break to the smaller value.
using DailyValues = std::map<std::string, std::map<long, double>>;

inline DailyValues collapse_daily(const RawRecordSet& patient) {
    std::map<std::string, std::map<long, std::map<double, int>>> counts;
    for (const auto& obs : patient.observations) counts[obs.item][obs.date][obs.value]++;
    DailyValues out;
    for (const auto& [item, by_date] : counts)
        for (const auto& [date, histogram] : by_date) {
            int best_count = 0;
            double best_value = 0.0;
            for (const auto& [value, count] : histogram) {
                // std::map iterates values ascending, so on ties the smaller
                // value wins by keeping the strict inequality.
                if (count > best_count) {
                    best_count = count;
                    best_value = value;
                }
            }
            out[item][date] = best_value;
        }
    return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    if (n < 3) return 0.0;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

struct LabSelection {
    std::vector<ItemSpec> items;            // kept labs, rank order
    std::vector<std::string> warnings;      // e.g. fewer candidates than requested
    std::vector<std::pair<std::string, long>> abnormal_counts;  // all candidates, ranked
};

// Ranks candidate labs by cohort-wide abnormal-observation count and keeps
// the top max_items, greedily skipping labs whose absolute Pearson
// correlation with an already-kept lab exceeds corr_threshold. Correlation is
// computed on raw daily values over pairwise-complete (patient, date) cells.
inline LabSelection select_lab_items(const RawCohort& cohort, int max_items = 50,
                                     double corr_threshold = 0.7) {
    std::vector<const ItemSpec*> labs;
    for (const auto& item : cohort.items)
        if (item.kind == ItemKind::Lab) labs.push_back(&item);

    // Daily values per lab, keyed by (patient index, date) for correlation.
    std::map<std::string, std::map<std::pair<int, long>, double>> cells;
    std::map<std::string, long> abnormal;
    for (const auto* lab : labs) abnormal[lab->name] = 0;
    for (std::size_t p = 0; p < cohort.patients.size(); ++p) {
        const auto daily = detail::collapse_daily(cohort.patients[p]);
        for (const auto* lab : labs) {
            auto it = daily.find(lab->name);
            if (it == daily.end()) continue;
            for (const auto& [date, value] : it->second) {
                cells[lab->name][{static_cast<int>(p), date}] = value;
                if (encode_abnormality(value, *lab).signal != 0) abnormal[lab->name]++;
            }
        }
    }

    std::vector<const ItemSpec*> ranked(labs);
    std::sort(ranked.begin(), ranked.end(), [&](const ItemSpec* a, const ItemSpec* b) {
        if (abnormal[a->name] != abnormal[b->name]) return abnormal[a->name] > abnormal[b->name];
        return a->name < b->name;
    });

    auto correlation = [&](const std::string& a, const std::string& b) {
        const auto& ca = cells[a];
        const auto& cb = cells[b];
        std::vector<double> va, vb;
        for (const auto& [key, value] : ca) {
            auto it = cb.find(key);
            if (it == cb.end()) continue;
            va.push_back(value);
            vb.push_back(it->second);
        }
        return detail::pearson(va, vb);
    };

    LabSelection out;
    for (const auto* lab : ranked) out.abnormal_counts.emplace_back(lab->name, abnormal[lab->name]);
    for (const auto* lab : ranked) {
        if (static_cast<int>(out.items.size()) >= max_items) break;
        bool drop = false;
        for (const auto& kept : out.items)
            if (std::fabs(correlation(lab->name, kept.name)) > corr_threshold) {
                drop = true;
                break;
            }
        if (!drop) out.items.push_back(*lab);
    }
    if (static_cast<int>(labs.size()) < max_items)
        out.warnings.push_back("requested " + std::to_string(max_items) + " labs but only " +
                               std::to_string(labs.size()) + " candidates exist");
    return out;
}

struct BuildRules {
    int min_steps = 50;
    int max_steps = 238;
};

struct BuildReport {
    int ingested = 0;
    int kept = 0;
    int excluded_short = 0;        // series length below min_steps
    int excluded_missing_item = 0; // some catalog item never observed in the window
    double missing_rate = 0.0;
};

// Transforms a raw cohort (with an already-selected item catalog) into the
// model-ready tensor:
//   1. same-day repeats collapse to the daily mode,
//   2. the step axis is the patient's distinct observation dates restricted
//      to catalog items, truncated to the most recent max_steps,
//   3. patients with fewer than min_steps steps, or with any catalog item
//      observed at no kept step, are dropped,
//   4. labs carry their abnormality model codes; vitals and anthropometrics
//      are min-max normalized against cohort-wide extrema; gender broadcasts
//      to every step,
//   5. gaps are zero-order imputed and masked.
inline CohortTensor build_cohort(const RawCohort& cohort, const BuildRules& rules,
                                 BuildReport* report = nullptr) {
    // Catalog in canonical column order: anthro, gender, vitals, labs.
    std::vector<ItemSpec> catalog;
    for (auto kind : {ItemKind::Anthro, ItemKind::Gender, ItemKind::Vital, ItemKind::Lab})
        for (const auto& item : cohort.items)
            if (item.kind == kind) catalog.push_back(item);
    bool has_gender = false;
    for (const auto& item : catalog) has_gender |= item.kind == ItemKind::Gender;
    if (!has_gender) {
        ItemSpec g;
        g.name = "gender";
        g.kind = ItemKind::Gender;
        // Column order keeps gender between anthro and vitals.
        std::vector<ItemSpec> with_gender;
        for (const auto& item : catalog) {
            if (item.kind == ItemKind::Vital || item.kind == ItemKind::Lab) break;
            with_gender.push_back(item);
        }
        with_gender.push_back(g);
        for (const auto& item : catalog)
            if (item.kind == ItemKind::Vital || item.kind == ItemKind::Lab)
                with_gender.push_back(item);
        catalog = std::move(with_gender);
    }

    struct PatientWindow {
        const RawRecordSet* raw = nullptr;
        detail::DailyValues daily;
        std::vector<long> dates;  // kept step axis
    };

    BuildReport rep;
    rep.ingested = static_cast<int>(cohort.patients.size());
    std::vector<PatientWindow> kept;
    for (const auto& patient : cohort.patients) {
        PatientWindow w;
        w.raw = &patient;
        w.daily = detail::collapse_daily(patient);
        std::set<long> dates;
        for (const auto& item : catalog) {
            if (item.kind == ItemKind::Gender) continue;
            auto it = w.daily.find(item.name);
            if (it == w.daily.end()) continue;
            for (const auto& [date, value] : it->second) dates.insert(date);
        }
        w.dates.assign(dates.begin(), dates.end());
        if (static_cast<int>(w.dates.size()) > rules.max_steps)
            w.dates.erase(w.dates.begin(), w.dates.end() - rules.max_steps);
        if (static_cast<int>(w.dates.size()) < rules.min_steps) {
            rep.excluded_short++;
            continue;
        }
        bool missing_item = false;
        for (const auto& item : catalog) {
            if (item.kind == ItemKind::Gender) continue;
            auto it = w.daily.find(item.name);
            bool seen = false;
            if (it != w.daily.end())
                for (long date : w.dates) seen |= it->second.count(date) > 0;
            if (!seen) {
                missing_item = true;
                break;
            }
        }
        if (missing_item) {
            rep.excluded_missing_item++;
            continue;
        }
        kept.push_back(std::move(w));
    }

    if (kept.empty())
        throw DataError("build_cohort: empty cohort (ingested=" + std::to_string(rep.ingested) +
                        ", short=" + std::to_string(rep.excluded_short) +
                        ", all-missing-item=" + std::to_string(rep.excluded_missing_item) + ")");

    // Cohort-wide extrema for vitals/anthro over kept windows.
    std::map<std::string, std::pair<double, double>> extrema;
    for (const auto& item : catalog) {
        if (item.kind != ItemKind::Vital && item.kind != ItemKind::Anthro) continue;
        bool any = false;
        double lo = 0.0, hi = 0.0;
        for (const auto& w : kept) {
            auto it = w.daily.find(item.name);
            if (it == w.daily.end()) continue;
            for (long date : w.dates) {
                auto v = it->second.find(date);
                if (v == it->second.end()) continue;
                if (!any) {
                    lo = hi = v->second;
                    any = true;
                } else {
                    lo = std::min(lo, v->second);
                    hi = std::max(hi, v->second);
                }
            }
        }
        extrema[item.name] = {lo, hi};
    }

    CohortTensor out;
    out.items = catalog;
    const int D = static_cast<int>(catalog.size());
    std::size_t total_cells = 0, missing_cells = 0;
    for (const auto& w : kept) {
        const int T = static_cast<int>(w.dates.size());
        ObservationSeries s;
        s.patient_id = w.raw->patient_id;
        s.steps = T;
        s.dims = D;
        s.death_flag = w.raw->death_flag;
        s.drug_tags = w.raw->drug_tags;
        const std::size_t n = static_cast<std::size_t>(T) * D;
        s.values.assign(n, 0.0);
        s.mask.assign(n, 0);
        s.signal.assign(n, kSignalMissing);
        std::map<long, int> date_to_step;
        for (int t = 0; t < T; ++t) date_to_step[w.dates[static_cast<std::size_t>(t)]] = t;

        for (int d = 0; d < D; ++d) {
            const auto& item = catalog[static_cast<std::size_t>(d)];
            if (item.kind == ItemKind::Gender) {
                for (int t = 0; t < T; ++t) {
                    s.values[static_cast<std::size_t>(t) * D + d] = w.raw->gender ? 1.0 : 0.0;
                    s.mask[static_cast<std::size_t>(t) * D + d] = 1;
                }
                continue;
            }
            std::vector<std::pair<int, double>> observed;
            std::vector<SignalCode> codes;
            auto it = w.daily.find(item.name);
            if (it != w.daily.end())
                for (const auto& [date, value] : it->second) {
                    auto step = date_to_step.find(date);
                    if (step == date_to_step.end()) continue;
                    double cell;
                    SignalCode code = kSignalMissing;
                    if (item.kind == ItemKind::Lab) {
                        const EncodedValue enc = encode_abnormality(value, item);
                        cell = enc.model_code;
                        code = enc.signal;
                    } else {
                        const auto& [lo, hi] = extrema[item.name];
                        cell = minmax_normalize(value, lo, hi);
                    }
                    observed.emplace_back(step->second, cell);
                    codes.push_back(code);
                }
            auto [values, mask] = impute_zero_order(observed, T);
            for (int t = 0; t < T; ++t) {
                s.values[static_cast<std::size_t>(t) * D + d] = values[static_cast<std::size_t>(t)];
                s.mask[static_cast<std::size_t>(t) * D + d] = mask[static_cast<std::size_t>(t)];
            }
            for (std::size_t i = 0; i < observed.size(); ++i)
                s.signal[static_cast<std::size_t>(observed[i].first) * D + d] = codes[i];
        }
        total_cells += n;
        for (std::size_t i = 0; i < n; ++i) missing_cells += s.mask[i] == 0 ? 1 : 0;
        out.patients.push_back(std::move(s));
    }
    out.missing_rate =
        total_cells == 0 ? 0.0 : static_cast<double>(missing_cells) / static_cast<double>(total_cells);
    rep.kept = static_cast<int>(out.patients.size());
    rep.missing_rate = out.missing_rate;
    if (report) *report = rep;
    return out;
}

// Maps a model-ready cohort back to the raw-table representation: observed
// cells become dated observations (step index as date); lab reference ranges
// move to code space so re-encoding reproduces the same codes. Feeding the
// result back through build_cohort is the identity.
inline RawCohort cohort_to_raw(const CohortTensor& cohort) {
    RawCohort raw;
    for (const auto& item : cohort.items) {
        ItemSpec spec = item;
        if (spec.kind == ItemKind::Lab) {
            spec.ref_low = 0.25;
            spec.ref_high = 0.75;
        }
        raw.items.push_back(spec);
    }
    for (const auto& s : cohort.patients) {
        RawRecordSet p;
        p.patient_id = s.patient_id;
        p.death_flag = s.death_flag;
        p.drug_tags = s.drug_tags;
        for (int d = 0; d < s.dims; ++d) {
            const auto& item = cohort.items[static_cast<std::size_t>(d)];
            if (item.kind == ItemKind::Gender) {
                p.gender = s.value_at(0, d) > 0.5 ? 1 : 0;
                continue;
            }
            for (int t = 0; t < s.steps; ++t)
                if (s.mask_at(t, d))
                    p.observations.push_back({static_cast<long>(t), item.name, s.value_at(t, d)});
        }
        raw.patients.push_back(std::move(p));
    }
    return raw;
}

}  // namespace dsa::preprocess
