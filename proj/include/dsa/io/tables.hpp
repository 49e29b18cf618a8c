#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/data/cohort.hpp"
#include "dsa/synth/simulate.hpp"

namespace dsa::io {

// All delimited-text output is tab-separated with '#' comment headers and
// shortest-round-trip float formatting, so identical runs produce identical
// bytes.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Provenance header written at the top of every text artifact.
struct ArtifactStamp {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    int format_version = 1;

    std::string header() const {
        std::ostringstream os;
        os << "# config_hash=" << config_hash << " seed=" << seed
           << " format_version=" << format_version << "\n";
        return os.str();
    }
};

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no newline translation
    if (!out) throw DataError("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path.string());
    return in;
}

// ---- Raw-cohort tables -----------------------------------------------------
// observations.tsv: patient_id, date, item, value
// patients.tsv:     patient_id, gender, death_flag, drug_tags (';'-joined)
// items.tsv:        item, kind, ref_low, ref_high, units

inline void write_raw_cohort(const RawCohort& cohort, const std::filesystem::path& dir,
                             const ArtifactStamp& stamp) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_output(dir / "observations.tsv");
        out << stamp.header() << "patient_id\tdate\titem\tvalue\n";
        for (const auto& p : cohort.patients)
            for (const auto& o : p.observations)
                out << p.patient_id << '\t' << o.date << '\t' << o.item << '\t'
                    << format_double(o.value) << '\n';
    }
    {
        auto out = open_output(dir / "patients.tsv");
        out << stamp.header() << "patient_id\tgender\tdeath_flag\tdrug_tags\n";
        for (const auto& p : cohort.patients)
            out << p.patient_id << '\t' << p.gender << '\t' << (p.death_flag ? 1 : 0) << '\t'
                << join(p.drug_tags, ';') << '\n';
    }
    {
        auto out = open_output(dir / "items.tsv");
        out << stamp.header() << "item\tkind\tref_low\tref_high\tunits\n";
        for (const auto& item : cohort.items)
            out << item.name << '\t' << item_kind_name(item.kind) << '\t'
                << format_double(item.ref_low) << '\t' << format_double(item.ref_high) << '\t'
                << item.units << '\n';
    }
}

inline RawCohort read_raw_cohort(const std::filesystem::path& dir) {
    RawCohort cohort;
    std::map<std::string, std::size_t> patient_index;

    auto next_row = [](std::ifstream& in, std::string& line) {
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
        return false;
    };

    {
        auto in = open_input(dir / "items.tsv");
        std::string line;
        bool header = true;
        while (next_row(in, line)) {
            if (header) {
                header = false;
                continue;
            }
            const auto f = split_tabs(line);
            require(f.size() >= 5, "items.tsv: expected 5 columns: " + line);
            cohort.items.push_back({f[0], item_kind_from_name(f[1]), std::stod(f[2]),
                                    std::stod(f[3]), f[4]});
        }
    }
    {
        auto in = open_input(dir / "patients.tsv");
        std::string line;
        bool header = true;
        while (next_row(in, line)) {
            if (header) {
                header = false;
                continue;
            }
            const auto f = split_tabs(line);
            require(f.size() >= 4, "patients.tsv: expected 4 columns: " + line);
            RawRecordSet p;
            p.patient_id = f[0];
            p.gender = std::stoi(f[1]);
            p.death_flag = std::stoi(f[2]) != 0;
            p.drug_tags = split_on(f[3], ';');
            patient_index[p.patient_id] = cohort.patients.size();
            cohort.patients.push_back(std::move(p));
        }
    }
    {
        auto in = open_input(dir / "observations.tsv");
        std::string line;
        bool header = true;
        while (next_row(in, line)) {
            if (header) {
                header = false;
                continue;
            }
            const auto f = split_tabs(line);
            require(f.size() >= 4, "observations.tsv: expected 4 columns: " + line);
            const auto it = patient_index.find(f[0]);
            require(it != patient_index.end(),
                    "observations.tsv: unknown patient " + f[0]);
            cohort.patients[it->second].observations.push_back(
                {std::stol(f[1]), f[2], std::stod(f[3])});
        }
    }
    return cohort;
}

// Ground-truth sidecar (tests and inspection only; never a model input).
inline void write_ground_truth(const synth::GroundTruthCohort& truth,
                               const std::filesystem::path& dir, const ArtifactStamp& stamp) {
    auto out = open_output(dir / "truth.tsv");
    out << stamp.header() << "patient_id\tstep\tregime\trisk\tburden\tnuisance\tdeath_step\n";
    for (const auto& p : truth.patients)
        for (std::size_t t = 0; t < p.regimes.size(); ++t)
            out << p.patient_id << '\t' << t << '\t' << p.regimes[t] << '\t'
                << format_double(p.risk[t]) << '\t' << format_double(p.burden[t]) << '\t'
                << format_double(p.nuisance[t]) << '\t' << (p.dead ? p.death_step : -1) << '\n';
}

}  // namespace dsa::io
