#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "dsa/analyze/kmeans.hpp"
#include "dsa/analyze/outcomes.hpp"
#include "dsa/analyze/umap.hpp"
#include "dsa/baselines/linear_ssm.hpp"
#include "dsa/baselines/pca.hpp"
#include "dsa/baselines/vae.hpp"
#include "dsa/data/cohort.hpp"
#include "dsa/dssm/model.hpp"
#include "dsa/io/checkpoint.hpp"
#include "dsa/io/tables.hpp"

namespace dsa::io {

// Checkpoint-container encodings of the pipeline artifacts. Meta blocks are
// tab-separated lines; numeric payloads are float64 arrays.

namespace artifact_detail {

inline std::vector<std::vector<std::string>> meta_rows(const std::string& meta) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(meta);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_tabs(line));
    }
    return rows;
}

inline Tensor tensor_from_u8(const std::vector<std::uint8_t>& v, int rows, int cols) {
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<double>(v[i]);
    return t;
}

inline Tensor tensor_from_i8(const std::vector<SignalCode>& v, int rows, int cols) {
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<double>(v[i]);
    return t;
}

}  // namespace artifact_detail

// ---- Cohort ---------------------------------------------------------------

inline Checkpoint cohort_to_checkpoint(const CohortTensor& cohort, const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    std::ostringstream meta;
    meta << "artifact\tcohort\n";
    meta << "missing_rate\t" << format_double(cohort.missing_rate) << "\n";
    for (const auto& item : cohort.items)
        meta << "item\t" << item.name << '\t' << item_kind_name(item.kind) << '\t'
             << format_double(item.ref_low) << '\t' << format_double(item.ref_high) << '\t'
             << item.units << "\n";
    for (const auto& p : cohort.patients)
        meta << "patient\t" << p.patient_id << '\t' << (p.death_flag ? 1 : 0) << '\t'
             << join(p.drug_tags, ';') << "\n";
    c.meta_text = meta.str();
    for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
        const auto& p = cohort.patients[i];
        const std::string prefix = "patient/" + std::to_string(i) + "/";
        Tensor values({p.steps, p.dims});
        values.values() = p.values;
        c.add(prefix + "values", std::move(values));
        c.add(prefix + "mask", artifact_detail::tensor_from_u8(p.mask, p.steps, p.dims));
        c.add(prefix + "signal", artifact_detail::tensor_from_i8(p.signal, p.steps, p.dims));
    }
    return c;
}

inline CohortTensor cohort_from_checkpoint(const Checkpoint& c) {
    CohortTensor cohort;
    std::size_t patient_count = 0;
    for (const auto& row : artifact_detail::meta_rows(c.meta_text)) {
        if (row[0] == "missing_rate")
            cohort.missing_rate = std::stod(row.at(1));
        else if (row[0] == "item")
            cohort.items.push_back({row.at(1), item_kind_from_name(row.at(2)),
                                    std::stod(row.at(3)), std::stod(row.at(4)),
                                    row.size() > 5 ? row[5] : ""});
        else if (row[0] == "patient") {
            ObservationSeries s;
            s.patient_id = row.at(1);
            s.death_flag = std::stoi(row.at(2)) != 0;
            if (row.size() > 3) s.drug_tags = split_on(row[3], ';');
            cohort.patients.push_back(std::move(s));
            ++patient_count;
        }
    }
    for (std::size_t i = 0; i < patient_count; ++i) {
        auto& p = cohort.patients[i];
        const std::string prefix = "patient/" + std::to_string(i) + "/";
        const Tensor& values = c.require_array(prefix + "values");
        const Tensor& mask = c.require_array(prefix + "mask");
        const Tensor& signal = c.require_array(prefix + "signal");
        require_shape(values.rank() == 2 && values.same_shape(mask) && values.same_shape(signal),
                      "cohort checkpoint: inconsistent array shapes for " + p.patient_id);
        p.steps = values.dim(0);
        p.dims = values.dim(1);
        p.values = values.values();
        p.mask.resize(values.size());
        p.signal.resize(values.size());
        for (std::size_t j = 0; j < values.size(); ++j) {
            p.mask[j] = mask[j] != 0.0 ? 1 : 0;
            p.signal[j] = static_cast<SignalCode>(signal[j]);
        }
        p.validate();
    }
    require_shape(static_cast<int>(cohort.items.size()) ==
                      (cohort.patients.empty() ? 0 : cohort.patients[0].dims),
                  "cohort checkpoint: item catalog does not match patient dims");
    return cohort;
}

// ---- Parameter stores (models) ---------------------------------------------

inline void params_into_checkpoint(const nn::ParameterStore& store, Checkpoint& c) {
    for (const auto& e : store.entries()) c.add("param/" + e.name, e.value);
}

inline void params_from_checkpoint(nn::ParameterStore& store, const Checkpoint& c) {
    for (auto& e : store.entries()) {
        const Tensor& t = c.require_array("param/" + e.name);
        require_shape(t.shape() == e.value.shape(),
                      "model checkpoint: shape mismatch for parameter " + e.name);
        e.value = t;
    }
}

inline Checkpoint dssm_to_checkpoint(const dssm::DssmModel& model, const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    const auto& cfg = model.config();
    std::ostringstream meta;
    meta << "artifact\tmodel\nmodel_kind\tdssm\n";
    meta << "latent_dim\t" << cfg.latent_dim << "\ninput_dim\t" << cfg.input_dim
         << "\nhidden_dim\t" << cfg.hidden_dim << "\nlstm_hidden\t" << cfg.lstm_hidden
         << "\ndropout_rate\t" << format_double(cfg.dropout_rate) << "\nencoder_direction\t"
         << dssm::encoder_direction_name(cfg.encoder_direction) << "\nseed\t" << cfg.seed
         << "\nmax_steps\t" << cfg.max_steps << "\nvariance_floor\t"
         << format_double(cfg.variance_floor) << "\n";
    c.meta_text = meta.str();
    params_into_checkpoint(model.params(), c);
    return c;
}

inline dssm::DssmModel dssm_from_checkpoint(const Checkpoint& c) {
    dssm::DssmConfig cfg;
    for (const auto& row : artifact_detail::meta_rows(c.meta_text)) {
        if (row[0] == "model_kind") require(row.at(1) == "dssm", "checkpoint is not a dssm model");
        else if (row[0] == "latent_dim") cfg.latent_dim = std::stoi(row.at(1));
        else if (row[0] == "input_dim") cfg.input_dim = std::stoi(row.at(1));
        else if (row[0] == "hidden_dim") cfg.hidden_dim = std::stoi(row.at(1));
        else if (row[0] == "lstm_hidden") cfg.lstm_hidden = std::stoi(row.at(1));
        else if (row[0] == "dropout_rate") cfg.dropout_rate = std::stod(row.at(1));
        else if (row[0] == "encoder_direction")
            cfg.encoder_direction = dssm::encoder_direction_from_name(row.at(1));
        else if (row[0] == "seed") cfg.seed = std::stoull(row.at(1));
        else if (row[0] == "max_steps") cfg.max_steps = std::stoi(row.at(1));
        else if (row[0] == "variance_floor") cfg.variance_floor = std::stod(row.at(1));
    }
    dssm::DssmModel model(cfg);
    params_from_checkpoint(model.params(), c);
    return model;
}

inline Checkpoint linear_ssm_to_checkpoint(const baselines::LinearSsm& model,
                                           const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    const auto& cfg = model.config();
    std::ostringstream meta;
    meta << "artifact\tmodel\nmodel_kind\tlinear_ssm\n";
    meta << "latent_dim\t" << cfg.latent_dim << "\ninput_dim\t" << cfg.input_dim
         << "\nsummary_dim\t" << cfg.summary() << "\nseed\t" << cfg.seed
         << "\nencoder_direction\t" << dssm::encoder_direction_name(cfg.encoder_direction)
         << "\nvariance_floor\t" << format_double(cfg.variance_floor) << "\n";
    c.meta_text = meta.str();
    params_into_checkpoint(model.params(), c);
    return c;
}

inline baselines::LinearSsm linear_ssm_from_checkpoint(const Checkpoint& c) {
    baselines::LinearSsmConfig cfg;
    for (const auto& row : artifact_detail::meta_rows(c.meta_text)) {
        if (row[0] == "model_kind")
            require(row.at(1) == "linear_ssm", "checkpoint is not a linear_ssm model");
        else if (row[0] == "latent_dim") cfg.latent_dim = std::stoi(row.at(1));
        else if (row[0] == "input_dim") cfg.input_dim = std::stoi(row.at(1));
        else if (row[0] == "summary_dim") cfg.summary_dim = std::stoi(row.at(1));
        else if (row[0] == "seed") cfg.seed = std::stoull(row.at(1));
        else if (row[0] == "encoder_direction")
            cfg.encoder_direction = dssm::encoder_direction_from_name(row.at(1));
        else if (row[0] == "variance_floor") cfg.variance_floor = std::stod(row.at(1));
    }
    baselines::LinearSsm model(cfg);
    params_from_checkpoint(model.params(), c);
    return model;
}

inline Checkpoint vae_to_checkpoint(const baselines::VaeModel& model,
                                    const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    const auto& cfg = model.config();
    std::ostringstream meta;
    meta << "artifact\tmodel\nmodel_kind\tvae\n";
    meta << "latent_dim\t" << cfg.latent_dim << "\ninput_dim\t" << cfg.input_dim
         << "\nencoder_hidden1\t" << cfg.encoder_hidden1 << "\nencoder_hidden2\t"
         << cfg.encoder_hidden2 << "\ndecoder_hidden\t" << cfg.decoder_hidden << "\nseed\t"
         << cfg.seed << "\nvariance_floor\t" << format_double(cfg.variance_floor) << "\n";
    c.meta_text = meta.str();
    params_into_checkpoint(model.params(), c);
    return c;
}

inline baselines::VaeModel vae_from_checkpoint(const Checkpoint& c) {
    baselines::VaeConfig cfg;
    for (const auto& row : artifact_detail::meta_rows(c.meta_text)) {
        if (row[0] == "model_kind") require(row.at(1) == "vae", "checkpoint is not a vae model");
        else if (row[0] == "latent_dim") cfg.latent_dim = std::stoi(row.at(1));
        else if (row[0] == "input_dim") cfg.input_dim = std::stoi(row.at(1));
        else if (row[0] == "encoder_hidden1") cfg.encoder_hidden1 = std::stoi(row.at(1));
        else if (row[0] == "encoder_hidden2") cfg.encoder_hidden2 = std::stoi(row.at(1));
        else if (row[0] == "decoder_hidden") cfg.decoder_hidden = std::stoi(row.at(1));
        else if (row[0] == "seed") cfg.seed = std::stoull(row.at(1));
        else if (row[0] == "variance_floor") cfg.variance_floor = std::stod(row.at(1));
    }
    baselines::VaeModel model(cfg);
    params_from_checkpoint(model.params(), c);
    return model;
}

inline Checkpoint pca_to_checkpoint(const baselines::PcaModel& model,
                                    const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    c.meta_text = "artifact\tmodel\nmodel_kind\tpca\n";
    const int D = model.input_dim();
    const int k = model.latent_dim();
    Tensor mean({D});
    for (int i = 0; i < D; ++i) mean[static_cast<std::size_t>(i)] = model.mean(i);
    Tensor comps({D, k});
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < k; ++j) comps.at(i, j) = model.components(i, j);
    Tensor var({k});
    for (int j = 0; j < k; ++j) var[static_cast<std::size_t>(j)] = model.explained_variance(j);
    c.add("pca/mean", std::move(mean));
    c.add("pca/components", std::move(comps));
    c.add("pca/explained_variance", std::move(var));
    return c;
}

inline baselines::PcaModel pca_from_checkpoint(const Checkpoint& c) {
    baselines::PcaModel m;
    const Tensor& mean = c.require_array("pca/mean");
    const Tensor& comps = c.require_array("pca/components");
    const Tensor& var = c.require_array("pca/explained_variance");
    m.mean.resize(mean.dim(0));
    for (int i = 0; i < mean.dim(0); ++i) m.mean(i) = mean[static_cast<std::size_t>(i)];
    m.components.resize(comps.dim(0), comps.dim(1));
    for (int i = 0; i < comps.dim(0); ++i)
        for (int j = 0; j < comps.dim(1); ++j) m.components(i, j) = comps.at(i, j);
    m.explained_variance.resize(var.dim(0));
    for (int j = 0; j < var.dim(0); ++j)
        m.explained_variance(j) = var[static_cast<std::size_t>(j)];
    return m;
}

// ---- Latent trajectories ----------------------------------------------------

inline Checkpoint latents_to_checkpoint(const std::vector<LatentTrajectory>& latents,
                                        const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    std::ostringstream meta;
    meta << "artifact\tlatents\n";
    for (const auto& t : latents) meta << "trajectory\t" << t.patient_id << '\t' << t.steps << "\n";
    c.meta_text = meta.str();
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const auto& t = latents[i];
        const std::string prefix = "latent/" + std::to_string(i) + "/";
        Tensor means({t.steps, t.latent_dim});
        means.values() = t.means;
        Tensor vars({t.steps, t.latent_dim});
        vars.values() = t.variances;
        c.add(prefix + "means", std::move(means));
        c.add(prefix + "variances", std::move(vars));
    }
    return c;
}

inline std::vector<LatentTrajectory> latents_from_checkpoint(const Checkpoint& c) {
    std::vector<LatentTrajectory> out;
    for (const auto& row : artifact_detail::meta_rows(c.meta_text)) {
        if (row[0] != "trajectory") continue;
        LatentTrajectory t;
        t.patient_id = row.at(1);
        out.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::string prefix = "latent/" + std::to_string(i) + "/";
        const Tensor& means = c.require_array(prefix + "means");
        const Tensor& vars = c.require_array(prefix + "variances");
        require_shape(means.rank() == 2 && means.same_shape(vars),
                      "latents checkpoint: inconsistent shapes");
        out[i].steps = means.dim(0);
        out[i].latent_dim = means.dim(1);
        out[i].means = means.values();
        out[i].variances = vars.values();
    }
    return out;
}

// ---- Clusters ---------------------------------------------------------------

struct ClusterArtifact {
    analyze::ClusterModel model;
    analyze::OutcomeLabeling outcome;
    std::vector<int> patient_index;  // per pooled point
    std::vector<int> step_index;
    std::vector<std::uint8_t> endpoint;
};

inline Checkpoint clusters_to_checkpoint(const ClusterArtifact& a, const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    std::ostringstream meta;
    meta << "artifact\tclusters\n";
    meta << "k\t" << a.model.result.k << "\n";
    meta << "silhouette\t" << format_double(a.model.silhouette) << "\n";
    meta << "size_cv\t" << format_double(a.model.size_cv) << "\n";
    for (const auto& cand : a.model.candidates)
        meta << "candidate\t" << cand.k << '\t' << format_double(cand.silhouette) << '\t'
             << format_double(cand.size_cv) << '\t' << format_double(cand.inertia) << "\n";
    meta << "dangerous\t" << a.outcome.dangerous_cluster << "\n";
    meta << "stable\t" << a.outcome.stable_cluster << "\n";
    meta << "tie\t" << (a.outcome.tie ? 1 : 0) << "\ndegenerate\t" << (a.outcome.degenerate ? 1 : 0)
         << "\n";
    for (int k = 0; k < a.model.result.k; ++k)
        meta << "cluster\t" << k << '\t'
             << analyze::outcome_label_name(a.outcome.labels[static_cast<std::size_t>(k)]) << '\t'
             << a.outcome.endpoints.dead[static_cast<std::size_t>(k)] << '\t'
             << a.outcome.endpoints.surviving[static_cast<std::size_t>(k)] << "\n";
    c.meta_text = meta.str();

    Tensor centroids({a.model.result.k, a.model.result.centroids.dim});
    centroids.values() = a.model.result.centroids.data;
    c.add("clusters/centroids", std::move(centroids));
    const int n = static_cast<int>(a.model.result.labels.size());
    Tensor labels({n});
    for (int i = 0; i < n; ++i)
        labels[static_cast<std::size_t>(i)] = a.model.result.labels[static_cast<std::size_t>(i)];
    c.add("clusters/labels", std::move(labels));
    Tensor pidx({n}), sidx({n}), endp({n});
    for (int i = 0; i < n; ++i) {
        pidx[static_cast<std::size_t>(i)] = a.patient_index[static_cast<std::size_t>(i)];
        sidx[static_cast<std::size_t>(i)] = a.step_index[static_cast<std::size_t>(i)];
        endp[static_cast<std::size_t>(i)] = a.endpoint[static_cast<std::size_t>(i)];
    }
    c.add("clusters/patient_index", std::move(pidx));
    c.add("clusters/step_index", std::move(sidx));
    c.add("clusters/endpoint", std::move(endp));
    return c;
}

inline ClusterArtifact clusters_from_checkpoint(const Checkpoint& c) {
    ClusterArtifact a;
    int k = 0;
    for (const auto& row : artifact_detail::meta_rows(c.meta_text)) {
        if (row[0] == "k") k = std::stoi(row.at(1));
        else if (row[0] == "silhouette") a.model.silhouette = std::stod(row.at(1));
        else if (row[0] == "size_cv") a.model.size_cv = std::stod(row.at(1));
        else if (row[0] == "candidate")
            a.model.candidates.push_back({std::stoi(row.at(1)), std::stod(row.at(2)),
                                          std::stod(row.at(3)), std::stod(row.at(4))});
        else if (row[0] == "dangerous") a.outcome.dangerous_cluster = std::stoi(row.at(1));
        else if (row[0] == "stable") a.outcome.stable_cluster = std::stoi(row.at(1));
        else if (row[0] == "tie") a.outcome.tie = std::stoi(row.at(1)) != 0;
        else if (row[0] == "degenerate") a.outcome.degenerate = std::stoi(row.at(1)) != 0;
        else if (row[0] == "cluster") {
            a.outcome.labels.push_back(row.at(2) == "dangerous"
                                           ? analyze::OutcomeLabel::Dangerous
                                           : row.at(2) == "stable" ? analyze::OutcomeLabel::Stable
                                                                   : analyze::OutcomeLabel::Intermediate);
            a.outcome.endpoints.dead.push_back(std::stol(row.at(3)));
            a.outcome.endpoints.surviving.push_back(std::stol(row.at(4)));
        }
    }
    const Tensor& centroids = c.require_array("clusters/centroids");
    a.model.result.k = k;
    require_shape(centroids.dim(0) == k, "clusters checkpoint: centroid count mismatch");
    a.model.result.centroids = analyze::PointMatrix::zeros(k, centroids.dim(1));
    a.model.result.centroids.data = centroids.values();
    const Tensor& labels = c.require_array("clusters/labels");
    const Tensor& pidx = c.require_array("clusters/patient_index");
    const Tensor& sidx = c.require_array("clusters/step_index");
    const Tensor& endp = c.require_array("clusters/endpoint");
    const std::size_t n = labels.size();
    require_shape(pidx.size() == n && sidx.size() == n && endp.size() == n,
                  "clusters checkpoint: index array mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        a.model.result.labels.push_back(static_cast<int>(labels[i]));
        a.patient_index.push_back(static_cast<int>(pidx[i]));
        a.step_index.push_back(static_cast<int>(sidx[i]));
        a.endpoint.push_back(endp[i] != 0.0 ? 1 : 0);
    }
    return a;
}

// ---- Embedding ---------------------------------------------------------------

inline Checkpoint embedding_to_checkpoint(const analyze::Embedding2D& e,
                                          const std::string& config_text) {
    Checkpoint c;
    c.config_text = config_text;
    c.meta_text = "artifact\tembedding\n";
    const int n = e.coords.count;
    Tensor coords({n, e.coords.dim});
    coords.values() = e.coords.data;
    c.add("embedding/coords", std::move(coords));
    Tensor pidx({n}), sidx({n}), endp({n});
    for (int i = 0; i < n; ++i) {
        pidx[static_cast<std::size_t>(i)] = e.patient_index[static_cast<std::size_t>(i)];
        sidx[static_cast<std::size_t>(i)] = e.step_index[static_cast<std::size_t>(i)];
        endp[static_cast<std::size_t>(i)] = e.endpoint[static_cast<std::size_t>(i)];
    }
    c.add("embedding/patient_index", std::move(pidx));
    c.add("embedding/step_index", std::move(sidx));
    c.add("embedding/endpoint", std::move(endp));
    return c;
}

inline analyze::Embedding2D embedding_from_checkpoint(const Checkpoint& c) {
    analyze::Embedding2D e;
    const Tensor& coords = c.require_array("embedding/coords");
    e.coords = analyze::PointMatrix::zeros(coords.dim(0), coords.dim(1));
    e.coords.data = coords.values();
    const Tensor& pidx = c.require_array("embedding/patient_index");
    const Tensor& sidx = c.require_array("embedding/step_index");
    const Tensor& endp = c.require_array("embedding/endpoint");
    for (std::size_t i = 0; i < pidx.size(); ++i) {
        e.patient_index.push_back(static_cast<int>(pidx[i]));
        e.step_index.push_back(static_cast<int>(sidx[i]));
        e.endpoint.push_back(endp[i] != 0.0 ? 1 : 0);
    }
    return e;
}

}  // namespace dsa::io
