#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dsa/baselines/linear_ssm.hpp"
#include "dsa/baselines/pca.hpp"
#include "dsa/baselines/vae.hpp"
#include "dsa/core/log.hpp"
#include "dsa/dssm/model.hpp"
#include "dsa/dssm/sequence.hpp"
#include "dsa/dssm/train.hpp"
#include "dsa/io/artifacts.hpp"
#include "dsa/io/config.hpp"
#include "dsa/io/report.hpp"
#include "dsa/preprocess/pipeline.hpp"
#include "dsa/synth/simulate.hpp"

namespace dsa::cli {

namespace fs = std::filesystem;

struct CommandContext {
    io::PipelineConfig config;
    std::string config_text;  // canonical serialization of the active config
    io::ArtifactStamp stamp;
    fs::path out_dir;
    fs::path cohort_path;
    fs::path checkpoint_path;
    std::string drug_tag;

    fs::path out(const std::string& name) const { return out_dir / name; }
};

namespace detail {

inline CohortTensor load_cohort(const fs::path& path) {
    return io::cohort_from_checkpoint(io::Checkpoint::load(path));
}

inline std::vector<LatentTrajectory> load_latents(const fs::path& path) {
    return io::latents_from_checkpoint(io::Checkpoint::load(path));
}

// Per-patient cluster label rows reassembled from the pooled point order.
inline std::vector<std::vector<int>> labels_per_patient(const io::ClusterArtifact& clusters,
                                                        std::size_t patient_count) {
    std::vector<std::vector<int>> rows(patient_count);
    for (std::size_t i = 0; i < clusters.model.result.labels.size(); ++i) {
        const int p = clusters.patient_index[i];
        require(p >= 0 && static_cast<std::size_t>(p) < patient_count,
                "cluster artifact: patient index out of range");
        rows[static_cast<std::size_t>(p)].push_back(clusters.model.result.labels[i]);
    }
    return rows;
}

inline std::vector<std::uint8_t> death_flags(const CohortTensor& cohort) {
    std::vector<std::uint8_t> flags;
    for (const auto& p : cohort.patients) flags.push_back(p.death_flag ? 1 : 0);
    return flags;
}

inline synth::CohortSpec synth_spec_from_config(const io::PipelineConfig& c) {
    synth::CohortSpec spec =
        c.synth_items_mode == "full" ? synth::full_scale_spec() : synth::desk_scale_spec();
    spec.patients = c.synth_patients;
    spec.min_steps = c.synth_min_steps;
    spec.max_steps = c.synth_max_steps;
    spec.target_missing_rate = c.synth_missing_rate;
    return spec;
}

inline dssm::DssmConfig dssm_config_from(const io::PipelineConfig& c, int input_dim) {
    dssm::DssmConfig cfg;
    cfg.latent_dim = c.dssm_latent_dim;
    cfg.learning_rate = c.dssm_learning_rate;
    cfg.input_dim = input_dim;
    cfg.max_steps = c.preprocess_max_steps;
    cfg.epochs = c.dssm_epochs;
    cfg.batch_size = c.dssm_batch_size;
    cfg.seed = c.seed;
    cfg.hidden_dim = c.dssm_hidden_dim;
    cfg.lstm_hidden = c.dssm_lstm_hidden;
    cfg.dropout_rate = c.dssm_dropout_rate;
    cfg.samples_per_step = c.dssm_samples_per_step;
    cfg.encoder_direction = dssm::encoder_direction_from_name(c.dssm_encoder_direction);
    cfg.grad_clip = c.dssm_grad_clip;
    return cfg;
}

inline dssm::TrainOptions train_options_from(const io::PipelineConfig& c, double lr, int epochs) {
    dssm::TrainOptions opt;
    opt.epochs = epochs;
    opt.batch_size = c.dssm_batch_size;
    opt.learning_rate = lr;
    opt.grad_clip = c.dssm_grad_clip;
    opt.samples_per_step = c.dssm_samples_per_step;
    opt.seed = c.seed;
    return opt;
}

}  // namespace detail

// ---- Subcommands ------------------------------------------------------------

inline void cmd_simulate(const CommandContext& ctx) {
    const synth::CohortSpec spec = detail::synth_spec_from_config(ctx.config);
    log_info("simulate: " + std::to_string(spec.patients) + " patients");
    auto [raw, truth] = synth::simulate_cohort(spec, ctx.config.seed);
    fs::create_directories(ctx.out_dir);
    io::write_raw_cohort(raw, ctx.out_dir, ctx.stamp);
    io::write_ground_truth(truth, ctx.out_dir, ctx.stamp);
}

inline void cmd_preprocess(const CommandContext& ctx) {
    const RawCohort raw = io::read_raw_cohort(ctx.cohort_path);
    auto selection = preprocess::select_lab_items(raw, ctx.config.preprocess_max_lab_items,
                                                  ctx.config.preprocess_corr_threshold);
    RawCohort selected;
    selected.patients = raw.patients;
    for (const auto& item : raw.items)
        if (item.kind != ItemKind::Lab) selected.items.push_back(item);
    for (const auto& item : selection.items) selected.items.push_back(item);

    preprocess::BuildRules rules{ctx.config.preprocess_min_steps, ctx.config.preprocess_max_steps};
    preprocess::BuildReport report;
    const CohortTensor cohort = preprocess::build_cohort(selected, rules, &report);
    fs::create_directories(ctx.out_dir);
    io::cohort_to_checkpoint(cohort, ctx.config_text).save(ctx.out("cohort.dsac"));

    auto out = io::open_output(ctx.out("preprocess_report.txt"));
    out << ctx.stamp.header();
    out << "ingested\t" << report.ingested << "\nkept\t" << report.kept << "\nexcluded_short\t"
        << report.excluded_short << "\nexcluded_missing_item\t" << report.excluded_missing_item
        << "\nmissing_rate\t" << io::format_double(report.missing_rate) << "\n";
    for (const auto& w : selection.warnings) out << "# warning: " << w << "\n";
    out << "# selected labs in rank order\n";
    for (const auto& item : selection.items) out << "lab\t" << item.name << "\n";
    log_info("preprocess: kept " + std::to_string(report.kept) + " patients, missing rate " +
             io::format_double(report.missing_rate));
}

inline void cmd_train(const CommandContext& ctx) {
    const CohortTensor cohort = detail::load_cohort(ctx.cohort_path);
    dssm::DssmConfig cfg = detail::dssm_config_from(ctx.config, cohort.dims());
    dssm::DssmModel model(cfg);
    const auto opt = detail::train_options_from(ctx.config, cfg.learning_rate, cfg.epochs);
    const auto trace = dssm::train_model(model, cohort.patients, opt);
    fs::create_directories(ctx.out_dir);
    io::dssm_to_checkpoint(model, ctx.config_text).save(ctx.out("dssm.dsac"));
    io::write_training_trace(ctx.out("training_trace.tsv"), trace, ctx.stamp);
    if (!trace.empty())
        log_info("train: final objective " + io::format_double(trace.back().total));
}

inline void cmd_infer(const CommandContext& ctx) {
    const CohortTensor cohort = detail::load_cohort(ctx.cohort_path);
    const dssm::DssmModel model = io::dssm_from_checkpoint(io::Checkpoint::load(ctx.checkpoint_path));
    const auto latents = dssm::infer_cohort(model, cohort, dssm::InferMode::Mean, ctx.config.seed);
    fs::create_directories(ctx.out_dir);
    io::latents_to_checkpoint(latents, ctx.config_text).save(ctx.out("latents.dsac"));
    log_info("infer: wrote " + std::to_string(latents.size()) + " trajectories");
}

inline void cmd_embed(const CommandContext& ctx) {
    const auto latents = detail::load_latents(ctx.checkpoint_path);
    const auto pooled = analyze::pool_latents(latents);
    analyze::UmapOptions opt;
    opt.n_neighbors = ctx.config.umap_neighbors;
    opt.epochs = ctx.config.umap_epochs;
    opt.trial_downsample = ctx.config.umap_downsample;
    opt.seed = ctx.config.seed;
    const auto embedding = analyze::umap_embed(pooled, opt);
    fs::create_directories(ctx.out_dir);
    io::embedding_to_checkpoint(embedding, ctx.config_text).save(ctx.out("embedding.dsac"));
    log_info("embed: " + std::to_string(embedding.coords.count) + " points");
}

inline void cmd_cluster(const CommandContext& ctx) {
    const auto latents = detail::load_latents(ctx.checkpoint_path);
    const CohortTensor cohort = detail::load_cohort(ctx.cohort_path);
    require(latents.size() == cohort.patients.size(),
            "cluster: latents do not match the cohort");
    const auto pooled = analyze::pool_latents(latents);
    io::ClusterArtifact artifact;
    artifact.model = analyze::kmeans_fit(pooled.points, ctx.config.k_candidates, ctx.config.seed,
                                         ctx.config.silhouette_subsample);
    artifact.patient_index = pooled.patient_index;
    artifact.step_index = pooled.step_index;
    artifact.endpoint = pooled.endpoint;

    std::vector<int> endpoint_clusters;
    std::vector<std::uint8_t> endpoint_death;
    for (int i = 0; i < pooled.points.count; ++i) {
        if (!pooled.endpoint[static_cast<std::size_t>(i)]) continue;
        endpoint_clusters.push_back(artifact.model.result.labels[static_cast<std::size_t>(i)]);
        endpoint_death.push_back(
            cohort.patients[static_cast<std::size_t>(pooled.patient_index[static_cast<std::size_t>(i)])]
                    .death_flag
                ? 1
                : 0);
    }
    artifact.outcome = analyze::label_clusters_by_outcome(endpoint_clusters, endpoint_death,
                                                          artifact.model.result.k);
    fs::create_directories(ctx.out_dir);
    io::clusters_to_checkpoint(artifact, ctx.config_text).save(ctx.out("clusters.dsac"));
    io::write_cluster_report(ctx.out("cluster_report.tsv"), artifact, ctx.stamp);
    log_info("cluster: k=" + std::to_string(artifact.model.result.k) + " silhouette=" +
             io::format_double(artifact.model.silhouette));
}

inline void cmd_transitions(const CommandContext& ctx) {
    const CohortTensor cohort = detail::load_cohort(ctx.cohort_path);
    const auto clusters = io::clusters_from_checkpoint(io::Checkpoint::load(ctx.checkpoint_path));
    const auto rows = detail::labels_per_patient(clusters, cohort.patients.size());
    const auto flags = detail::death_flags(cohort);
    fs::create_directories(ctx.out_dir);
    for (auto pop : {analyze::Population::All, analyze::Population::Dead,
                     analyze::Population::Surviving}) {
        const auto table = analyze::transition_table(rows, flags, clusters.model.result.k, pop);
        io::write_transition_table(
            ctx.out("transitions_" + analyze::population_name(pop) + ".tsv"), table, ctx.stamp);
    }
}

inline void cmd_signals(const CommandContext& ctx) {
    const CohortTensor cohort = detail::load_cohort(ctx.cohort_path);
    const auto clusters = io::clusters_from_checkpoint(io::Checkpoint::load(ctx.checkpoint_path));
    const auto rows = detail::labels_per_patient(clusters, cohort.patients.size());
    const auto report =
        analyze::signal_report(cohort, rows, clusters.model.result.k, ctx.config.top_n);
    fs::create_directories(ctx.out_dir);
    io::write_signal_report(ctx.out("signals_all.tsv"), report, ctx.stamp);
}

inline void cmd_baseline(const CommandContext& ctx, const std::string& kind) {
    const CohortTensor cohort = detail::load_cohort(ctx.cohort_path);
    fs::create_directories(ctx.out_dir);
    if (kind == "pca") {
        const auto model = baselines::fit_pca(baselines::pooled_rows(cohort),
                                              ctx.config.baseline_latent_dim);
        std::vector<LatentTrajectory> latents;
        for (const auto& p : cohort.patients) latents.push_back(baselines::project_series(model, p));
        io::pca_to_checkpoint(model, ctx.config_text).save(ctx.out("baseline_pca.dsac"));
        io::latents_to_checkpoint(latents, ctx.config_text).save(ctx.out("latents_pca.dsac"));
    } else if (kind == "vae") {
        baselines::VaeConfig cfg;
        cfg.latent_dim = ctx.config.baseline_latent_dim;
        cfg.input_dim = cohort.dims();
        cfg.learning_rate = ctx.config.vae_learning_rate;
        cfg.epochs = ctx.config.vae_epochs;
        cfg.seed = ctx.config.seed;
        baselines::VaeFit fit{baselines::VaeModel(cfg), {}};
        if (ctx.config.vae_grid) {
            auto grid = baselines::fit_vae_grid(cohort, cfg, {0.001, 0.005, 0.01});
            auto out = io::open_output(ctx.out("vae_grid_report.tsv"));
            out << ctx.stamp.header() << "learning_rate\tfinal_elbo\tselected\n";
            for (const auto& entry : grid.entries)
                out << io::format_double(entry.learning_rate) << '\t'
                    << io::format_double(entry.final_elbo) << '\t'
                    << (entry.learning_rate == grid.best_rate ? 1 : 0) << "\n";
            fit = std::move(grid.best);
        } else {
            fit = baselines::fit_vae(cohort, cfg);
        }
        std::vector<LatentTrajectory> latents;
        for (const auto& p : cohort.patients)
            latents.push_back(baselines::vae_project_series(fit.model, p));
        io::vae_to_checkpoint(fit.model, ctx.config_text).save(ctx.out("baseline_vae.dsac"));
        io::latents_to_checkpoint(latents, ctx.config_text).save(ctx.out("latents_vae.dsac"));
        io::write_training_trace(ctx.out("vae_training_trace.tsv"), fit.trace, ctx.stamp);
    } else if (kind == "linear-ssm") {
        baselines::LinearSsmConfig cfg;
        cfg.latent_dim = ctx.config.baseline_latent_dim;
        cfg.input_dim = cohort.dims();
        cfg.learning_rate = ctx.config.linear_learning_rate;
        cfg.epochs = ctx.config.linear_epochs;
        cfg.batch_size = ctx.config.dssm_batch_size;
        cfg.seed = ctx.config.seed;
        cfg.encoder_direction = dssm::encoder_direction_from_name(ctx.config.dssm_encoder_direction);
        baselines::LinearSsm model(cfg);
        const auto opt = detail::train_options_from(ctx.config, cfg.learning_rate, cfg.epochs);
        const auto trace = dssm::train_model(model, cohort.patients, opt);
        const auto latents =
            dssm::infer_cohort(model, cohort, dssm::InferMode::Mean, ctx.config.seed);
        io::linear_ssm_to_checkpoint(model, ctx.config_text).save(ctx.out("baseline_linear_ssm.dsac"));
        io::latents_to_checkpoint(latents, ctx.config_text).save(ctx.out("latents_linear_ssm.dsac"));
        io::write_training_trace(ctx.out("linear_ssm_training_trace.tsv"), trace, ctx.stamp);
    } else {
        throw ConfigError("baseline: unknown kind " + kind);
    }
    log_info("baseline " + kind + ": done");
}

// Bundles the interpretation outputs. Expects latents.dsac, clusters.dsac and
// embedding.dsac in the output directory (as produced by infer/cluster/embed)
// plus the cohort checkpoint named by --cohort.
inline void cmd_report(const CommandContext& ctx) {
    const CohortTensor cohort = detail::load_cohort(ctx.cohort_path);
    const auto clusters = io::clusters_from_checkpoint(io::Checkpoint::load(ctx.out("clusters.dsac")));
    const auto embedding =
        io::embedding_from_checkpoint(io::Checkpoint::load(ctx.out("embedding.dsac")));
    const auto rows = detail::labels_per_patient(clusters, cohort.patients.size());
    const auto flags = detail::death_flags(cohort);
    const int k = clusters.model.result.k;

    io::write_endpoint_counts(ctx.out("endpoint_counts.tsv"), clusters.outcome, ctx.stamp);
    for (auto pop : {analyze::Population::All, analyze::Population::Dead,
                     analyze::Population::Surviving}) {
        const auto table = analyze::transition_table(rows, flags, k, pop);
        io::write_transition_table(
            ctx.out("transitions_" + analyze::population_name(pop) + ".tsv"), table, ctx.stamp);
    }
    io::write_signal_report(ctx.out("signals_all.tsv"),
                            analyze::signal_report(cohort, rows, k, ctx.config.top_n), ctx.stamp);
    require(clusters.model.result.labels.size() ==
                static_cast<std::size_t>(embedding.coords.count),
            "report: embedding and cluster artifacts disagree on point count");
    io::write_plotdata(ctx.out("plotdata.tsv"), embedding, clusters.model.result.labels, cohort,
                       ctx.stamp);

    // Per-drug reports: a single tag when --drug-tag is given, otherwise every
    // tag present in the cohort.
    std::vector<std::string> tags;
    if (!ctx.drug_tag.empty()) {
        tags.push_back(ctx.drug_tag);
    } else {
        std::set<std::string> seen;
        for (const auto& p : cohort.patients)
            for (const auto& tag : p.drug_tags) seen.insert(tag);
        tags.assign(seen.begin(), seen.end());
    }
    for (const auto& tag : tags) {
        const auto sub = analyze::subcohort_analysis(cohort, rows, k, tag, ctx.config.top_n_drug);
        io::write_subcohort_endpoints(ctx.out("endpoint_counts_drug_" + tag + ".tsv"), sub,
                                      clusters.outcome.labels, ctx.stamp);
        if (!sub.empty)
            io::write_signal_report(ctx.out("signals_drug_" + tag + ".tsv"), sub.signals,
                                    ctx.stamp, tag);
        else
            io::write_signal_report(ctx.out("signals_drug_" + tag + ".tsv"),
                                    analyze::SignalReport{{}, ctx.config.top_n_drug}, ctx.stamp,
                                    tag);
    }
    log_info("report: wrote bundle for k=" + std::to_string(k));
}

// ---- Entry point --------------------------------------------------------------

inline int run(std::vector<std::string> args) {
    CLI::App app{"deep state-space analysis pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", cohort, checkpoint, drug_tag, baseline_kind;
    std::int64_t seed_override = -1;

    app.add_option("--config", config_path, "pipeline configuration file");
    app.add_option("--seed", seed_override, "override pipeline.seed");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--cohort", cohort, "cohort input (raw table dir or cohort checkpoint)");
    app.add_option("--checkpoint", checkpoint, "model/latents/clusters checkpoint input");
    app.add_option("--drug-tag", drug_tag, "restrict per-drug reports to one tag");

    auto* simulate = app.add_subcommand("simulate", "draw a synthetic raw cohort");
    auto* preprocess_cmd = app.add_subcommand("preprocess", "build the model-ready cohort tensor");
    auto* train = app.add_subcommand("train", "train the deep state-space model");
    auto* infer = app.add_subcommand("infer", "estimate posterior latent trajectories");
    auto* embed = app.add_subcommand("embed", "2-D embedding of pooled latents");
    auto* cluster = app.add_subcommand("cluster", "k-means clustering with outcome labels");
    auto* transitions = app.add_subcommand("transitions", "inter-cluster transition tables");
    auto* signals = app.add_subcommand("signals", "per-cluster abnormality signal rankings");
    auto* baseline = app.add_subcommand("baseline", "fit a comparison latent estimator");
    baseline->add_option("kind", baseline_kind, "pca | vae | linear-ssm")->required();
    auto* report = app.add_subcommand("report", "bundle endpoint/transition/signal/plot files");

    try {
        std::vector<const char*> argv;
        argv.push_back("dsa");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        CommandContext ctx;
        ctx.config = config_path.empty() ? io::PipelineConfig{}
                                         : io::load_config_file(config_path);
        if (seed_override >= 0) ctx.config.seed = static_cast<std::uint64_t>(seed_override);
        ctx.config_text = io::serialize_config(ctx.config);
        ctx.stamp = {io::config_hash(ctx.config), ctx.config.seed, 1};
        ctx.out_dir = out_dir;
        ctx.cohort_path = cohort;
        ctx.checkpoint_path = checkpoint;
        ctx.drug_tag = drug_tag;

        auto need = [](const fs::path& p, const std::string& flag) {
            if (p.empty()) throw ConfigError("missing required flag " + flag);
        };

        if (simulate->parsed()) {
            cmd_simulate(ctx);
        } else if (preprocess_cmd->parsed()) {
            need(ctx.cohort_path, "--cohort");
            cmd_preprocess(ctx);
        } else if (train->parsed()) {
            need(ctx.cohort_path, "--cohort");
            cmd_train(ctx);
        } else if (infer->parsed()) {
            need(ctx.cohort_path, "--cohort");
            need(ctx.checkpoint_path, "--checkpoint");
            cmd_infer(ctx);
        } else if (embed->parsed()) {
            need(ctx.checkpoint_path, "--checkpoint");
            cmd_embed(ctx);
        } else if (cluster->parsed()) {
            need(ctx.cohort_path, "--cohort");
            need(ctx.checkpoint_path, "--checkpoint");
            cmd_cluster(ctx);
        } else if (transitions->parsed()) {
            need(ctx.cohort_path, "--cohort");
            need(ctx.checkpoint_path, "--checkpoint");
            cmd_transitions(ctx);
        } else if (signals->parsed()) {
            need(ctx.cohort_path, "--cohort");
            need(ctx.checkpoint_path, "--checkpoint");
            cmd_signals(ctx);
        } else if (baseline->parsed()) {
            need(ctx.cohort_path, "--cohort");
            cmd_baseline(ctx, baseline_kind);
        } else if (report->parsed()) {
            need(ctx.cohort_path, "--cohort");
            cmd_report(ctx);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        // Diagnostics dump next to the other artifacts when possible.
        try {
            fs::create_directories(out_dir);
            auto diag = io::open_output(fs::path(out_dir) / "diagnostics.txt");
            diag << "numeric failure\n" << e.what() << "\n";
        } catch (...) {
        }
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error (data): " << e.what() << "\n";
        return 2;
    }
}

}  // namespace dsa::cli
