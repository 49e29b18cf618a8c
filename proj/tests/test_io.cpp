#include <catch2/catch.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dsa/cli/pipeline.hpp"
#include "dsa/io/artifacts.hpp"
#include "dsa/io/checkpoint.hpp"
#include "dsa/io/config.hpp"
#include "dsa/io/tables.hpp"
#include "dsa/preprocess/pipeline.hpp"
#include "dsa/synth/simulate.hpp"

using namespace dsa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string mini_config_text() {
    return "[pipeline]\n"
           "seed = 11\n"
           "[synth]\n"
           "patients = 30\n"
           "min_steps = 12\n"
           "max_steps = 20\n"
           "[preprocess]\n"
           "min_steps = 12\n"
           "max_steps = 20\n"
           "max_lab_items = 13\n"
           "[dssm]\n"
           "latent_dim = 2\n"
           "epochs = 2\n"
           "batch_size = 10\n"
           "hidden_dim = 12\n"
           "lstm_hidden = 12\n"
           "[baselines]\n"
           "latent_dim = 2\n"
           "vae_epochs = 2\n"
           "linear_epochs = 2\n"
           "[analyze]\n"
           "umap_epochs = 50\n"
           "k_candidates = 3\n";
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact", "[io]") {
    TempDir dir("dsa_ckpt_roundtrip");
    io::Checkpoint c;
    c.config_text = "some config";
    c.meta_text = "artifact\ttest\n";
    Tensor weird({2, 3});
    weird.values() = {0.0, -0.0, 1e-308, -1.7976931348623157e308, 3.141592653589793, 2e-310};
    c.add("weird", weird);
    Tensor big({64});
    RandomStream rng(5);
    for (auto& v : big.values()) v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    c.add("big", big);
    c.save(dir.path / "x.dsac");

    const io::Checkpoint back = io::Checkpoint::load(dir.path / "x.dsac");
    REQUIRE(back.config_text == c.config_text);
    REQUIRE(back.meta_text == c.meta_text);
    REQUIRE(back.arrays.size() == 2);
    for (std::size_t a = 0; a < 2; ++a) {
        REQUIRE(back.arrays[a].first == c.arrays[a].first);
        REQUIRE(back.arrays[a].second.shape() == c.arrays[a].second.shape());
        const auto& x = c.arrays[a].second.values();
        const auto& y = back.arrays[a].second.values();
        REQUIRE(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
    }

    SECTION("double save produces identical bytes") {
        c.save(dir.path / "y.dsac");
        REQUIRE(file_bytes(dir.path / "x.dsac") == file_bytes(dir.path / "y.dsac"));
    }
}

TEST_CASE("checkpoint corruption is detected with an offset", "[io]") {
    TempDir dir("dsa_ckpt_corrupt");
    io::Checkpoint c;
    c.config_text = "cfg";
    c.add("a", Tensor({4}, 1.5));
    const fs::path path = dir.path / "x.dsac";
    c.save(path);

    SECTION("bad magic") {
        auto bytes = file_bytes(path);
        bytes[0] = 'X';
        std::ofstream(path, std::ios::binary) << bytes;
        REQUIRE_THROWS_WITH(io::Checkpoint::load(path), Catch::Contains("magic"));
    }
    SECTION("unsupported version") {
        auto bytes = file_bytes(path);
        bytes[8] = 99;
        std::ofstream(path, std::ios::binary) << bytes;
        REQUIRE_THROWS_WITH(io::Checkpoint::load(path), Catch::Contains("version"));
    }
    SECTION("truncated payload names the offset") {
        auto bytes = file_bytes(path);
        bytes.resize(bytes.size() - 12);
        std::ofstream(path, std::ios::binary) << bytes;
        REQUIRE_THROWS_WITH(io::Checkpoint::load(path), Catch::Contains("offset"));
    }
    SECTION("flipped payload byte fails the checksum") {
        auto bytes = file_bytes(path);
        bytes[bytes.size() - 20] ^= 0x40;
        std::ofstream(path, std::ios::binary) << bytes;
        REQUIRE_THROWS_AS(io::Checkpoint::load(path), DataError);
    }
    SECTION("errors map to the data-contract exit code") {
        auto bytes = file_bytes(path);
        bytes[0] = 'X';
        std::ofstream(path, std::ios::binary) << bytes;
        TempDir out("dsa_ckpt_corrupt_out");
        const int code = cli::run({"--cohort", path.string(), "--out-dir", out.path.string(),
                                   "train"});
        REQUIRE(code == 2);
    }
}

TEST_CASE("pipeline config parsing", "[io]") {
    SECTION("defaults round trip through serialization") {
        io::PipelineConfig c;
        const auto text = io::serialize_config(c);
        const auto parsed = io::parse_config(text);
        REQUIRE(io::serialize_config(parsed) == text);
        REQUIRE(io::config_hash(parsed) == io::config_hash(c));
    }
    SECTION("unknown keys are rejected") {
        REQUIRE_THROWS_AS(io::parse_config("[dssm]\nlatent_dmi = 8\n"), ConfigError);
        REQUIRE_THROWS_AS(io::parse_config("[nosuch]\nx = 1\n"), ConfigError);
    }
    SECTION("off-grid values are rejected unless explicitly allowed") {
        REQUIRE_THROWS_AS(io::parse_config("[dssm]\nlatent_dim = 5\n"), ConfigError);
        REQUIRE_THROWS_AS(io::parse_config("[dssm]\nlearning_rate = 0.02\n"), ConfigError);
        REQUIRE_THROWS_AS(io::parse_config("[analyze]\nn_neighbors = 11\n"), ConfigError);
        const auto c = io::parse_config(
            "[pipeline]\nallow_off_grid = true\n[dssm]\nlatent_dim = 5\n");
        REQUIRE(c.dssm_latent_dim == 5);
    }
    SECTION("lists and bad numbers") {
        const auto c = io::parse_config("[analyze]\nk_candidates = 2,3,4\n");
        REQUIRE(c.k_candidates == std::vector<int>{2, 3, 4});
        REQUIRE_THROWS_AS(io::parse_config("[synth]\npatients = many\n"), ConfigError);
    }
}

TEST_CASE("raw cohort tables round trip", "[io]") {
    TempDir dir("dsa_raw_tables");
    synth::CohortSpec spec = synth::desk_scale_spec();
    spec.patients = 4;
    spec.min_steps = 8;
    spec.max_steps = 12;
    auto [raw, truth] = synth::simulate_cohort(spec, 3);
    io::write_raw_cohort(raw, dir.path, {});
    io::write_ground_truth(truth, dir.path, {});
    const RawCohort back = io::read_raw_cohort(dir.path);
    REQUIRE(back.patients.size() == raw.patients.size());
    REQUIRE(back.items.size() == raw.items.size());
    for (std::size_t i = 0; i < raw.patients.size(); ++i) {
        REQUIRE(back.patients[i].patient_id == raw.patients[i].patient_id);
        REQUIRE(back.patients[i].gender == raw.patients[i].gender);
        REQUIRE(back.patients[i].death_flag == raw.patients[i].death_flag);
        REQUIRE(back.patients[i].drug_tags == raw.patients[i].drug_tags);
        REQUIRE(back.patients[i].observations.size() == raw.patients[i].observations.size());
        for (std::size_t j = 0; j < raw.patients[i].observations.size(); ++j) {
            REQUIRE(back.patients[i].observations[j].date == raw.patients[i].observations[j].date);
            REQUIRE(back.patients[i].observations[j].item == raw.patients[i].observations[j].item);
            REQUIRE(back.patients[i].observations[j].value ==
                    raw.patients[i].observations[j].value);
        }
    }
}

TEST_CASE("model checkpoints reproduce inference bit for bit", "[io]") {
    TempDir dir("dsa_model_ckpt");
    dssm::DssmConfig cfg;
    cfg.latent_dim = 2;
    cfg.input_dim = 5;
    cfg.hidden_dim = 8;
    cfg.lstm_hidden = 8;
    dssm::DssmModel model(cfg);

    synth::CohortSpec spec = synth::desk_scale_spec();
    spec.patients = 2;
    spec.min_steps = 10;
    spec.max_steps = 14;
    auto [raw, truth] = synth::simulate_cohort(spec, 9);
    preprocess::BuildRules rules{10, 14};
    auto cohort = preprocess::build_cohort(raw, rules);
    // Reduce to 5 dims for this small model.
    cohort.items.resize(5);
    for (auto& p : cohort.patients) {
        ObservationSeries s;
        s.patient_id = p.patient_id;
        s.steps = p.steps;
        s.dims = 5;
        for (int t = 0; t < p.steps; ++t)
            for (int d = 0; d < 5; ++d) {
                s.values.push_back(p.value_at(t, d));
                s.mask.push_back(p.mask_at(t, d));
                s.signal.push_back(p.signal_at(t, d));
            }
        p = s;
    }

    const auto before = dssm::infer_states(model, cohort.patients[0], dssm::InferMode::Mean);
    io::dssm_to_checkpoint(model, "cfg").save(dir.path / "m.dsac");
    const auto loaded = io::dssm_from_checkpoint(io::Checkpoint::load(dir.path / "m.dsac"));
    const auto after = dssm::infer_states(loaded, cohort.patients[0], dssm::InferMode::Mean);
    REQUIRE(after.means == before.means);
    REQUIRE(after.variances == before.variances);

    SECTION("cohort checkpoints preserve tensors exactly") {
        const auto ck = io::cohort_to_checkpoint(cohort, "cfg");
        ck.save(dir.path / "c.dsac");
        const auto back = io::cohort_from_checkpoint(io::Checkpoint::load(dir.path / "c.dsac"));
        REQUIRE(back.patients.size() == cohort.patients.size());
        for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
            REQUIRE(back.patients[i].values == cohort.patients[i].values);
            REQUIRE(back.patients[i].mask == cohort.patients[i].mask);
            REQUIRE(back.patients[i].signal == cohort.patients[i].signal);
            REQUIRE(back.patients[i].drug_tags == cohort.patients[i].drug_tags);
        }
    }
}

TEST_CASE("cli simulate is byte deterministic", "[io]") {
    TempDir a("dsa_cli_sim_a"), b("dsa_cli_sim_b");
    TempDir cfgdir("dsa_cli_simcfg");
    const fs::path cfg = cfgdir.path / "mini.cfg";
    std::ofstream(cfg) << mini_config_text();
    REQUIRE(cli::run({"--config", cfg.string(), "--seed", "7", "--out-dir", a.path.string(),
                      "simulate"}) == 0);
    REQUIRE(cli::run({"--config", cfg.string(), "--seed", "7", "--out-dir", b.path.string(),
                      "simulate"}) == 0);
    for (const auto* name : {"observations.tsv", "patients.tsv", "items.tsv", "truth.tsv"})
        REQUIRE(file_bytes(a.path / name) == file_bytes(b.path / name));
}

TEST_CASE("cli full mini pipeline produces the report bundle", "[io]") {
    TempDir dir("dsa_cli_mini");
    TempDir cfgdir("dsa_cli_minicfg");
    const fs::path cfg = cfgdir.path / "mini.cfg";
    std::ofstream(cfg) << mini_config_text();
    const std::string c = cfg.string();
    const std::string out = dir.path.string();
    const std::string cohort_ck = (dir.path / "cohort.dsac").string();

    REQUIRE(cli::run({"--config", c, "--out-dir", out, "simulate"}) == 0);
    REQUIRE(cli::run({"--config", c, "--cohort", out, "--out-dir", out, "preprocess"}) == 0);
    REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--out-dir", out, "train"}) == 0);
    REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--checkpoint",
                      (dir.path / "dssm.dsac").string(), "--out-dir", out, "infer"}) == 0);
    REQUIRE(cli::run({"--config", c, "--checkpoint", (dir.path / "latents.dsac").string(),
                      "--out-dir", out, "embed"}) == 0);
    REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--checkpoint",
                      (dir.path / "latents.dsac").string(), "--out-dir", out, "cluster"}) == 0);
    REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--checkpoint",
                      (dir.path / "clusters.dsac").string(), "--out-dir", out, "transitions"}) ==
            0);
    REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--checkpoint",
                      (dir.path / "clusters.dsac").string(), "--out-dir", out, "signals"}) == 0);
    for (const auto* kind : {"pca", "vae", "linear-ssm"})
        REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--out-dir", out, "baseline",
                          kind}) == 0);
    REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--out-dir", out, "report"}) == 0);

    for (const auto* name :
         {"cohort.dsac", "dssm.dsac", "latents.dsac", "embedding.dsac", "clusters.dsac",
          "training_trace.tsv", "cluster_report.tsv", "transitions_all.tsv",
          "transitions_dead.tsv", "transitions_surviving.tsv", "signals_all.tsv",
          "endpoint_counts.tsv", "plotdata.tsv", "baseline_pca.dsac", "latents_pca.dsac",
          "baseline_vae.dsac", "latents_vae.dsac", "baseline_linear_ssm.dsac",
          "latents_linear_ssm.dsac"})
        REQUIRE(fs::exists(dir.path / name));

    SECTION("grand-total percentages sum to 100") {
        std::ifstream in(dir.path / "transitions_all.tsv");
        std::string line;
        double sum = 0.0;
        bool in_percent = false;
        while (std::getline(in, line)) {
            if (line.rfind("# section=", 0) == 0)
                in_percent = line == "# section=percent_of_grand_total";
            if (!in_percent || line.empty() || line[0] == '#' ||
                line.rfind("from", 0) == 0)
                continue;
            const auto f = io::split_tabs(line);
            for (std::size_t i = 1; i < f.size(); ++i) sum += std::stod(f[i]);
        }
        REQUIRE(sum == Approx(100.0).margin(1e-9));
    }

    SECTION("per-drug reports exist for present tags and the empty marker works") {
        bool any_drug = false;
        for (const auto& entry : fs::directory_iterator(dir.path))
            if (entry.path().filename().string().rfind("signals_drug_", 0) == 0) any_drug = true;
        REQUIRE(any_drug);
        REQUIRE(cli::run({"--config", c, "--cohort", cohort_ck, "--out-dir", out, "--drug-tag",
                          "no_such_drug", "report"}) == 0);
        const auto marker =
            file_bytes(dir.path / "endpoint_counts_drug_no_such_drug.tsv");
        REQUIRE(marker.find("empty_subcohort=true") != std::string::npos);
    }

    SECTION("usage errors exit with code 1") {
        REQUIRE(cli::run({"--config", c, "train"}) == 1);          // missing --cohort
        REQUIRE(cli::run({"definitely-not-a-command"}) == 1);      // unknown subcommand
    }
}
