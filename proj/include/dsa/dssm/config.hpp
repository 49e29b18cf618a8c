#pragma once

#include <cstdint>
#include <string>

#include "dsa/core/error.hpp"

namespace dsa::dssm {

enum class EncoderDirection { Forward, Backward };

inline std::string encoder_direction_name(EncoderDirection d) {
    return d == EncoderDirection::Backward ? "backward" : "forward";
}

inline EncoderDirection encoder_direction_from_name(const std::string& s) {
    if (s == "backward") return EncoderDirection::Backward;
    if (s == "forward") return EncoderDirection::Forward;
    throw ConfigError("unknown encoder direction: " + s);
}

enum class InferMode { Mean, Sample };

struct DssmConfig {
    int latent_dim = 8;
    double learning_rate = 0.005;
    int input_dim = 0;   // D; set from the cohort
    int max_steps = 238;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 7;

    // Architecture knobs the paper leaves open.
    int hidden_dim = 64;
    int lstm_hidden = 64;
    double dropout_rate = 0.1;
    int samples_per_step = 1;
    EncoderDirection encoder_direction = EncoderDirection::Backward;
    double grad_clip = 10.0;
    double variance_floor = 1e-6;

    void validate() const {
        require(latent_dim >= 1, "DssmConfig: latent_dim must be positive");
        require(input_dim >= 1, "DssmConfig: input_dim must be positive");
        require(max_steps >= 1, "DssmConfig: max_steps must be positive");
        require(hidden_dim >= 1 && lstm_hidden >= 1, "DssmConfig: hidden sizes must be positive");
        require(learning_rate > 0.0, "DssmConfig: learning_rate must be positive");
        require(dropout_rate >= 0.0 && dropout_rate < 1.0, "DssmConfig: dropout_rate in [0,1)");
        require(samples_per_step >= 1, "DssmConfig: samples_per_step must be >= 1");
        require(variance_floor > 0.0, "DssmConfig: variance_floor must be positive");
    }
};

}  // namespace dsa::dssm
