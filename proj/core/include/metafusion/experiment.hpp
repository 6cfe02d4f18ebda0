#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "metafusion/datagen.hpp"
#include "metafusion/ensemble.hpp"
#include "metafusion/mutual.hpp"

namespace metafusion {

/// Named synthetic benchmark configuration. "-desk" variants shrink the
/// observed dimensions by 4x and the sample count to 500 so a full sweep
/// runs in minutes.
struct Preset {
    std::string name;
    std::string description;
    SynthConfig config;
    int default_reps = 100;
};

Preset get_preset(const std::string& name);  // UnknownPreset on bad names
std::vector<Preset> list_presets();

enum class Method {
    Modality1,
    Modality2,
    Early,
    Late,
    Coop,
    MetaFusion,
    BestSingle,
    BestSingleIndependent,
    Stacking,
    SimpleAvg,
    WeightedAvg,
    MajorityVote,
    WeightedVote,
};

std::string method_name(Method method);
Method parse_method(const std::string& name);  // InvalidConfig on bad names

struct ExperimentConfig {
    std::string setting;           // label written to result rows
    SynthConfig synth;
    std::vector<Method> methods;
    int repetitions = 20;
    std::uint64_t base_seed = 1;
    ModelSpec model{ModelKind::Mlp};  // nonlinear settings need the tanh students
    TrainConfig train;
    SelectionConfig selection;
    std::vector<double> rho_grid = default_rho_grid();
    WeightMode weight_mode = WeightMode::LearnFromTop;

    void validate() const;
};

struct ResultRow {
    std::string setting;
    std::string method;
    int repetition = 0;
    std::uint64_t seed = 0;
    std::string metric;  // "mse" or "error"
    double value = 0.0;
    double wall_seconds = 0.0;  // informational; excluded from CSV output
};

struct MethodSummary {
    std::string method;
    std::string metric;
    double mean = 0.0;
    double std_error = 0.0;
    int repetitions = 0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<MethodSummary> summary;
};

/// One fresh dataset per repetition (seed = base_seed + r); every requested
/// method is fitted on train, tuned on validation, scored on test.
ExperimentResult run_experiment(const ExperimentConfig& config);

enum class AblationMode { Ensembles, Weights };

/// Ensembles mode: all aggregators evaluated on one trained cohort per
/// repetition. Weights mode: per-student validation improvement of each
/// coupling rule over independent training, averaged per repetition.
ExperimentResult run_ablation(const ExperimentConfig& config, AblationMode mode);

/// CSV emission, deterministic bytes for identical configs (timing omitted).
void write_rows_csv(const std::vector<ResultRow>& rows, std::ostream& out);
void write_summary_csv(const std::vector<MethodSummary>& summary, std::ostream& out);

std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows);

}  // namespace metafusion
