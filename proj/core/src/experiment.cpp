#include "metafusion/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>

#include "metafusion/baselines.hpp"
#include "metafusion/csv.hpp"
#include "metafusion/pipeline.hpp"

namespace metafusion {

namespace {

SynthConfig base_setting(const std::string& name) {
    SynthConfig c;
    c.n = 2000;
    if (name == "1.1") {
        c.weight_x = c.weight_z = 1.0;
        c.latent_x = 20;
        c.latent_z = 30;
        c.observed_x = 500;
        c.observed_z = 400;
        c.noise_x = c.noise_z = 0.4;
    } else if (name == "1.2" || name == "1.3") {
        c.weight_x = c.weight_z = c.weight_interaction = 1.0;
        c.f_x = Transform::QuadraticMinusLinear;
        c.latent_x = 20;
        c.latent_z = 20;
        c.observed_x = 2000;
        c.observed_z = 100;
        c.noise_x = name == "1.3" ? 0.5 : 0.1;
        c.noise_z = 0.1;
    } else if (name == "2.1") {
        // only the shared component drives the label
        c.weight_x = c.weight_z = 0.0;
        c.weight_shared = 1.0;
        c.latent_x = 50;
        c.latent_z = 30;
        c.latent_shared = 20;
        c.observed_x = 500;
        c.observed_z = 400;
        c.noise_x = c.noise_z = 0.4;
    } else if (name == "2.2" || name == "2.3") {
        c.weight_x = c.weight_z = 0.0;
        c.weight_shared = 1.0;
        c.f_shared = Transform::QuadraticMinusLinear;
        c.latent_x = 50;
        c.latent_z = 30;
        c.latent_shared = 20;
        c.observed_x = 2000;
        c.observed_z = 400;
        c.noise_x = name == "2.3" ? 0.5 : 0.3;
        c.noise_z = 0.3;
    } else {
        throw UnknownPreset("unknown preset \"" + name + "\"");
    }
    return c;
}

std::string setting_description(const std::string& name) {
    if (name == "1.1") return "linear, modality-specific signal only";
    if (name == "1.2") return "nonlinear first modality with interactions";
    if (name == "1.3") return "like 1.2, noisier first modality";
    if (name == "2.1") return "linear, shared signal only";
    if (name == "2.2") return "nonlinear shared signal";
    if (name == "2.3") return "like 2.2, noisier first modality";
    return "";
}

}  // namespace

Preset get_preset(const std::string& name) {
    std::string base = name;
    bool desk = false;
    if (base.size() > 5 && base.substr(base.size() - 5) == "-desk") {
        desk = true;
        base = base.substr(0, base.size() - 5);
    }
    Preset preset;
    preset.name = name;
    preset.config = base_setting(base);
    preset.description = setting_description(base);
    preset.default_reps = 100;
    if (desk) {
        // Scale the latent dimensions down together with n and the observed
        // dims: shrinking only n and the observed dims would leave the
        // interaction terms unidentifiable and silently change which fusion
        // strategy can win.
        preset.config.n = 500;
        preset.config.observed_x /= 4;
        preset.config.observed_z /= 4;
        preset.config.latent_x = std::max<Index>(1, preset.config.latent_x / 2);
        preset.config.latent_z = std::max<Index>(1, preset.config.latent_z / 2);
        preset.config.latent_shared = preset.config.latent_shared / 2;
        // The interaction component is pure noise for every fitted method at
        // this sample size; at half weight it still shapes the setting but no
        // longer swamps the between-method differences.
        preset.config.weight_interaction *= 0.5;
        preset.default_reps = 20;
        preset.description += " (desk scale)";
    }
    return preset;
}

std::vector<Preset> list_presets() {
    std::vector<Preset> presets;
    for (const char* base : {"1.1", "1.2", "1.3", "2.1", "2.2", "2.3"}) {
        presets.push_back(get_preset(base));
        presets.push_back(get_preset(std::string(base) + "-desk"));
    }
    return presets;
}

std::string method_name(Method method) {
    switch (method) {
        case Method::Modality1: return "modality-1";
        case Method::Modality2: return "modality-2";
        case Method::Early: return "early";
        case Method::Late: return "late";
        case Method::Coop: return "coop";
        case Method::MetaFusion: return "meta-fusion";
        case Method::BestSingle: return "best-single";
        case Method::BestSingleIndependent: return "best-single-independent";
        case Method::Stacking: return "stacking";
        case Method::SimpleAvg: return "simple-avg";
        case Method::WeightedAvg: return "weighted-avg";
        case Method::MajorityVote: return "majority-vote";
        case Method::WeightedVote: return "weighted-vote";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (int m = 0; m <= static_cast<int>(Method::WeightedVote); ++m)
        if (method_name(static_cast<Method>(m)) == name) return static_cast<Method>(m);
    throw InvalidConfig("unknown method \"" + name + "\"");
}

void ExperimentConfig::validate() const {
    if (repetitions < 1) throw InvalidConfig("ExperimentConfig: repetitions must be >= 1");
    if (methods.empty()) throw InvalidConfig("ExperimentConfig: method list is empty");
    synth.validate();
}

namespace {

struct EvalData {
    std::vector<Matrix> val_mods, test_mods;
    Vector val_values, test_values;
    std::vector<int> val_classes, test_classes;
    TrainingTargets val_targets, test_targets;
};

EvalData eval_data(const MultimodalDataset& ds, const Task& task) {
    EvalData d;
    for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
        d.val_mods.push_back(ds.modality_rows(m, Split::Val));
        d.test_mods.push_back(ds.modality_rows(m, Split::Test));
    }
    if (task.kind == TaskKind::Regression) {
        d.val_values = ds.label_rows(Split::Val);
        d.test_values = ds.label_rows(Split::Test);
        d.val_targets.values = &d.val_values;
        d.test_targets.values = &d.test_values;
    } else {
        d.val_classes = ds.class_label_rows(Split::Val);
        d.test_classes = ds.class_label_rows(Split::Test);
        d.val_targets.classes = &d.val_classes;
        d.test_targets.classes = &d.test_classes;
    }
    return d;
}

double score(const Task& task, const Matrix& preds, const TrainingTargets& targets) {
    if (task.kind == TaskKind::Regression)
        return (preds.col(0) - *targets.values).squaredNorm() / static_cast<double>(preds.rows());
    return misclassification_rate(preds, *targets.classes);
}

/// Cohort-derived state shared by the ensemble-style methods of one rep.
struct CohortArtifacts {
    MetaFusionModel model;
    std::vector<Matrix> val_preds, test_preds;          // trained cohort
    std::vector<Matrix> ind_val_preds, ind_test_preds;  // independently trained twin
};

bool needs_cohort(Method m) {
    switch (m) {
        case Method::MetaFusion:
        case Method::BestSingle:
        case Method::BestSingleIndependent:
        case Method::Stacking:
        case Method::SimpleAvg:
        case Method::WeightedAvg:
        case Method::MajorityVote:
        case Method::WeightedVote:
            return true;
        default:
            return false;
    }
}

CohortArtifacts make_artifacts(const ExperimentConfig& config, const MultimodalDataset& ds,
                               const Task& task, const TrainConfig& tc, const EvalData& data,
                               bool want_independent) {
    CohortArtifacts art;
    art.model = fit_meta_fusion(ds, config.model, task, tc, config.selection, config.rho_grid,
                                config.weight_mode);
    const TransformCache val_cache = transform_all(art.model.state.cohort.banks, data.val_mods);
    const TransformCache test_cache = transform_all(art.model.state.cohort.banks, data.test_mods);
    art.val_preds = cohort_predictions(art.model.state.cohort, val_cache);
    art.test_preds = cohort_predictions(art.model.state.cohort, test_cache);

    if (want_independent) {
        Cohort twin = art.model.state.cohort;
        DivergenceWeights none;
        none.d = Matrix::Zero(static_cast<Index>(twin.students.size()),
                              static_cast<Index>(twin.students.size()));
        TrainConfig ind_cfg = tc;
        ind_cfg.rho = 0.0;
        mutual_train(twin, ds, none, ind_cfg);
        art.ind_val_preds = cohort_predictions(twin, val_cache);
        art.ind_test_preds = cohort_predictions(twin, test_cache);
    }
    return art;
}

double run_method(Method method, const ExperimentConfig& config, const MultimodalDataset& ds,
                  const Task& task, const TrainConfig& tc, const EvalData& data,
                  const std::optional<CohortArtifacts>& art) {
    const ModelSpec& spec = config.model;
    switch (method) {
        case Method::Modality1:
        case Method::Modality2: {
            const std::size_t m = method == Method::Modality1 ? 0 : 1;
            const FusedStudentModel model = unimodal_fit(ds, m, spec, task, tc);
            return score(task, model.predict(data.test_mods), data.test_targets);
        }
        case Method::Early: {
            const FusedStudentModel model = early_fusion_fit(ds, spec, task, tc);
            return score(task, model.predict(data.test_mods), data.test_targets);
        }
        case Method::Late: {
            const LateFusionModel model = late_fusion_fit(ds, spec, task, tc);
            return score(task, model.predict(data.test_mods), data.test_targets);
        }
        case Method::Coop: {
            if (task.kind != TaskKind::Regression)
                throw MethodTaskMismatch("coop baseline handles regression only");
            const double rho = coop_select_rho(ds, default_coop_rho_grid());
            const CoopState state =
                coop_fit(ds.modality_rows(0, Split::Train), ds.modality_rows(1, Split::Train),
                         ds.label_rows(Split::Train), rho);
            const Vector pred = coop_predict(state, data.test_mods[0], data.test_mods[1]);
            return (pred - data.test_values).squaredNorm() / static_cast<double>(pred.size());
        }
        case Method::MetaFusion:
            return score(task, art->model.predict(data.test_mods), data.test_targets);
        case Method::BestSingleIndependent:
            return score(task,
                         aggregate(art->ind_test_preds, AggregationMethod::BestSingle, task,
                                   art->ind_val_preds, data.val_targets),
                         data.test_targets);
        case Method::BestSingle:
        case Method::Stacking:
        case Method::SimpleAvg:
        case Method::WeightedAvg:
        case Method::MajorityVote:
        case Method::WeightedVote: {
            AggregationMethod agg = AggregationMethod::BestSingle;
            if (method == Method::Stacking) agg = AggregationMethod::Stacking;
            if (method == Method::SimpleAvg) agg = AggregationMethod::SimpleAverage;
            if (method == Method::WeightedAvg) agg = AggregationMethod::WeightedAverage;
            if (method == Method::MajorityVote) agg = AggregationMethod::MajorityVote;
            if (method == Method::WeightedVote) agg = AggregationMethod::WeightedVote;
            return score(task,
                         aggregate(art->test_preds, agg, task, art->val_preds, data.val_targets),
                         data.test_targets);
        }
    }
    throw InvalidConfig("run_method: unknown method");
}

void finalize(ExperimentResult& result) {
    std::stable_sort(result.rows.begin(), result.rows.end(),
                     [](const ResultRow& a, const ResultRow& b) {
                         if (a.setting != b.setting) return a.setting < b.setting;
                         if (a.method != b.method) return a.method < b.method;
                         return a.repetition < b.repetition;
                     });
    result.summary = summarize(result.rows);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const Task task;  // synthetic settings are regression
    const std::string metric = "mse";
    const bool cohort_needed =
        std::any_of(config.methods.begin(), config.methods.end(), needs_cohort);
    const bool independent_needed =
        std::count(config.methods.begin(), config.methods.end(), Method::BestSingleIndependent) > 0;

    ExperimentResult result;
    for (int r = 0; r < config.repetitions; ++r) {
        SynthConfig synth = config.synth;
        synth.seed = config.base_seed + static_cast<std::uint64_t>(r);
        const MultimodalDataset ds = generate_synthetic(synth);
        TrainConfig tc = config.train;
        tc.seed = synth.seed;
        const EvalData data = eval_data(ds, task);

        std::optional<CohortArtifacts> art;
        if (cohort_needed) art = make_artifacts(config, ds, task, tc, data, independent_needed);

        for (Method method : config.methods) {
            const auto start = std::chrono::steady_clock::now();
            double value = 0.0;
            try {
                value = run_method(method, config, ds, task, tc, data, art);
            } catch (const NonFiniteLoss& e) {
                throw NonFiniteLoss("run_experiment: method " + method_name(method) + " seed " +
                                    std::to_string(synth.seed) + ": " + e.what());
            }
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            result.rows.push_back(
                {config.setting, method_name(method), r, synth.seed, metric, value, secs});
        }
    }
    finalize(result);
    return result;
}

ExperimentResult run_ablation(const ExperimentConfig& config, AblationMode mode) {
    // Ablations pick their own variants to compare, so the method list may stay empty.
    if (config.repetitions < 1) throw InvalidConfig("ExperimentConfig: repetitions must be >= 1");
    config.synth.validate();
    const Task task;
    ExperimentResult result;

    for (int r = 0; r < config.repetitions; ++r) {
        SynthConfig synth = config.synth;
        synth.seed = config.base_seed + static_cast<std::uint64_t>(r);
        const MultimodalDataset ds = generate_synthetic(synth);
        TrainConfig tc = config.train;
        tc.seed = synth.seed;
        const EvalData data = eval_data(ds, task);

        if (mode == AblationMode::Ensembles) {
            const CohortArtifacts art = make_artifacts(config, ds, task, tc, data, true);
            const std::vector<std::pair<std::string, double>> entries = {
                {"meta-fusion", score(task, art.model.predict(data.test_mods), data.test_targets)},
                {"best-single",
                 score(task,
                       aggregate(art.test_preds, AggregationMethod::BestSingle, task, art.val_preds,
                                 data.val_targets),
                       data.test_targets)},
                {"best-single-independent",
                 score(task,
                       aggregate(art.ind_test_preds, AggregationMethod::BestSingle, task,
                                 art.ind_val_preds, data.val_targets),
                       data.test_targets)},
                {"stacking",
                 score(task,
                       aggregate(art.test_preds, AggregationMethod::Stacking, task, art.val_preds,
                                 data.val_targets),
                       data.test_targets)},
                {"simple-avg",
                 score(task,
                       aggregate(art.test_preds, AggregationMethod::SimpleAverage, task,
                                 art.val_preds, data.val_targets),
                       data.test_targets)},
                {"weighted-avg",
                 score(task,
                       aggregate(art.test_preds, AggregationMethod::WeightedAverage, task,
                                 art.val_preds, data.val_targets),
                       data.test_targets)},
            };
            for (const auto& [name, value] : entries)
                result.rows.push_back({config.setting, name, r, synth.seed, "mse", value, 0.0});
        } else {
            // Per-student validation improvement over independent training,
            // for each coupling rule; one averaged row per rule and rep.
            Cohort cohort = build_cohort(
                ds,
                [&] {
                    std::vector<ExtractorBank> banks;
                    const Index n_train = static_cast<Index>(ds.rows_in(Split::Train).size());
                    for (std::size_t m = 0; m < ds.modalities.size(); ++m)
                        banks.push_back(default_bank(static_cast<int>(m),
                                                     ds.modalities[m].cols(), n_train));
                    return banks;
                }(),
                config.model, task, tc.seed);
            const ScreeningReport report = initial_screening(cohort, ds, tc);
            const TransformCache val_cache = transform_all(cohort.banks, data.val_mods);

            const std::vector<std::pair<std::string, WeightMode>> modes = {
                {"learn-from-top", WeightMode::LearnFromTop},
                {"learn-from-worst", WeightMode::LearnFromWorst},
                {"all-ones", WeightMode::AllOnes},
            };
            for (const auto& [name, wm] : modes) {
                const DivergenceWeights weights = divergence_weights(report, wm, tc.k_top);
                mutual_train(cohort, ds, weights, tc);
                const std::vector<Matrix> preds = cohort_predictions(cohort, val_cache);
                double delta = 0.0;
                for (std::size_t i = 0; i < preds.size(); ++i)
                    delta += report.initial_losses[i] - task_loss(task, preds[i], data.val_targets);
                delta /= static_cast<double>(preds.size());
                result.rows.push_back(
                    {config.setting, name, r, synth.seed, "mean-improvement", delta, 0.0});
            }
        }
    }
    finalize(result);
    return result;
}

std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows) {
    std::vector<MethodSummary> summary;
    for (const ResultRow& row : rows) {
        MethodSummary* entry = nullptr;
        for (MethodSummary& s : summary)
            if (s.method == row.method && s.metric == row.metric) entry = &s;
        if (entry == nullptr) {
            summary.push_back({row.method, row.metric, 0.0, 0.0, 0});
            entry = &summary.back();
        }
        entry->mean += row.value;
        ++entry->repetitions;
    }
    for (MethodSummary& s : summary) s.mean /= static_cast<double>(s.repetitions);
    for (MethodSummary& s : summary) {
        double ss = 0.0;
        for (const ResultRow& row : rows)
            if (row.method == s.method && row.metric == s.metric)
                ss += (row.value - s.mean) * (row.value - s.mean);
        if (s.repetitions > 1)
            s.std_error = std::sqrt(ss / static_cast<double>(s.repetitions - 1) /
                                    static_cast<double>(s.repetitions));
    }
    return summary;
}

void write_rows_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << "setting,method,repetition,seed,metric,value\n";
    for (const ResultRow& row : rows)
        out << row.setting << ',' << row.method << ',' << row.repetition << ',' << row.seed << ','
            << row.metric << ',' << format_number(row.value) << '\n';
}

void write_summary_csv(const std::vector<MethodSummary>& summary, std::ostream& out) {
    out << "method,metric,mean,std_error,repetitions\n";
    for (const MethodSummary& s : summary)
        out << s.method << ',' << s.metric << ',' << format_number(s.mean) << ','
            << format_number(s.std_error) << ',' << s.repetitions << '\n';
}

}  // namespace metafusion
