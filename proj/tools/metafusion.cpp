// Command-line front end: synthetic dataset generation, benchmark sweeps,
// ablations, closed-form verification reports, and preset listings.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metafusion/csv.hpp"
#include "metafusion/experiment.hpp"
#include "metafusion/theory.hpp"

namespace mf = metafusion;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) {
    throw mf::InvalidConfig("config: " + message);
}

void reject_unknown(const json& obj, const std::string& where,
                    const std::vector<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const std::string& a : allowed) ok = ok || a == key;
        if (!ok) fail("unknown key \"" + key + "\" in " + where);
    }
}

mf::Transform parse_transform(const std::string& name) {
    if (name == "identity") return mf::Transform::Identity;
    if (name == "quadratic-minus-linear") return mf::Transform::QuadraticMinusLinear;
    fail("unknown transform \"" + name + "\"");
}

mf::WeightMode parse_weight_mode(const std::string& name) {
    if (name == "learn-from-top") return mf::WeightMode::LearnFromTop;
    if (name == "learn-from-worst") return mf::WeightMode::LearnFromWorst;
    if (name == "all-ones") return mf::WeightMode::AllOnes;
    fail("unknown weight mode \"" + name + "\"");
}

void apply_synth_json(const json& j, mf::SynthConfig& synth) {
    reject_unknown(j, "synth",
                   {"n", "latent_x", "latent_z", "latent_shared", "observed_x", "observed_z",
                    "weight_x", "weight_z", "weight_shared", "weight_interaction", "f_x", "f_z",
                    "f_shared", "noise_x", "noise_z", "seed"});
    if (j.contains("n")) synth.n = j.at("n").get<mf::Index>();
    if (j.contains("latent_x")) synth.latent_x = j.at("latent_x").get<mf::Index>();
    if (j.contains("latent_z")) synth.latent_z = j.at("latent_z").get<mf::Index>();
    if (j.contains("latent_shared")) synth.latent_shared = j.at("latent_shared").get<mf::Index>();
    if (j.contains("observed_x")) synth.observed_x = j.at("observed_x").get<mf::Index>();
    if (j.contains("observed_z")) synth.observed_z = j.at("observed_z").get<mf::Index>();
    if (j.contains("weight_x")) synth.weight_x = j.at("weight_x").get<double>();
    if (j.contains("weight_z")) synth.weight_z = j.at("weight_z").get<double>();
    if (j.contains("weight_shared")) synth.weight_shared = j.at("weight_shared").get<double>();
    if (j.contains("weight_interaction"))
        synth.weight_interaction = j.at("weight_interaction").get<double>();
    if (j.contains("f_x")) synth.f_x = parse_transform(j.at("f_x").get<std::string>());
    if (j.contains("f_z")) synth.f_z = parse_transform(j.at("f_z").get<std::string>());
    if (j.contains("f_shared")) synth.f_shared = parse_transform(j.at("f_shared").get<std::string>());
    if (j.contains("noise_x")) synth.noise_x = j.at("noise_x").get<double>();
    if (j.contains("noise_z")) synth.noise_z = j.at("noise_z").get<double>();
    if (j.contains("seed")) synth.seed = j.at("seed").get<std::uint64_t>();
}

mf::ModelKind parse_model_kind(const std::string& name) {
    if (name == "linear") return mf::ModelKind::Linear;
    if (name == "mlp") return mf::ModelKind::Mlp;
    fail("unknown model kind \"" + name + "\"");
}

mf::ExperimentConfig config_from_json(const json& j) {
    reject_unknown(j, "config",
                   {"preset", "setting", "synth", "methods", "repetitions", "base_seed", "model",
                    "train", "selection", "rho_grid", "weight_mode"});
    mf::ExperimentConfig config;
    config.setting = "custom";
    if (j.contains("preset")) {
        const mf::Preset preset = mf::get_preset(j.at("preset").get<std::string>());
        config.synth = preset.config;
        config.setting = preset.name;
        config.repetitions = preset.default_reps;
    }
    if (j.contains("synth")) apply_synth_json(j.at("synth"), config.synth);
    if (j.contains("setting")) config.setting = j.at("setting").get<std::string>();
    if (j.contains("methods")) {
        config.methods.clear();
        for (const json& m : j.at("methods"))
            config.methods.push_back(mf::parse_method(m.get<std::string>()));
    }
    if (j.contains("repetitions")) config.repetitions = j.at("repetitions").get<int>();
    if (j.contains("base_seed")) config.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, "model", {"kind", "ridge", "hidden"});
        if (m.contains("kind")) config.model.kind = parse_model_kind(m.at("kind").get<std::string>());
        if (m.contains("ridge")) config.model.ridge = m.at("ridge").get<double>();
        if (m.contains("hidden")) config.model.hidden = m.at("hidden").get<mf::Index>();
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t, "train", {"rho", "n_t", "lr", "k_top", "seed"});
        if (t.contains("rho")) config.train.rho = t.at("rho").get<double>();
        if (t.contains("n_t")) config.train.n_t = t.at("n_t").get<int>();
        if (t.contains("lr")) config.train.lr = t.at("lr").get<double>();
        if (t.contains("k_top")) config.train.k_top = t.at("k_top").get<int>();
        if (t.contains("seed")) config.train.seed = t.at("seed").get<std::uint64_t>();
    }
    if (j.contains("selection")) {
        const json& s = j.at("selection");
        reject_unknown(s, "selection", {"p_prune", "n_init", "n_c"});
        if (s.contains("p_prune")) config.selection.p_prune = s.at("p_prune").get<double>();
        if (s.contains("n_init")) config.selection.n_init = s.at("n_init").get<int>();
        if (s.contains("n_c")) config.selection.n_c = s.at("n_c").get<int>();
    }
    if (j.contains("rho_grid")) {
        config.rho_grid.clear();
        for (const json& r : j.at("rho_grid")) config.rho_grid.push_back(r.get<double>());
    }
    if (j.contains("weight_mode"))
        config.weight_mode = parse_weight_mode(j.at("weight_mode").get<std::string>());
    return config;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(std::string("cannot parse ") + path + ": " + e.what());
    }
    return j;
}

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::string methods;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<int> n_t;
    std::string model_kind;
    bool desk = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_methods) {
    cmd->add_option("--config", opts.config_path, "JSON config file (unknown keys rejected)");
    cmd->add_option("--preset", opts.preset, "Preset name, e.g. 1.3 or 2.2-desk");
    if (with_methods)
        cmd->add_option("--methods", opts.methods, "Comma-separated method list");
    cmd->add_option("--seed", opts.seed, "Base seed (dataset r uses seed + r)");
    cmd->add_option("--reps", opts.reps, "Number of repetitions");
    cmd->add_option("--epochs", opts.n_t, "Training epochs per stage");
    cmd->add_option("--model", opts.model_kind, "Student model kind: linear or mlp")
        ->check(CLI::IsMember({"linear", "mlp"}));
    cmd->add_flag("--desk-scale", opts.desk, "Use the -desk variant of the preset");
    cmd->add_option("--out", opts.out, "Output CSV path")->required();
}

std::vector<mf::Method> parse_method_list(const std::string& csv) {
    std::vector<mf::Method> methods;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) methods.push_back(mf::parse_method(item));
    }
    return methods;
}

mf::ExperimentConfig build_config(const CommonOpts& opts) {
    if (!opts.config_path.empty() && !opts.preset.empty())
        fail("give either --config or --preset, not both");
    mf::ExperimentConfig config;
    if (!opts.config_path.empty()) {
        if (opts.desk) fail("--desk-scale applies to --preset, not --config");
        config = config_from_json(read_json_file(opts.config_path));
    } else {
        std::string name = opts.preset.empty() ? "1.1" : opts.preset;
        if (opts.desk && name.find("-desk") == std::string::npos) name += "-desk";
        const mf::Preset preset = mf::get_preset(name);
        config.synth = preset.config;
        config.setting = preset.name;
        config.repetitions = preset.default_reps;
    }
    if (!opts.methods.empty()) config.methods = parse_method_list(opts.methods);
    if (config.methods.empty())
        config.methods = {mf::Method::Modality1, mf::Method::Modality2, mf::Method::Early,
                          mf::Method::Late,      mf::Method::Coop,      mf::Method::MetaFusion};
    if (opts.seed) config.base_seed = *opts.seed;
    if (opts.reps) config.repetitions = *opts.reps;
    if (opts.n_t) config.train.n_t = *opts.n_t;
    if (!opts.model_kind.empty()) config.model.kind = parse_model_kind(opts.model_kind);
    return config;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: LF line endings everywhere
    if (!out) fail("cannot open output file " + path);
    return out;
}

void write_result(const mf::ExperimentResult& result, const std::string& rows_path,
                  const std::string& summary_path) {
    {
        std::ofstream out = open_out(rows_path);
        mf::write_rows_csv(result.rows, out);
    }
    if (!summary_path.empty()) {
        std::ofstream out = open_out(summary_path);
        mf::write_summary_csv(result.summary, out);
    } else {
        mf::write_summary_csv(result.summary, std::cout);
    }
}

// ---------------------------------------------------------------------------
// Verification report: re-derives the library's closed-form claims with
// independent numerical routes and prints one pass/fail row per claim.

struct ReportRow {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

mf::TheoryInstance scalar_instance(std::uint64_t seed) {
    // All population scalars positive, matching the simplified-event
    // statement's sign convention.
    mf::Rng rng(seed);
    const mf::Index n = 50;
    mf::TheoryInstance inst;
    inst.n = n;
    inst.p = inst.p_I = inst.p_J = 1;
    inst.latent = mf::Matrix(n, 1);
    for (mf::Index i = 0; i < n; ++i) inst.latent(i, 0) = rng.normal();
    inst.coeff = mf::Vector::Constant(1, rng.uniform(0.5, 1.5));
    inst.map_I = mf::Matrix::Constant(1, 1, rng.uniform(0.5, 1.5));
    inst.map_J = mf::Matrix::Constant(1, 1, rng.uniform(0.5, 1.5));
    inst.sigma_I = rng.uniform(0.5, 1.5);
    inst.sigma_J = rng.uniform(0.5, 1.5);
    inst.rep_I = inst.latent * inst.map_I;
    inst.rep_J = inst.latent * inst.map_J;
    for (mf::Index i = 0; i < n; ++i) {
        inst.rep_I(i, 0) += inst.sigma_I * rng.normal();
        inst.rep_J(i, 0) += inst.sigma_J * rng.normal();
    }
    inst.labels = inst.latent * inst.coeff;
    return inst;
}

std::vector<ReportRow> theory_report(std::uint64_t seed) {
    std::vector<ReportRow> rows;

    {  // coupled fit: gradient route vs exact block solve
        double worst = 0.0;
        for (int i = 0; i < 5; ++i) {
            const mf::TheoryInstance inst =
                mf::generate_theory_instance(200, 8, 5, 5, 1.0, 1.0, seed + i);
            for (double rho : {0.0, 0.5, 1.0, 2.0}) {
                const mf::FittedPair exact = mf::closed_form_fit(inst, rho);
                const mf::FittedPair gd =
                    mf::gradient_fit(inst.rep_I, inst.rep_J, inst.labels, rho);
                worst = std::max(worst,
                                 (exact.theta_I - gd.theta_I).lpNorm<Eigen::Infinity>());
                worst = std::max(worst,
                                 (exact.theta_J - gd.theta_J).lpNorm<Eigen::Infinity>());
            }
        }
        rows.push_back({"coupled-fit-two-routes", worst, 1e-5, worst <= 1e-5});
    }

    {  // error decomposition components sum to the directly estimated error
        double worst = 0.0;
        for (int i = 0; i < 2; ++i) {
            const mf::TheoryInstance inst =
                mf::generate_theory_instance(200, 8, 5, 5, 1.0, 1.0, seed + 100 + i);
            for (const mf::Decomposition& d :
                 mf::mse_decomposition_grid(inst, {0.0, 0.25}, 20000, seed + 200 + i))
                worst = std::max(worst,
                                 std::abs(d.component_sum() - d.mse_direct) / d.mse_direct);
        }
        rows.push_back({"decomposition-identity", worst, 0.05, worst <= 0.05});
    }

    {  // aleatoric-variance slope at zero coupling is negative
        double worst = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 100; ++i)
            worst = std::max(
                worst, mf::xi(mf::generate_theory_instance(100, 6, 4, 3, 1.0, 1.2, seed + 300 + i)));
        rows.push_back({"aleatoric-slope-sign", worst, 0.0, worst < 0.0});
    }

    {  // transfer identity between the single- and joint-representation optima
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const mf::TheoryInstance inst =
                mf::generate_theory_instance(60, 6, 4, 3, 0.8, 1.2, seed + 400 + i);
            const mf::OracleQuantities q = mf::oracle_quantities(inst);
            const mf::Vector lhs = q.sigma_tilde_I.llt().solve(
                (inst.map_I.transpose() * inst.map_J) * q.theta_bar_J);
            const mf::Vector rhs = q.theta_star_I - q.theta_bar_I;
            worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
        }
        rows.push_back({"transfer-identity", worst, 1e-8, worst <= 1e-8});
    }

    {  // scalar-case improvement event vs its closed-form inequality
        int mismatches = 0;
        for (int i = 0; i < 1000; ++i) {
            const mf::TheoryInstance inst = scalar_instance(seed + 1000 + i);
            const double ti = inst.map_I(0, 0), tj = inst.map_J(0, 0);
            const bool simple =
                inst.rep_I.col(0).dot(inst.rep_J.col(0)) / inst.rep_I.col(0).squaredNorm() >=
                ti * tj / (ti * ti + inst.sigma_I * inst.sigma_I);
            if (simple != mf::event_E_holds(inst)) ++mismatches;
        }
        rows.push_back({"scalar-event-equivalence", static_cast<double>(mismatches), 0.0,
                        mismatches == 0});
    }

    return rows;
}

int cmd_theory(std::uint64_t seed, const std::string& out_path) {
    const std::vector<ReportRow> rows = theory_report(seed);
    std::ostringstream csv;
    csv << "check,statistic,threshold,status\n";
    bool all_pass = true;
    for (const ReportRow& row : rows) {
        csv << row.name << ',' << mf::format_number(row.statistic) << ','
            << mf::format_number(row.threshold) << ',' << (row.pass ? "pass" : "fail") << '\n';
        all_pass = all_pass && row.pass;
    }
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out = open_out(out_path);
        out << csv.str();
        std::cout << (all_pass ? "all checks passed\n" : "some checks FAILED\n");
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal fusion benchmark suite: cross-modal student cohorts with "
                 "coupled training, committee selection, and classic fusion baselines"};
    app.require_subcommand(1);

    // gen ------------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset file");
    std::string gen_preset = "1.1";
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    bool gen_desk = false;
    gen->add_option("--preset", gen_preset, "Preset name");
    gen->add_option("--seed", gen_seed, "Dataset seed");
    gen->add_flag("--desk-scale", gen_desk, "Use the -desk variant of the preset");
    gen->add_option("--out", gen_out, "Output path")->required();

    // run ------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run a benchmark sweep");
    CommonOpts run_opts;
    std::string run_summary;
    add_common(run, run_opts, true);
    run->add_option("--summary", run_summary, "Summary CSV path (default: stdout)");

    // ablation -------------------------------------------------------------
    auto* abl = app.add_subcommand("ablation", "Aggregator or coupling-rule comparison");
    CommonOpts abl_opts;
    std::string abl_mode = "ensembles";
    std::string abl_summary;
    abl->add_option("--mode", abl_mode, "ensembles or weights")
        ->check(CLI::IsMember({"ensembles", "weights"}));
    add_common(abl, abl_opts, false);
    abl->add_option("--summary", abl_summary, "Summary CSV path (default: stdout)");

    // theory ---------------------------------------------------------------
    auto* theory = app.add_subcommand("theory", "Closed-form verification report");
    std::uint64_t theory_seed = 1;
    std::string theory_out;
    theory->add_option("--seed", theory_seed, "Seed for the verification instances");
    theory->add_option("--out", theory_out, "Report CSV path (default: stdout)");

    // presets --------------------------------------------------------------
    app.add_subcommand("presets", "List the built-in synthetic settings");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            std::string name = gen_preset;
            if (gen_desk && name.find("-desk") == std::string::npos) name += "-desk";
            mf::SynthConfig config = mf::get_preset(name).config;
            config.seed = gen_seed;
            const mf::MultimodalDataset dataset = mf::generate_synthetic(config);
            std::ofstream out = open_out(gen_out);
            mf::export_dataset(dataset, out);
            std::cout << "wrote " << dataset.rows() << " rows to " << gen_out << '\n';
        } else if (run->parsed()) {
            const mf::ExperimentConfig config = build_config(run_opts);
            write_result(mf::run_experiment(config), run_opts.out, run_summary);
        } else if (abl->parsed()) {
            mf::ExperimentConfig config = build_config(abl_opts);
            config.methods = {mf::Method::MetaFusion};  // placeholder; modes pick their own rows
            const mf::AblationMode mode =
                abl_mode == "weights" ? mf::AblationMode::Weights : mf::AblationMode::Ensembles;
            write_result(mf::run_ablation(config, mode), abl_opts.out, abl_summary);
        } else if (theory->parsed()) {
            return cmd_theory(theory_seed, theory_out);
        } else {  // presets
            for (const mf::Preset& p : mf::list_presets())
                std::cout << p.name << ": " << p.description << " (n=" << p.config.n
                          << ", dims=" << p.config.observed_x << '+' << p.config.observed_z
                          << ", default reps=" << p.default_reps << ")\n";
        }
    } catch (const mf::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
