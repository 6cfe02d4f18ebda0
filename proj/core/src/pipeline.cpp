#include "metafusion/pipeline.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace metafusion {

Matrix MetaFusionModel::predict(const std::vector<Matrix>& modalities) const {
    if (modalities.size() != state.cohort.banks.size())
        throw ShapeMismatch("MetaFusionModel::predict: modality count mismatch");
    const TransformCache cache = transform_all(state.cohort.banks, modalities);
    if (state.committee.members.empty()) throw EmptyPool("MetaFusionModel::predict: empty committee");

    Matrix sum;
    for (std::size_t k = 0; k < state.committee.members.size(); ++k) {
        const Student& s = state.cohort.students[state.committee.members[k]];
        Matrix pred = s.predict(fuse(s.pairing, cache));
        if (k == 0)
            sum = pred;
        else
            sum += pred;
    }
    return sum / static_cast<double>(state.committee.members.size());
}

MetaFusionModel fit_meta_fusion(const MultimodalDataset& dataset,
                                const std::vector<ExtractorBank>& banks, const ModelSpec& spec,
                                const Task& task, const TrainConfig& config,
                                const SelectionConfig& selection,
                                const std::vector<double>& rho_grid, WeightMode mode) {
    MetaFusionModel model;
    model.spec = spec;
    model.task = task;
    model.state = select_rho(dataset, banks, spec, task, rho_grid, config, selection, mode);
    return model;
}

MetaFusionModel fit_meta_fusion(const MultimodalDataset& dataset, const ModelSpec& spec,
                                const Task& task, const TrainConfig& config,
                                const SelectionConfig& selection,
                                const std::vector<double>& rho_grid, WeightMode mode) {
    const Index n_train = static_cast<Index>(dataset.rows_in(Split::Train).size());
    std::vector<ExtractorBank> banks;
    for (std::size_t m = 0; m < dataset.modalities.size(); ++m)
        banks.push_back(default_bank(static_cast<int>(m), dataset.modalities[m].cols(), n_train));
    return fit_meta_fusion(dataset, banks, spec, task, config, selection, rho_grid, mode);
}

namespace {

// Persistence uses 17 significant digits so a save/load round trip restores
// every double exactly.
void put(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ' ';
            put(out, m(i, j));
        }
        out << '\n';
    }
}

void write_vector(std::ostream& out, const Vector& v) {
    out << v.size() << '\n';
    for (Index i = 0; i < v.size(); ++i) {
        if (i) out << ' ';
        put(out, v(i));
    }
    out << '\n';
}

Matrix read_matrix(std::istream& in) {
    Index rows = 0, cols = 0;
    in >> rows >> cols;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) in >> m(i, j);
    return m;
}

Vector read_vector(std::istream& in) {
    Index n = 0;
    in >> n;
    Vector v(n);
    for (Index i = 0; i < n; ++i) in >> v(i);
    return v;
}

[[noreturn]] void bad_format(const std::string& what) {
    throw InvalidConfig("load_model: malformed model file (" + what + ")");
}

}  // namespace

void save_model(const MetaFusionModel& model, std::ostream& out) {
    out << "metafusion-model 1\n";
    out << "task " << (model.task.kind == TaskKind::Regression ? "regression" : "classification")
        << ' ' << model.task.classes << '\n';
    out << "spec " << (model.spec.kind == ModelKind::Linear ? "linear" : "mlp") << ' ';
    put(out, model.spec.ridge);
    out << ' ' << model.spec.hidden << '\n';
    out << "rho ";
    put(out, model.state.rho);
    out << '\n';

    const Cohort& cohort = model.state.cohort;
    out << "banks " << cohort.banks.size() << '\n';
    for (const ExtractorBank& bank : cohort.banks) {
        out << "bank " << bank.extractors.size() << '\n';
        for (const Extractor& e : bank.extractors) {
            switch (e.kind()) {
                case ExtractorKind::Null:
                    out << "null\n";
                    break;
                case ExtractorKind::Identity:
                    out << "identity " << (e.fitted() ? 1 : 0) << '\n';
                    break;
                case ExtractorKind::Pca:
                    out << "pca " << e.pca_rank() << ' ' << (e.fitted() ? 1 : 0) << '\n';
                    if (e.fitted()) {
                        write_matrix(out, e.pca_model().projection);
                        write_vector(out, e.pca_model().means);
                        write_vector(out, e.pca_model().explained_variance);
                    }
                    break;
            }
            if (e.kind() != ExtractorKind::Null && e.fitted()) {
                write_vector(out, e.output_offset());
                write_vector(out, e.output_scale());
            }
        }
    }

    out << "students " << cohort.students.size() << '\n';
    for (const Student& s : cohort.students) {
        out << "pairing";
        for (int idx : s.pairing.indices) out << ' ' << idx;
        out << '\n';
        out << s.input_width << ' ' << s.init_seed << '\n';
        write_matrix(out, s.w1);
        write_vector(out, s.b1);
        write_matrix(out, s.w2);
        write_vector(out, s.b2);
    }

    out << "committee " << model.state.committee.members.size() << ' ';
    put(out, model.state.committee.val_loss);
    out << '\n';
    for (std::size_t i = 0; i < model.state.committee.members.size(); ++i) {
        if (i) out << ' ';
        out << model.state.committee.members[i];
    }
    out << '\n';
}

MetaFusionModel load_model(std::istream& in) {
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "metafusion-model" || version != 1) bad_format("header");

    MetaFusionModel model;
    std::string word;
    in >> word;
    if (word != "task") bad_format("task");
    in >> word >> model.task.classes;
    model.task.kind = word == "regression" ? TaskKind::Regression : TaskKind::Classification;

    in >> word;
    if (word != "spec") bad_format("spec");
    in >> word >> model.spec.ridge >> model.spec.hidden;
    model.spec.kind = word == "linear" ? ModelKind::Linear : ModelKind::Mlp;

    in >> word >> model.state.rho;
    if (word != "rho") bad_format("rho");

    std::size_t n_banks = 0;
    in >> word >> n_banks;
    if (word != "banks") bad_format("banks");
    Cohort& cohort = model.state.cohort;
    cohort.task = model.task;
    for (std::size_t m = 0; m < n_banks; ++m) {
        std::size_t n_ext = 0;
        in >> word >> n_ext;
        if (word != "bank") bad_format("bank");
        ExtractorBank bank;
        for (std::size_t e = 0; e < n_ext; ++e) {
            in >> word;
            if (word == "null") {
                bank.extractors.push_back(Extractor::null(static_cast<int>(m)));
            } else if (word == "identity") {
                int fitted = 0;
                in >> fitted;
                Extractor ex = Extractor::identity(static_cast<int>(m));
                if (fitted) {
                    Vector offset = read_vector(in);
                    Vector scale = read_vector(in);
                    ex.set_scaler(std::move(offset), std::move(scale));
                }
                bank.extractors.push_back(ex);
            } else if (word == "pca") {
                Index rank = 0;
                int fitted = 0;
                in >> rank >> fitted;
                Extractor ex = Extractor::pca(static_cast<int>(m), rank);
                if (fitted) {
                    PcaModel pm;
                    pm.projection = read_matrix(in);
                    pm.means = read_vector(in);
                    pm.explained_variance = read_vector(in);
                    ex.set_pca_model(std::move(pm));
                    Vector offset = read_vector(in);
                    Vector scale = read_vector(in);
                    ex.set_scaler(std::move(offset), std::move(scale));
                }
                bank.extractors.push_back(ex);
            } else {
                bad_format("extractor kind");
            }
        }
        cohort.banks.push_back(std::move(bank));
    }

    std::size_t n_students = 0;
    in >> word >> n_students;
    if (word != "students") bad_format("students");
    for (std::size_t s = 0; s < n_students; ++s) {
        in >> word;
        if (word != "pairing") bad_format("pairing");
        Student student;
        student.pairing.indices.resize(n_banks);
        for (std::size_t m = 0; m < n_banks; ++m) in >> student.pairing.indices[m];
        in >> student.input_width >> student.init_seed;
        student.spec = model.spec;
        student.task = model.task;
        student.w1 = read_matrix(in);
        student.b1 = read_vector(in);
        student.w2 = read_matrix(in);
        student.b2 = read_vector(in);
        cohort.students.push_back(std::move(student));
        cohort.pairings.push_back(cohort.students.back().pairing);
    }

    std::size_t n_members = 0;
    in >> word >> n_members >> model.state.committee.val_loss;
    if (word != "committee") bad_format("committee");
    model.state.committee.members.resize(n_members);
    for (std::size_t i = 0; i < n_members; ++i) in >> model.state.committee.members[i];
    if (!in) bad_format("truncated");
    return model;
}

}  // namespace metafusion
