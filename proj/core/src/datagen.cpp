#include "metafusion/datagen.hpp"

#include <cmath>
#include <ostream>

#include "metafusion/csv.hpp"

namespace metafusion {

Matrix apply_transform(Transform t, const Matrix& m) {
    switch (t) {
        case Transform::Identity:
            return m;
        case Transform::QuadraticMinusLinear:
            return m.array().square() - m.array();
    }
    throw InvalidConfig("apply_transform: unknown transform");
}

void SynthConfig::validate() const {
    if (n < 1) throw InvalidConfig("SynthConfig: n must be >= 1");
    if (latent_x < 0 || latent_z < 0 || latent_shared < 0 || observed_x < 0 || observed_z < 0)
        throw InvalidConfig("SynthConfig: negative dimension");
    if (weight_interaction != 0.0 && (latent_x < 1 || latent_z < 1))
        throw InvalidConfig("SynthConfig: interaction weight requires both latents nonempty");
    if (noise_x < 0.0 || noise_x > 1.0 || noise_z < 0.0 || noise_z > 1.0)
        throw InvalidConfig("SynthConfig: noise ratios must lie in [0,1]");
}

Matrix rowwise_kronecker(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeMismatch("rowwise_kronecker: row count mismatch");
    Matrix out(a.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            for (Index k = 0; k < b.cols(); ++k) out(i, j * b.cols() + k) = a(i, j) * b(i, k);
    return out;
}

std::vector<Index> MultimodalDataset::rows_in(Split s) const {
    std::vector<Index> idx;
    for (Index i = 0; i < static_cast<Index>(splits.size()); ++i)
        if (splits[i] == s) idx.push_back(i);
    return idx;
}

Matrix MultimodalDataset::modality_rows(std::size_t m, Split s) const {
    const auto idx = rows_in(s);
    Matrix out(static_cast<Index>(idx.size()), modalities[m].cols());
    for (Index i = 0; i < out.rows(); ++i) out.row(i) = modalities[m].row(idx[i]);
    return out;
}

Vector MultimodalDataset::label_rows(Split s) const {
    const auto idx = rows_in(s);
    Vector out(static_cast<Index>(idx.size()));
    for (Index i = 0; i < out.size(); ++i) out(i) = labels(idx[i]);
    return out;
}

std::vector<int> MultimodalDataset::class_label_rows(Split s) const {
    const auto idx = rows_in(s);
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = class_labels[idx[i]];
    return out;
}

MultimodalDataset generate_synthetic(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);

    const Index n = config.n;
    Matrix latent_x = rng.normal_matrix(n, config.latent_x);
    Matrix latent_z = rng.normal_matrix(n, config.latent_z);
    Matrix latent_s = rng.normal_matrix(n, config.latent_shared);

    Vector labels = Vector::Zero(n);
    if (config.weight_x != 0.0 && config.latent_x > 0)
        labels += config.weight_x * apply_transform(config.f_x, latent_x) * rng.normal_vector(config.latent_x);
    else
        rng.normal_vector(config.latent_x);  // keep the stream layout stable
    if (config.weight_z != 0.0 && config.latent_z > 0)
        labels += config.weight_z * apply_transform(config.f_z, latent_z) * rng.normal_vector(config.latent_z);
    else
        rng.normal_vector(config.latent_z);
    if (config.weight_shared != 0.0 && config.latent_shared > 0)
        labels += config.weight_shared * apply_transform(config.f_shared, latent_s) *
                  rng.normal_vector(config.latent_shared);
    else
        rng.normal_vector(config.latent_shared);
    if (config.weight_interaction != 0.0) {
        Matrix interactions = rowwise_kronecker(latent_x, latent_z);
        labels += config.weight_interaction * interactions * rng.normal_vector(interactions.cols());
    }

    // Observed features: signal-plus-noise mixes of [modality latents, shared latents].
    Matrix joint_x(n, config.latent_x + config.latent_shared);
    joint_x << latent_x, latent_s;
    Matrix joint_z(n, config.latent_z + config.latent_shared);
    joint_z << latent_z, latent_s;

    Matrix mixing_x = rng.normal_matrix(joint_x.cols(), config.observed_x);
    Matrix mixing_z = rng.normal_matrix(joint_z.cols(), config.observed_z);
    Matrix obs_x = (1.0 - config.noise_x) * joint_x * mixing_x +
                   config.noise_x * rng.normal_matrix(n, config.observed_x);
    Matrix obs_z = (1.0 - config.noise_z) * joint_z * mixing_z +
                   config.noise_z * rng.normal_matrix(n, config.observed_z);

    MultimodalDataset ds;
    ds.modalities = {std::move(obs_x), std::move(obs_z)};
    ds.labels = std::move(labels);

    const Index n_train = static_cast<Index>(std::llround(0.64 * static_cast<double>(n)));
    const Index n_val = static_cast<Index>(std::llround(0.16 * static_cast<double>(n)));
    ds.splits.resize(n, Split::Test);
    for (Index i = 0; i < n; ++i) {
        if (i < n_train)
            ds.splits[i] = Split::Train;
        else if (i < n_train + n_val)
            ds.splits[i] = Split::Val;
    }
    return ds;
}

TheoryInstance generate_theory_instance(Index n, Index p, Index p_I, Index p_J, double sigma_I,
                                        double sigma_J, std::uint64_t seed) {
    if (p_I > p || p_J > p) throw InvalidDims("generate_theory_instance: p_I and p_J must be <= p");
    if (n < std::max(p_I, p_J)) throw InvalidDims("generate_theory_instance: n too small");
    if (sigma_I <= 0.0 || sigma_J <= 0.0)
        throw InvalidConfig("generate_theory_instance: sigmas must be positive");

    Rng rng(seed);
    TheoryInstance inst;
    inst.n = n;
    inst.p = p;
    inst.p_I = p_I;
    inst.p_J = p_J;
    inst.sigma_I = sigma_I;
    inst.sigma_J = sigma_J;

    auto make_map = [&](Index cols) {
        // Orthonormalize a Gaussian matrix, then give each column a random
        // positive scale: columns stay orthogonal without being unit norm.
        Matrix g = rng.normal_matrix(p, cols);
        Eigen::HouseholderQR<Matrix> qr(g);
        Matrix q = qr.householderQ() * Matrix::Identity(p, cols);
        for (Index j = 0; j < cols; ++j) q.col(j) *= rng.uniform(0.5, 1.5);
        return q;
    };
    inst.map_I = make_map(p_I);
    inst.map_J = make_map(p_J);

    inst.latent = rng.normal_matrix(n, p);
    inst.coeff = rng.normal_vector(p);
    inst.rep_I = inst.latent * inst.map_I + sigma_I * rng.normal_matrix(n, p_I);
    inst.rep_J = inst.latent * inst.map_J + sigma_J * rng.normal_matrix(n, p_J);
    inst.labels = inst.latent * inst.coeff;
    return inst;
}

void export_dataset(const MultimodalDataset& dataset, std::ostream& out) {
    out << "split";
    for (std::size_t m = 0; m < dataset.modalities.size(); ++m)
        for (Index j = 0; j < dataset.modalities[m].cols(); ++j)
            out << ",m" << m + 1 << "_f" << j + 1;
    out << ",label\n";

    static const char* names[] = {"train", "val", "test"};
    for (Index i = 0; i < dataset.rows(); ++i) {
        out << names[static_cast<int>(dataset.splits[i])];
        for (const Matrix& mod : dataset.modalities)
            for (Index j = 0; j < mod.cols(); ++j) out << ',' << format_number(mod(i, j));
        out << ',';
        if (dataset.classification)
            out << dataset.class_labels[i];
        else
            out << format_number(dataset.labels(i));
        out << '\n';
    }
}

}  // namespace metafusion
