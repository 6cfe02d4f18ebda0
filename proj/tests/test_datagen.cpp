#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "metafusion/datagen.hpp"
#include "metafusion/numerics.hpp"

using namespace metafusion;

namespace {

SynthConfig small_config() {
    SynthConfig c;
    c.n = 250;
    c.latent_x = 4;
    c.latent_z = 3;
    c.latent_shared = 0;
    c.observed_x = 10;
    c.observed_z = 8;
    c.weight_x = 1.0;
    c.weight_z = 1.0;
    c.weight_shared = 0.0;
    c.weight_interaction = 0.0;
    c.noise_x = 0.3;
    c.noise_z = 0.3;
    c.seed = 42;
    return c;
}

}  // namespace

TEST_CASE("generated dataset has the configured shapes and split sizes") {
    const SynthConfig c = small_config();
    const MultimodalDataset ds = generate_synthetic(c);
    REQUIRE(ds.modalities.size() == 2);
    CHECK(ds.modalities[0].rows() == c.n);
    CHECK(ds.modalities[0].cols() == c.observed_x);
    CHECK(ds.modalities[1].cols() == c.observed_z);
    CHECK(ds.labels.size() == c.n);
    CHECK(ds.splits.size() == static_cast<std::size_t>(c.n));

    const auto train = ds.rows_in(Split::Train);
    const auto val = ds.rows_in(Split::Val);
    const auto test = ds.rows_in(Split::Test);
    CHECK(train.size() + val.size() + test.size() == static_cast<std::size_t>(c.n));
    CHECK(train.size() == static_cast<std::size_t>(std::floor(0.64 * c.n)));
    CHECK(val.size() == static_cast<std::size_t>(std::floor(0.16 * c.n)));
}

TEST_CASE("same seed gives bit-identical datasets, different seeds differ") {
    const SynthConfig c = small_config();
    const MultimodalDataset a = generate_synthetic(c);
    const MultimodalDataset b = generate_synthetic(c);
    CHECK(a.modalities[0] == b.modalities[0]);
    CHECK(a.modalities[1] == b.modalities[1]);
    CHECK(a.labels == b.labels);

    SynthConfig c2 = c;
    c2.seed = 43;
    const MultimodalDataset d = generate_synthetic(c2);
    CHECK(a.labels != d.labels);
}

TEST_CASE("row-wise kronecker on a small example") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 5, 6;
    b << 3, 4, 7, 8;
    const Matrix u = rowwise_kronecker(a, b);
    REQUIRE(u.rows() == 2);
    REQUIRE(u.cols() == 4);
    CHECK(u(0, 0) == 3);
    CHECK(u(0, 1) == 4);
    CHECK(u(0, 2) == 6);
    CHECK(u(0, 3) == 8);
    CHECK(u(1, 0) == 35);
    CHECK(u(1, 1) == 40);
    CHECK(u(1, 2) == 42);
    CHECK(u(1, 3) == 48);
}

TEST_CASE("noiseless linear setting is exactly recoverable from observed features") {
    SynthConfig c = small_config();
    c.noise_x = 0.0;
    c.noise_z = 0.0;
    const MultimodalDataset ds = generate_synthetic(c);
    Matrix joint(c.n, c.observed_x + c.observed_z);
    joint << ds.modalities[0], ds.modalities[1];
    const Vector coeff = solve_least_squares(joint, ds.labels, 1e-10);
    const double residual = (joint * coeff - ds.labels).lpNorm<Eigen::Infinity>();
    CHECK(residual < 1e-6);
}

TEST_CASE("pure-noise modality is uncorrelated with the labels") {
    SynthConfig c = small_config();
    c.n = 2000;
    c.noise_x = 1.0;  // X carries no signal at all
    const MultimodalDataset ds = generate_synthetic(c);
    const Vector y = ds.labels.array() - ds.labels.mean();
    const double ynorm = y.norm();
    for (Index j = 0; j < ds.modalities[0].cols(); ++j) {
        Vector x = ds.modalities[0].col(j);
        x.array() -= x.mean();
        const double corr = std::abs(x.dot(y)) / (x.norm() * ynorm);
        CHECK(corr <= 4.0 / std::sqrt(static_cast<double>(c.n)));
    }
}

TEST_CASE("interaction weight requires nonempty latent blocks") {
    SynthConfig c = small_config();
    c.latent_x = 0;
    c.weight_interaction = 1.0;
    CHECK_THROWS_AS(generate_synthetic(c), InvalidConfig);
}

TEST_CASE("quadratic-minus-linear transform on explicit values") {
    Matrix m(1, 3);
    m << 0.0, 1.0, -2.0;
    const Matrix t = apply_transform(Transform::QuadraticMinusLinear, m);
    CHECK(t(0, 0) == 0.0);
    CHECK(t(0, 1) == 0.0);   // 1 - 1
    CHECK(t(0, 2) == 6.0);   // 4 + 2
    const Matrix id = apply_transform(Transform::Identity, m);
    CHECK(id == m);
}

TEST_CASE("export writes a header plus one line per sample") {
    const MultimodalDataset ds = generate_synthetic(small_config());
    std::ostringstream out;
    export_dataset(ds, out);
    std::istringstream in(out.str());
    std::string line;
    int lines = 0;
    std::getline(in, line);
    CHECK(line.substr(0, 6) == "split,");
    // header: split + 10 + 8 feature columns + label
    CHECK(std::count(line.begin(), line.end(), ',') == 19);
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 250);
}

TEST_CASE("theory instance satisfies the representation-model invariants") {
    const TheoryInstance inst = generate_theory_instance(4000, 6, 4, 3, 0.8, 1.2, 5);
    CHECK(inst.latent.rows() == 4000);
    CHECK(inst.rep_I.cols() == 4);
    CHECK(inst.rep_J.cols() == 3);

    // orthogonal (not necessarily unit-norm) columns
    const Matrix gram_T = inst.map_I.transpose() * inst.map_I;
    for (Index i = 0; i < gram_T.rows(); ++i)
        for (Index j = 0; j < gram_T.cols(); ++j)
            if (i != j) CHECK(std::abs(gram_T(i, j)) < 1e-10);

    // labels are the noiseless linear readout of the latents
    CHECK((inst.labels - inst.latent * inst.coeff).lpNorm<Eigen::Infinity>() < 1e-12);

    // empirical latent means vanish at the CLT rate
    const double bound = 4.0 / std::sqrt(4000.0);
    for (Index j = 0; j < inst.latent.cols(); ++j)
        CHECK(std::abs(inst.latent.col(j).mean()) < bound);

    // V_I' V_I / n concentrates around T_I' T_I + sigma_I^2 I
    const Matrix emp = inst.rep_I.transpose() * inst.rep_I / 4000.0;
    const Matrix expect =
        gram_T + inst.sigma_I * inst.sigma_I * Matrix::Identity(4, 4);
    CHECK((emp - expect).lpNorm<Eigen::Infinity>() < 5.0 / std::sqrt(4000.0));
}

TEST_CASE("theory instance rejects impossible dimensions") {
    CHECK_THROWS_AS(generate_theory_instance(50, 3, 4, 2, 1.0, 1.0, 1), InvalidDims);
    CHECK_THROWS_AS(generate_theory_instance(50, 3, 2, 4, 1.0, 1.0, 1), InvalidDims);
}

TEST_CASE("scalar theory instance is well-formed") {
    const TheoryInstance inst = generate_theory_instance(30, 1, 1, 1, 0.5, 0.7, 9);
    CHECK(inst.map_I.rows() == 1);
    CHECK(inst.map_I.cols() == 1);
    CHECK(inst.rep_I.cols() == 1);
}
