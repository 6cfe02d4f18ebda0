#include "metafusion/cohort.hpp"

#include <cmath>
#include <string>

namespace metafusion {

PairingSet build_pairings(const std::vector<int>& bank_sizes) {
    if (bank_sizes.empty()) throw InvalidConfig("build_pairings: no modalities");
    for (int k : bank_sizes)
        if (k < 0) throw InvalidConfig("build_pairings: negative bank size");

    PairingSet out;
    std::vector<int> tuple(bank_sizes.size(), 0);
    while (true) {
        bool all_zero = true;
        for (int v : tuple)
            if (v != 0) {
                all_zero = false;
                break;
            }
        if (!all_zero) out.push_back(Pairing{tuple});

        // lexicographic increment, last position fastest
        int pos = static_cast<int>(tuple.size()) - 1;
        while (pos >= 0) {
            if (tuple[pos] < bank_sizes[pos] + 1) {
                ++tuple[pos];
                break;
            }
            tuple[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return out;
}

void Student::init_params() {
    Rng rng(init_seed);
    const Index d = task.output_dim();
    if (spec.kind == ModelKind::Linear) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(1, input_width)));
        w1 = scale * rng.normal_matrix(input_width, d);
        b1 = Vector::Zero(d);
        w2.resize(0, 0);
        b2.resize(0);
    } else {
        const Index h = spec.hidden;
        const double s1 = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(1, input_width)));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
        w1 = s1 * rng.normal_matrix(input_width, h);
        b1 = Vector::Zero(h);
        w2 = s2 * rng.normal_matrix(h, d);
        b2 = Vector::Zero(d);
    }
}

Matrix Student::predict(const Matrix& fused) const {
    if (w1.size() == 0 && input_width > 0) throw NotFitted("Student::predict: parameters not initialized");
    if (fused.cols() != input_width) throw ShapeMismatch("Student::predict: fused width mismatch");
    if (spec.kind == ModelKind::Linear)
        return (fused * w1).rowwise() + b1.transpose();
    Matrix hidden = ((fused * w1).rowwise() + b1.transpose()).array().tanh();
    return (hidden * w2).rowwise() + b2.transpose();
}

bool Student::params_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

double task_loss(const Task& task, const Matrix& predictions, const TrainingTargets& targets) {
    const double n = static_cast<double>(predictions.rows());
    if (task.kind == TaskKind::Regression) {
        if (targets.values == nullptr) throw InvalidConfig("task_loss: regression targets missing");
        if (targets.values->size() != predictions.rows())
            throw ShapeMismatch("task_loss: target length mismatch");
        return (predictions.col(0) - *targets.values).squaredNorm() / n;
    }
    if (targets.classes == nullptr) throw InvalidConfig("task_loss: class targets missing");
    if (static_cast<Index>(targets.classes->size()) != predictions.rows())
        throw ShapeMismatch("task_loss: target length mismatch");
    const Matrix probs = softmax_rows(predictions);
    double loss = 0.0;
    for (Index i = 0; i < predictions.rows(); ++i) {
        const int c = (*targets.classes)[static_cast<std::size_t>(i)];
        if (c < 0 || c >= task.classes) throw InvalidConfig("task_loss: class label out of range");
        loss -= std::log(std::max(probs(i, c), 1e-300));
    }
    return loss / n;
}

namespace {

// Mean row-wise KL(softmax(peer) || softmax(self)).
double kl_divergence(const Matrix& self_logits, const Matrix& peer_logits) {
    const Matrix p_self = softmax_rows(self_logits);
    const Matrix p_peer = softmax_rows(peer_logits);
    double total = 0.0;
    for (Index i = 0; i < p_self.rows(); ++i)
        for (Index j = 0; j < p_self.cols(); ++j)
            total += p_peer(i, j) *
                     (std::log(std::max(p_peer(i, j), 1e-300)) - std::log(std::max(p_self(i, j), 1e-300)));
    return total / static_cast<double>(p_self.rows());
}

}  // namespace

LossParts grad_step(Student& student, const Matrix& fused, const TrainingTargets& targets,
                    const std::vector<const Matrix*>& peer_outputs,
                    const std::vector<double>& peer_weights, double rho, double lr) {
    if (peer_outputs.size() != peer_weights.size())
        throw ShapeMismatch("grad_step: peer weights and outputs differ in length");

    const Index n = fused.rows();
    const Index d = student.task.output_dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    // Forward pass, keeping the hidden activations for backprop.
    Matrix hidden;  // mlp only
    Matrix out;
    if (student.spec.kind == ModelKind::Linear) {
        out = (fused * student.w1).rowwise() + student.b1.transpose();
    } else {
        hidden = ((fused * student.w1).rowwise() + student.b1.transpose()).array().tanh();
        out = (hidden * student.w2).rowwise() + student.b2.transpose();
    }

    LossParts parts;
    Matrix grad_out = Matrix::Zero(n, d);  // d loss / d out

    if (student.task.kind == TaskKind::Regression) {
        if (targets.values == nullptr) throw InvalidConfig("grad_step: regression targets missing");
        Vector resid = out.col(0) - *targets.values;
        parts.task = resid.squaredNorm() * inv_n;
        grad_out.col(0) = 2.0 * inv_n * resid;
        for (std::size_t j = 0; j < peer_outputs.size(); ++j) {
            if (peer_weights[j] == 0.0) continue;
            Vector diff = out.col(0) - peer_outputs[j]->col(0);
            parts.divergence += rho * peer_weights[j] * diff.squaredNorm() * inv_n;
            grad_out.col(0) += rho * peer_weights[j] * 2.0 * inv_n * diff;
        }
    } else {
        if (targets.classes == nullptr) throw InvalidConfig("grad_step: class targets missing");
        const Matrix probs = softmax_rows(out);
        double ce = 0.0;
        grad_out = probs;
        for (Index i = 0; i < n; ++i) {
            const int c = (*targets.classes)[static_cast<std::size_t>(i)];
            ce -= std::log(std::max(probs(i, c), 1e-300));
            grad_out(i, c) -= 1.0;
        }
        parts.task = ce * inv_n;
        grad_out *= inv_n;
        for (std::size_t j = 0; j < peer_outputs.size(); ++j) {
            if (peer_weights[j] == 0.0) continue;
            parts.divergence += rho * peer_weights[j] * kl_divergence(out, *peer_outputs[j]);
            // grad of KL(peer || self) wrt self logits is (p_self - p_peer) / n
            grad_out += rho * peer_weights[j] * inv_n * (probs - softmax_rows(*peer_outputs[j]));
        }
    }

    if (!std::isfinite(parts.total())) throw NonFiniteLoss("grad_step: loss is not finite");

    if (student.spec.kind == ModelKind::Linear) {
        student.w1 -= lr * (fused.transpose() * grad_out);
        student.b1 -= lr * grad_out.colwise().sum().transpose();
    } else {
        Matrix grad_hidden = (grad_out * student.w2.transpose()).array() * (1.0 - hidden.array().square());
        student.w2 -= lr * (hidden.transpose() * grad_out);
        student.b2 -= lr * grad_out.colwise().sum().transpose();
        student.w1 -= lr * (fused.transpose() * grad_hidden);
        student.b1 -= lr * grad_hidden.colwise().sum().transpose();
    }
    if (!student.params_finite()) throw NonFiniteLoss("grad_step: parameters diverged");
    return parts;
}

double auto_learning_rate(const Student& student, const Matrix& fused, double rho_weight_sum) {
    const Index n = fused.rows();
    // Curvature of the quadratic part: (2/n) * lambda_max([X 1]^T [X 1]),
    // scaled up by the divergence terms. Power iteration without forming the
    // gram matrix, since fused widths can reach the raw feature counts.
    Vector v = Vector::Ones(fused.cols() + 1).normalized();
    double lambda = 1.0;
    for (int it = 0; it < 60; ++it) {
        Vector image = fused * v.head(fused.cols());
        image.array() += v(fused.cols());
        Vector w(v.size());
        w.head(fused.cols()) = fused.transpose() * image;
        w(fused.cols()) = image.sum();
        w /= static_cast<double>(n);
        lambda = w.norm();
        if (lambda <= 0.0) break;
        v = w / lambda;
    }
    double curvature = 2.0 * lambda * (1.0 + rho_weight_sum);
    if (student.spec.kind == ModelKind::Mlp) curvature *= 2.0;  // safety margin for the nonlinearity
    if (curvature <= 0.0) return 1e-2;
    return 0.9 / curvature;
}

TransformCache transform_all(const std::vector<ExtractorBank>& banks,
                             const std::vector<Matrix>& modalities) {
    if (banks.size() != modalities.size())
        throw ShapeMismatch("transform_all: bank count does not match modality count");
    TransformCache cache(banks.size());
    for (std::size_t m = 0; m < banks.size(); ++m)
        for (const Extractor& e : banks[m].extractors) cache[m].push_back(e.transform(modalities[m]));
    return cache;
}

Matrix fuse(const Pairing& pairing, const TransformCache& cache) {
    if (pairing.indices.size() != cache.size()) throw ShapeMismatch("fuse: pairing arity mismatch");
    Index rows = -1, cols = 0;
    for (std::size_t m = 0; m < cache.size(); ++m) {
        const Matrix& rep = cache[m][static_cast<std::size_t>(pairing.indices[m])];
        if (rows < 0) rows = rep.rows();
        cols += rep.cols();
    }
    Matrix out(rows, cols);
    Index at = 0;
    for (std::size_t m = 0; m < cache.size(); ++m) {
        const Matrix& rep = cache[m][static_cast<std::size_t>(pairing.indices[m])];
        out.middleCols(at, rep.cols()) = rep;
        at += rep.cols();
    }
    return out;
}

std::string Cohort::pairing_name(std::size_t idx) const {
    std::string name;
    const Pairing& p = pairings[idx];
    for (std::size_t m = 0; m < p.indices.size(); ++m) {
        if (m > 0) name += '+';
        name += banks[m].extractors[static_cast<std::size_t>(p.indices[m])].name();
    }
    return name;
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t student_seed(std::uint64_t base_seed, const std::vector<ExtractorBank>& banks,
                           const Pairing& pairing) {
    // Hash the extractor names rather than bank indices, so the same pairing
    // gets the same seed regardless of which other extractors are present.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t m = 0; m < pairing.indices.size(); ++m) {
        h = fnv1a(h, banks[m].extractors[static_cast<std::size_t>(pairing.indices[m])].name());
        h = fnv1a(h, "|");
    }
    return mix_seed(base_seed, h);
}

Cohort build_cohort(const MultimodalDataset& dataset, const std::vector<ExtractorBank>& banks,
                    const ModelSpec& spec, const Task& task, std::uint64_t seed) {
    if (banks.size() != dataset.modalities.size())
        throw ShapeMismatch("build_cohort: one bank per modality required");

    Cohort cohort;
    cohort.banks = banks;
    cohort.task = task;
    for (std::size_t m = 0; m < cohort.banks.size(); ++m)
        cohort.banks[m].fit(dataset.modality_rows(m, Split::Train));

    std::vector<int> sizes;
    for (const ExtractorBank& b : cohort.banks) sizes.push_back(b.learned_count());
    cohort.pairings = build_pairings(sizes);

    for (const Pairing& p : cohort.pairings) {
        Student s;
        s.pairing = p;
        s.spec = spec;
        s.task = task;
        s.input_width = 0;
        for (std::size_t m = 0; m < p.indices.size(); ++m)
            s.input_width += cohort.banks[m]
                                 .extractors[static_cast<std::size_t>(p.indices[m])]
                                 .output_width(dataset.modalities[m].cols());
        s.init_seed = student_seed(seed, cohort.banks, p);
        s.init_params();
        cohort.students.push_back(std::move(s));
    }
    return cohort;
}

}  // namespace metafusion
