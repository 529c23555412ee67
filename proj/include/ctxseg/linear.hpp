#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxseg/errors.hpp"
#include "ctxseg/rng.hpp"
#include "ctxseg/serialize.hpp"

namespace ctxseg {

struct LinearSvmParams {
    int epochs = 60;
    double learning_rate = 0.5;
    double l2 = 1e-4;
};

// One-vs-rest linear classifier trained with hinge-loss SGD. Small and fast;
// one dot product per class at prediction time.
class LinearClassifier {
public:
    LinearClassifier() = default;

    static LinearClassifier train(const std::vector<std::vector<double>>& features,
                                  const std::vector<int>& labels, int class_count,
                                  const LinearSvmParams& params, std::uint64_t seed) {
        require(!features.empty(), "linear classifier needs training samples");
        require(features.size() == labels.size(), "features/labels size mismatch");
        require(class_count >= 1, "class_count must be >= 1");

        LinearClassifier model;
        model.dim_ = static_cast<int>(features[0].size());
        model.class_count_ = class_count;
        model.weights_.assign(static_cast<std::size_t>(class_count) * model.dim_, 0.0);
        model.biases_.assign(class_count, 0.0);

        const std::size_t n = features.size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;

        Rng rng(seed);
        for (int epoch = 0; epoch < params.epochs; ++epoch) {
            rng.shuffle(order);
            // 1/t learning-rate decay keeps late epochs from oscillating
            const double lr = params.learning_rate / (1.0 + 0.1 * epoch);
            for (std::size_t idx : order) {
                const auto& x = features[idx];
                for (int k = 0; k < class_count; ++k) {
                    const double target = labels[idx] == k ? 1.0 : -1.0;
                    double* w = &model.weights_[static_cast<std::size_t>(k) * model.dim_];
                    double score = model.biases_[k];
                    for (int d = 0; d < model.dim_; ++d) score += w[d] * x[d];
                    const double decay = 1.0 - lr * params.l2;
                    for (int d = 0; d < model.dim_; ++d) w[d] *= decay;
                    if (target * score < 1.0) {
                        for (int d = 0; d < model.dim_; ++d) w[d] += lr * target * x[d];
                        model.biases_[k] += lr * target;
                    }
                }
            }
        }
        return model;
    }

    std::vector<double> scores(const std::vector<double>& x) const {
        require(static_cast<int>(x.size()) == dim_, "feature dimension mismatch");
        std::vector<double> s(class_count_);
        for (int k = 0; k < class_count_; ++k) {
            const double* w = &weights_[static_cast<std::size_t>(k) * dim_];
            double v = biases_[k];
            for (int d = 0; d < dim_; ++d) v += w[d] * x[d];
            s[k] = v;
        }
        return s;
    }

    // argmax score; ties resolve to the lowest class id
    int predict(const std::vector<double>& x) const {
        const auto s = scores(x);
        int best = 0;
        for (int k = 1; k < class_count_; ++k)
            if (s[k] > s[best]) best = k;
        return best;
    }

    int class_count() const { return class_count_; }
    int dim() const { return dim_; }

    void write(BinaryWriter& w) const {
        write_envelope(w, PayloadKind::linear_model);
        w.i32(class_count_);
        w.i32(dim_);
        w.f64_vec(weights_);
        w.f64_vec(biases_);
    }

    static LinearClassifier read(BinaryReader& r) {
        read_envelope(r, PayloadKind::linear_model);
        LinearClassifier m;
        m.class_count_ = r.i32();
        m.dim_ = r.i32();
        m.weights_ = r.f64_vec();
        m.biases_ = r.f64_vec();
        require(m.weights_.size() ==
                    static_cast<std::size_t>(m.class_count_) * static_cast<std::size_t>(m.dim_),
                "corrupt linear model");
        return m;
    }

private:
    int class_count_ = 0;
    int dim_ = 0;
    std::vector<double> weights_;  // class-major
    std::vector<double> biases_;
};

}  // namespace ctxseg
