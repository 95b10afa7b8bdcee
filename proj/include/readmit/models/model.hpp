#pragma once

// Tagged union over the five classifier families with a shared train /
// predict / persist surface. Models are immutable once fitted. The on-disk
// container is a versioned key-value text file with hexfloat parameters, so
// a reloaded model reproduces its predictions bit for bit.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/models/forest.hpp"
#include "readmit/models/gbm.hpp"
#include "readmit/models/glm.hpp"
#include "readmit/models/svm.hpp"
#include "readmit/models/tree.hpp"

namespace readmit {

enum class ModelFamily { Cart, Forest, Gbm, Glm, Svm };

inline std::string family_name(ModelFamily f) {
    switch (f) {
        case ModelFamily::Cart: return "cart";
        case ModelFamily::Forest: return "forest";
        case ModelFamily::Gbm: return "gbm";
        case ModelFamily::Glm: return "glm";
        case ModelFamily::Svm: return "svm";
    }
    return "?";
}

inline ModelFamily family_from_name(std::string_view s) {
    std::string n = to_lower(trim(s));
    if (n == "cart" || n == "rpart") return ModelFamily::Cart;
    if (n == "forest" || n == "rf") return ModelFamily::Forest;
    if (n == "gbm") return ModelFamily::Gbm;
    if (n == "glm") return ModelFamily::Glm;
    if (n == "svm") return ModelFamily::Svm;
    throw ConfigError("unknown model family: " + std::string(s));
}

struct CartHp {
    double complexity = 0.0;
    std::size_t min_node_size = 1;
};
struct ForestHp {
    std::size_t trees = 100;
    std::size_t features_per_split = 0;  // 0 = auto
    std::size_t min_node_size = 5;
};
struct GbmHp {
    double learning_rate = 0.1;
    std::size_t stages = 100;
    std::size_t max_depth = 3;
    GbmLoss loss = GbmLoss::SquaredError;
};
struct GlmHp {
    double l2 = 0.0;
    double threshold = 0.5;
};
struct SvmHp {
    double c = 1.0;
    double gamma = 1.0;
    KernelKind kernel = KernelKind::Rbf;
    int degree = 3;
};

struct Hyperparameters {
    ModelFamily family = ModelFamily::Gbm;
    std::variant<CartHp, ForestHp, GbmHp, GlmHp, SvmHp> values = GbmHp{};

    static Hyperparameters defaults(ModelFamily f) {
        Hyperparameters hp;
        hp.family = f;
        switch (f) {
            case ModelFamily::Cart: hp.values = CartHp{}; break;
            case ModelFamily::Forest: hp.values = ForestHp{}; break;
            case ModelFamily::Gbm: hp.values = GbmHp{}; break;
            case ModelFamily::Glm: hp.values = GlmHp{}; break;
            case ModelFamily::Svm: hp.values = SvmHp{}; break;
        }
        return hp;
    }
};

class TrainedModel {
public:
    static TrainedModel train(const Matrix& x, std::span<const int> y,
                              const Hyperparameters& hp, std::uint64_t seed = 0) {
        TrainedModel m;
        m.family_ = hp.family;
        m.n_features_ = x.cols();
        switch (hp.family) {
            case ModelFamily::Cart: {
                const auto& v = std::get<CartHp>(hp.values);
                TreeParams tp;
                tp.min_node_size = std::max<std::size_t>(1, v.min_node_size);
                tp.complexity = v.complexity;
                m.model_ = train_cart(x, y, tp);
                break;
            }
            case ModelFamily::Forest: {
                const auto& v = std::get<ForestHp>(hp.values);
                ForestParams fp;
                fp.trees = v.trees;
                fp.features_per_split = std::min(v.features_per_split, x.cols());
                fp.min_node_size = v.min_node_size;
                m.model_ = ForestModel::train(x, y, fp, seed);
                break;
            }
            case ModelFamily::Gbm: {
                const auto& v = std::get<GbmHp>(hp.values);
                GbmParams gp;
                gp.learning_rate = v.learning_rate;
                gp.stages = v.stages;
                gp.max_depth = v.max_depth;
                gp.loss = v.loss;
                m.model_ = GbmModel::train(x, y, gp);
                break;
            }
            case ModelFamily::Glm: {
                const auto& v = std::get<GlmHp>(hp.values);
                GlmParams gp;
                gp.l2 = v.l2;
                gp.threshold = v.threshold;
                m.model_ = GlmModel::train(x, y, gp);
                m.threshold_ = v.threshold;
                break;
            }
            case ModelFamily::Svm: {
                const auto& v = std::get<SvmHp>(hp.values);
                SvmParams sp;
                sp.c = v.c;
                sp.gamma = v.gamma;
                sp.kernel = v.kernel;
                sp.degree = v.degree;
                m.model_ = SvmModel::train(x, y, sp);
                break;
            }
        }
        return m;
    }

    // Class-1 probability per row.
    std::vector<double> predict(const Matrix& x) const {
        if (x.cols() != n_features_)
            throw Error("predict: expected " + std::to_string(n_features_) + " features, got " +
                        std::to_string(x.cols()));
        return std::visit([&](const auto& mdl) { return mdl.predict(x); }, model_);
    }

    ModelFamily family() const { return family_; }
    std::string name() const { return family_name(family_); }
    double threshold() const { return threshold_; }
    std::size_t feature_count() const { return n_features_; }

    template <typename T>
    const T& as() const {
        return std::get<T>(model_);
    }

    void save(const std::string& path) const {
        KvFile kv;
        kv.set("format", "readmit-model/1");
        kv.set("family", family_name(family_));
        kv.set_int("features", static_cast<long long>(n_features_));
        kv.set("threshold", to_hexfloat(threshold_));
        std::visit([&](const auto& mdl) { mdl.save(kv, "m"); }, model_);
        kv.save(path);
    }

    static TrainedModel load(const std::string& path) {
        KvFile kv = KvFile::load(path);
        if (kv.get("format") != "readmit-model/1")
            throw ParseError(path + ": unsupported model container format");
        TrainedModel m;
        m.family_ = family_from_name(kv.get("family"));
        m.n_features_ = static_cast<std::size_t>(kv.get_int("features"));
        m.threshold_ = parse_double(kv.get("threshold"));
        switch (m.family_) {
            case ModelFamily::Cart: m.model_ = DecisionTree::load(kv, "m"); break;
            case ModelFamily::Forest: m.model_ = ForestModel::load(kv, "m"); break;
            case ModelFamily::Gbm: m.model_ = GbmModel::load(kv, "m"); break;
            case ModelFamily::Glm: m.model_ = GlmModel::load(kv, "m"); break;
            case ModelFamily::Svm: m.model_ = SvmModel::load(kv, "m"); break;
        }
        return m;
    }

private:
    ModelFamily family_ = ModelFamily::Gbm;
    std::variant<DecisionTree, ForestModel, GbmModel, GlmModel, SvmModel> model_;
    double threshold_ = 0.5;
    std::size_t n_features_ = 0;
};

// Hard labels from probability scores: 1 iff score >= threshold.
inline std::vector<int> classify(std::span<const double> scores, double threshold = 0.5) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
    return out;
}

}  // namespace readmit
