#include "rholab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rholab/errors.hpp"
#include "rholab/generators.hpp"

namespace rholab {

namespace {

void sort_and_merge(std::vector<double>& s, std::vector<double>& w) {
    if (s.size() != w.size() || s.empty()) {
        throw ValidationError("measure: support and weights must be non-empty and equal length");
    }
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] < s[b]; });
    std::vector<double> s2, w2;
    for (auto i : idx) {
        if (!std::isfinite(s[i]) || !std::isfinite(w[i]) || w[i] < 0.0) {
            throw ValidationError("measure: atoms must be finite with nonnegative weights");
        }
        if (!s2.empty() && s2.back() == s[i]) {
            w2.back() += w[i];
        } else {
            s2.push_back(s[i]);
            w2.push_back(w[i]);
        }
    }
    s = std::move(s2);
    w = std::move(w2);
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<double> support, std::vector<double> weights, Kind kind)
    : support_(std::move(support)), weights_(std::move(weights)), kind_(kind) {
    sort_and_merge(support_, weights_);
    double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) {
        throw ValidationError("measure: weights sum to " + std::to_string(total) + ", not 1");
    }
}

DiscreteMeasure DiscreteMeasure::normalized(std::vector<double> support, std::vector<double> weights,
                                            Kind kind) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw ValidationError("measure: total mass must be positive");
    for (auto& w : weights) w /= total;
    sort_and_merge(support, weights);
    total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= total;
    return DiscreteMeasure(std::move(support), std::move(weights), kind);
}

double DiscreteMeasure::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m += weights_[i] * support_[i];
    return m;
}

double DiscreteMeasure::variance() const {
    double m = mean(), v = 0.0;
    for (std::size_t i = 0; i < size(); ++i) v += weights_[i] * (support_[i] - m) * (support_[i] - m);
    return v;
}

double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    std::vector<double> pts = a.support();
    pts.insert(pts.end(), b.support().begin(), b.support().end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double fa = 0.0, fb = 0.0, d = 0.0;
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        while (ia < a.size() && a.support()[ia] <= pts[k]) fa += a.weights()[ia++];
        while (ib < b.size() && b.support()[ib] <= pts[k]) fb += b.weights()[ib++];
        d += std::abs(fa - fb) * (pts[k + 1] - pts[k]);
    }
    return d;
}

DiscreteMeasure measure_from_json(const nlohmann::json& j) {
    auto kind = DiscreteMeasure::Kind::atomic;
    if (j.contains("kind")) {
        std::string k = j.at("kind").get<std::string>();
        if (k == "grid_density") kind = DiscreteMeasure::Kind::grid_density;
        else if (k != "atomic") throw ValidationError("measure: unknown kind '" + k + "'");
    }
    if (j.contains("csv")) {
        auto [s, w] = generators::read_two_column_csv(j.at("csv").get<std::string>());
        return DiscreteMeasure::normalized(std::move(s), std::move(w), kind);
    }
    if (!j.contains("support") || !j.contains("weights")) {
        throw ValidationError("measure: needs 'support' and 'weights' or 'csv'");
    }
    return DiscreteMeasure::normalized(j.at("support").get<std::vector<double>>(),
                                       j.at("weights").get<std::vector<double>>(), kind);
}

nlohmann::json to_json(const DiscreteMeasure& m) {
    return {{"support", m.support()},
            {"weights", m.weights()},
            {"kind", m.kind() == DiscreteMeasure::Kind::atomic ? "atomic" : "grid_density"}};
}

}  // namespace rholab
