#pragma once

#include <vector>

#include <json.hpp>

namespace rholab {

// Weighted atoms on the real line. An atomic measure is a genuine finite sum
// of Dirac masses; a grid density is a discretized absolutely continuous law
// whose cell masses sit on grid nodes. The distinction matters for the
// small-noise transport problems, where only densities can be reached by a
// diffusion with finite drift cost.
class DiscreteMeasure {
public:
    enum class Kind { atomic, grid_density };

    DiscreteMeasure() = default;
    // Sorts atoms, merges duplicates and validates that weights are
    // nonnegative and sum to 1 within 1e-12.
    DiscreteMeasure(std::vector<double> support, std::vector<double> weights,
                    Kind kind = Kind::atomic);

    // Same as the constructor but rescales the weights to total mass 1.
    static DiscreteMeasure normalized(std::vector<double> support, std::vector<double> weights,
                                      Kind kind = Kind::atomic);
    static DiscreteMeasure dirac(double x) { return DiscreteMeasure({x}, {1.0}); }

    const std::vector<double>& support() const { return support_; }
    const std::vector<double>& weights() const { return weights_; }
    Kind kind() const { return kind_; }
    std::size_t size() const { return support_.size(); }

    double mean() const;
    double variance() const;

private:
    std::vector<double> support_;
    std::vector<double> weights_;
    Kind kind_ = Kind::atomic;
};

// 1-Wasserstein distance: the L1 distance between the two distribution
// functions, integrated exactly on the merged support.
double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b);

// {"support": [...], "weights": [...], "kind": "atomic" | "grid_density"} or
// {"csv": path} with (support, weight) rows.
DiscreteMeasure measure_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DiscreteMeasure& m);

}  // namespace rholab
