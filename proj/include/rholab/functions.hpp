#pragma once

#include <functional>
#include <string>

#include <json.hpp>

namespace rholab::functions {

// A named real function of one real variable, as configured. The spec is
// kept for manifests and round trips.
struct ScalarFunction {
    std::function<double(double)> fn;
    nlohmann::json spec;

    double operator()(double x) const { return fn(x); }
};

// amplitude * exp(-((x - center) / width)^2)
ScalarFunction gaussian_bump(double center = 1.0, double width = 1.0, double amplitude = 1.0);
// slope * x + intercept
ScalarFunction linear(double slope, double intercept = 0.0);
// clamp(slope * x, lo, hi); either bound may be infinite (omitted in JSON).
ScalarFunction clipped_linear(double slope, double lo, double hi);
ScalarFunction constant(double c);
// amplitude * tanh(scale * x)
ScalarFunction tanh_fn(double scale = 1.0, double amplitude = 1.0);
// scale * x^2
ScalarFunction square(double scale = 1.0);
ScalarFunction identity();
// Sum of two catalog functions.
ScalarFunction sum(ScalarFunction a, ScalarFunction b);

// {"kind": "gaussian_bump", "center": 1, "width": 1, "amplitude": 1}, or a bare
// kind string for parameter-free entries such as "identity". Throws
// ValidationError on unknown kinds.
ScalarFunction from_json(const nlohmann::json& j);

}  // namespace rholab::functions
