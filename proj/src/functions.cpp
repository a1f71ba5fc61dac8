#include "rholab/functions.hpp"

#include <algorithm>
#include <cmath>

#include "rholab/errors.hpp"

namespace rholab::functions {

ScalarFunction gaussian_bump(double center, double width, double amplitude) {
    if (!(width > 0.0)) throw ValidationError("gaussian_bump: width must be positive");
    return {[=](double x) {
                double u = (x - center) / width;
                return amplitude * std::exp(-u * u);
            },
            {{"kind", "gaussian_bump"}, {"center", center}, {"width", width}, {"amplitude", amplitude}}};
}

ScalarFunction linear(double slope, double intercept) {
    return {[=](double x) { return slope * x + intercept; },
            {{"kind", "linear"}, {"slope", slope}, {"intercept", intercept}}};
}

ScalarFunction clipped_linear(double slope, double lo, double hi) {
    if (!(lo <= hi)) throw ValidationError("clipped_linear: need lo <= hi");
    nlohmann::json spec = {{"kind", "clipped_linear"}, {"slope", slope}};
    if (std::isfinite(lo)) spec["lo"] = lo;
    if (std::isfinite(hi)) spec["hi"] = hi;
    return {[=](double x) { return std::clamp(slope * x, lo, hi); }, spec};
}

ScalarFunction constant(double c) {
    return {[=](double) { return c; }, {{"kind", "constant"}, {"value", c}}};
}

ScalarFunction tanh_fn(double scale, double amplitude) {
    return {[=](double x) { return amplitude * std::tanh(scale * x); },
            {{"kind", "tanh"}, {"scale", scale}, {"amplitude", amplitude}}};
}

ScalarFunction square(double scale) {
    return {[=](double x) { return scale * x * x; }, {{"kind", "square"}, {"scale", scale}}};
}

ScalarFunction identity() {
    return {[](double x) { return x; }, {{"kind", "identity"}}};
}

ScalarFunction sum(ScalarFunction a, ScalarFunction b) {
    nlohmann::json spec = {{"kind", "sum"}, {"terms", {a.spec, b.spec}}};
    return {[a = std::move(a), b = std::move(b)](double x) { return a(x) + b(x); }, spec};
}

ScalarFunction from_json(const nlohmann::json& j) {
    if (j.is_string()) return from_json(nlohmann::json{{"kind", j.get<std::string>()}});
    if (j.is_number()) return constant(j.get<double>());
    if (!j.is_object() || !j.contains("kind")) {
        throw ValidationError("function: expected an object with 'kind'");
    }
    std::string k = j.at("kind").get<std::string>();
    auto num = [&](const char* key, double def) { return j.contains(key) ? j.at(key).get<double>() : def; };
    auto need = [&](const char* key) {
        if (!j.contains(key)) throw ValidationError("function " + k + ": missing '" + key + "'");
        return j.at(key).get<double>();
    };
    if (k == "gaussian_bump") return gaussian_bump(num("center", 1.0), num("width", 1.0), num("amplitude", 1.0));
    if (k == "linear") return linear(need("slope"), num("intercept", 0.0));
    if (k == "clipped_linear") return clipped_linear(need("slope"), num("lo", -INFINITY), num("hi", INFINITY));
    if (k == "constant") return constant(need("value"));
    if (k == "tanh") return tanh_fn(num("scale", 1.0), num("amplitude", 1.0));
    if (k == "square") return square(num("scale", 1.0));
    if (k == "identity") return identity();
    if (k == "sum") {
        const auto& t = j.at("terms");
        if (!t.is_array() || t.size() != 2) throw ValidationError("function sum: need two terms");
        return sum(from_json(t[0]), from_json(t[1]));
    }
    throw ValidationError("function: unknown kind '" + k + "'");
}

}  // namespace rholab::functions
