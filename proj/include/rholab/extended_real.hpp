#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace rholab {

// A value in R ∪ {+∞}. Cost functions in this library are bounded below, so
// -∞ never arises; the only non-finite state is +∞.
class ExtendedReal {
public:
    constexpr ExtendedReal() = default;
    ExtendedReal(double v)  // NOLINT: implicit by intent
        : value_(v), infinite_(std::isinf(v) && v > 0.0) {
        if (std::isnan(v) || (std::isinf(v) && v < 0.0)) {
            throw std::domain_error("ExtendedReal: NaN or -inf");
        }
    }

    static ExtendedReal infinity() {
        ExtendedReal r;
        r.infinite_ = true;
        return r;
    }

    constexpr bool is_finite() const { return !infinite_; }
    constexpr bool is_infinite() const { return infinite_; }

    // Finite payload; throws on +∞ so callers cannot silently read a sentinel.
    double value() const {
        if (infinite_) {
            throw std::domain_error("ExtendedReal: value() on +inf");
        }
        return value_;
    }

    // IEEE view, for output and plotting only.
    double to_double() const {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

    friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) return infinity();
        return {a.value_ + b.value_};
    }
    ExtendedReal& operator+=(ExtendedReal o) { return *this = *this + o; }

    // Scaling by a nonnegative weight; 0·∞ = 0 (measure-theoretic convention).
    friend ExtendedReal operator*(double w, ExtendedReal a) {
        if (w < 0.0) {
            throw std::domain_error("ExtendedReal: negative scaling");
        }
        if (a.infinite_) return w == 0.0 ? ExtendedReal{0.0} : infinity();
        return {w * a.value_};
    }
    friend ExtendedReal operator*(ExtendedReal a, double w) { return w * a; }

    friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
        return a.value_ == b.value_;
    }
    friend constexpr std::partial_ordering operator<=>(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ && b.infinite_) return std::partial_ordering::equivalent;
        if (a.infinite_) return std::partial_ordering::greater;
        if (b.infinite_) return std::partial_ordering::less;
        return a.value_ <=> b.value_;
    }

    friend std::ostream& operator<<(std::ostream& os, ExtendedReal a) {
        if (a.infinite_) return os << "+inf";
        return os << a.value_;
    }

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

inline ExtendedReal max(ExtendedReal a, ExtendedReal b) { return a < b ? b : a; }

}  // namespace rholab
