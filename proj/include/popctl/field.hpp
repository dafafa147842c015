#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "popctl/grid.hpp"

namespace popctl {

enum class FieldShape { trajectory, age_space, time_space };

inline const char* to_string(FieldShape s) {
    switch (s) {
        case FieldShape::trajectory: return "trajectory";
        case FieldShape::age_space: return "age_space";
        case FieldShape::time_space: return "time_space";
    }
    return "?";
}

/// Grid samples of a scalar function.
///
/// Storage is row-major with x fastest: trajectory (t, a, x), age-space
/// slice (a, x), time-space slice (t, x). Slices use the two-index accessors.
class Field {
public:
    Field() = default;

    static Field trajectory(const SpaceTimeGrid& g) {
        return Field(FieldShape::trajectory, g.nt() + 1, g.na() + 1, g.nx() + 1);
    }
    static Field age_space(const SpaceTimeGrid& g) {
        return Field(FieldShape::age_space, 1, g.na() + 1, g.nx() + 1);
    }
    static Field time_space(const SpaceTimeGrid& g) {
        return Field(FieldShape::time_space, g.nt() + 1, 1, g.nx() + 1);
    }
    static Field like(const Field& f) { return Field(f.shape_, f.n0_, f.n1_, f.n2_); }

    [[nodiscard]] FieldShape shape() const { return shape_; }
    [[nodiscard]] std::size_t extent_t() const { return n0_; }
    [[nodiscard]] std::size_t extent_a() const { return n1_; }
    [[nodiscard]] std::size_t extent_x() const { return n2_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }

    [[nodiscard]] bool matches(const SpaceTimeGrid& g) const {
        if (n2_ != g.nx() + 1) return false;
        switch (shape_) {
            case FieldShape::trajectory: return n0_ == g.nt() + 1 && n1_ == g.na() + 1;
            case FieldShape::age_space: return n0_ == 1 && n1_ == g.na() + 1;
            case FieldShape::time_space: return n0_ == g.nt() + 1 && n1_ == 1;
        }
        return false;
    }
    [[nodiscard]] bool same_shape(const Field& o) const {
        return shape_ == o.shape_ && n0_ == o.n0_ && n1_ == o.n1_ && n2_ == o.n2_;
    }

    double& operator()(std::size_t n, std::size_t j, std::size_t i) { return data_[index(n, j, i)]; }
    double operator()(std::size_t n, std::size_t j, std::size_t i) const { return data_[index(n, j, i)]; }

    /// Two-index access for slices: (a, x) or (t, x).
    double& operator()(std::size_t r, std::size_t i) { return data_[slice_index(r, i)]; }
    double operator()(std::size_t r, std::size_t i) const { return data_[slice_index(r, i)]; }

    std::span<double> row(std::size_t n, std::size_t j) { return {data_.data() + index(n, j, 0), n2_}; }
    std::span<const double> row(std::size_t n, std::size_t j) const {
        return {data_.data() + index(n, j, 0), n2_};
    }
    std::span<double> row(std::size_t r) { return {data_.data() + slice_index(r, 0), n2_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + slice_index(r, 0), n2_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    /// Age-space slice at time level n of a trajectory.
    [[nodiscard]] Field time_level(std::size_t n) const {
        require(FieldShape::trajectory, "time_level");
        Field s(FieldShape::age_space, 1, n1_, n2_);
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(index(n, 0, 0)), n1_ * n2_, s.data_.begin());
        return s;
    }
    /// Time-space slice at age level j of a trajectory.
    [[nodiscard]] Field age_level(std::size_t j) const {
        require(FieldShape::trajectory, "age_level");
        Field s(FieldShape::time_space, n0_, 1, n2_);
        for (std::size_t n = 0; n < n0_; ++n) {
            auto src = row(n, j);
            std::copy(src.begin(), src.end(), s.row(n).begin());
        }
        return s;
    }
    void set_time_level(std::size_t n, const Field& slice) {
        require(FieldShape::trajectory, "set_time_level");
        if (slice.shape_ != FieldShape::age_space || slice.n1_ != n1_ || slice.n2_ != n2_)
            throw std::invalid_argument("Field::set_time_level: slice shape mismatch");
        std::copy(slice.data_.begin(), slice.data_.end(),
                  data_.begin() + static_cast<std::ptrdiff_t>(index(n, 0, 0)));
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }
    void require_finite(const char* where) const {
        if (!all_finite()) throw std::runtime_error(std::string(where) + ": non-finite value in field");
    }
    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Field& operator*=(double c) {
        for (double& v : data_) v *= c;
        return *this;
    }
    /// this += c·o
    void axpy(double c, const Field& o) {
        check_same(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += c * o.data_[k];
    }

    friend Field operator+(Field l, const Field& r) { return l += r; }
    friend Field operator-(Field l, const Field& r) { return l -= r; }
    friend Field operator*(double c, Field f) { return f *= c; }
    friend bool operator==(const Field& l, const Field& r) { return l.same_shape(r) && l.data_ == r.data_; }

private:
    Field(FieldShape s, std::size_t n0, std::size_t n1, std::size_t n2)
        : shape_(s), n0_(n0), n1_(n1), n2_(n2), data_(n0 * n1 * n2, 0.0) {}

    [[nodiscard]] std::size_t index(std::size_t n, std::size_t j, std::size_t i) const {
        return (n * n1_ + j) * n2_ + i;
    }
    [[nodiscard]] std::size_t slice_index(std::size_t r, std::size_t i) const {
        return shape_ == FieldShape::time_space ? index(r, 0, i) : index(0, r, i);
    }
    void require(FieldShape s, const char* what) const {
        if (shape_ != s) throw std::invalid_argument(std::string("Field::") + what + ": wrong shape");
    }
    void check_same(const Field& o) const {
        if (!same_shape(o)) throw std::invalid_argument("Field: shape mismatch");
    }

    FieldShape shape_ = FieldShape::age_space;
    std::size_t n0_ = 0, n1_ = 0, n2_ = 0;
    std::vector<double> data_;
};

}  // namespace popctl
