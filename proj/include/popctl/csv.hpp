#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "popctl/field.hpp"
#include "popctl/grid.hpp"

namespace popctl {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return {buf, ptr};
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

/// Column-oriented writer for plot-ready tables.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
        for (std::size_t c = 0; c < header.size(); ++c) out_ << (c ? "," : "") << header[c];
        out_ << '\n';
    }
    void row(const std::vector<double>& values) {
        for (std::size_t c = 0; c < values.size(); ++c) out_ << (c ? "," : "") << format_double(values[c]);
        out_ << '\n';
    }
    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("CsvWriter: write failed");
    }

private:
    std::ofstream out_;
};

/// Long format "t,a,x,value". Age-space slices use `slice_coord` for t; time-space slices use it for a.
inline void write_field_csv(const Field& f, const SpaceTimeGrid& g, const std::string& path, double slice_coord = 0.0) {
    if (!f.matches(g)) throw std::invalid_argument("write_field_csv: field does not match grid");
    CsvWriter w(path, {"t", "a", "x", "value"});
    for (std::size_t n = 0; n < f.extent_t(); ++n)
        for (std::size_t j = 0; j < f.extent_a(); ++j)
            for (std::size_t i = 0; i < f.extent_x(); ++i) {
                const double t = f.shape() == FieldShape::age_space ? slice_coord : g.t(n);
                const double a = f.shape() == FieldShape::time_space ? slice_coord : g.a(j);
                const std::size_t r = f.shape() == FieldShape::age_space ? j : n;
                const double v = f.shape() == FieldShape::trajectory ? f(n, j, i) : f(r, i);
                w.row({t, a, g.x(i), v});
            }
    w.close();
}

namespace detail {

inline std::size_t grid_index(double v, double step, std::size_t count, const char* axis, std::size_t line) {
    const double r = v / step;
    const double k = std::round(r);
    if (!(k >= 0.0) || k > static_cast<double>(count) || std::abs(r - k) > 1e-6)
        throw std::runtime_error("read_field_csv: line " + std::to_string(line) + ": " + axis + " = " +
                                 format_double(v) + " is not a grid coordinate");
    return static_cast<std::size_t>(k);
}

}  // namespace detail

/// Reads a long-format file back into a field of the given shape; every grid point must appear exactly once.
inline Field read_field_csv(const std::string& path, const SpaceTimeGrid& g, FieldShape shape) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_field_csv: cannot open " + path);
    Field f = shape == FieldShape::trajectory ? Field::trajectory(g)
              : shape == FieldShape::age_space ? Field::age_space(g)
                                               : Field::time_space(g);
    std::vector<char> seen(f.size(), 0);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_field_csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,a,x,value") throw std::runtime_error("read_field_csv: header must be t,a,x,value");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string_view> cells;
        for (std::size_t pos = 0;;) {
            const std::size_t end = line.find(',', pos);
            cells.push_back(std::string_view(line).substr(pos, end == std::string::npos ? std::string::npos : end - pos));
            if (end == std::string::npos) break;
            pos = end + 1;
        }
        if (cells.size() != 4) throw std::runtime_error("read_field_csv: line " + std::to_string(lineno) + ": expected 4 columns");
        double v[4];
        for (std::size_t c = 0; c < 4; ++c)
            if (!parse_double(cells[c], v[c]) || !std::isfinite(v[c]))
                throw std::runtime_error("read_field_csv: line " + std::to_string(lineno) + ": non-numeric entry '" +
                                         std::string(cells[c]) + "'");
        const std::size_t n = shape == FieldShape::age_space ? 0 : detail::grid_index(v[0], g.dt(), g.nt(), "t", lineno);
        const std::size_t j = shape == FieldShape::time_space ? 0 : detail::grid_index(v[1], g.da(), g.na(), "a", lineno);
        const std::size_t i = detail::grid_index(v[2], g.dx(), g.nx(), "x", lineno);
        const std::size_t key = (n * f.extent_a() + j) * f.extent_x() + i;
        if (seen[key])
            throw std::runtime_error("read_field_csv: line " + std::to_string(lineno) + ": duplicate point (t=" +
                                     format_double(v[0]) + ", a=" + format_double(v[1]) + ", x=" + format_double(v[2]) + ")");
        seen[key] = 1;
        if (shape == FieldShape::trajectory) f(n, j, i) = v[3];
        else f(shape == FieldShape::age_space ? j : n, i) = v[3];
    }
    for (std::size_t key = 0; key < seen.size(); ++key)
        if (!seen[key]) {
            const std::size_t i = key % f.extent_x();
            const std::size_t j = key / f.extent_x() % f.extent_a();
            const std::size_t n = key / (f.extent_x() * f.extent_a());
            std::ostringstream msg;
            msg << "read_field_csv: missing grid point (";
            if (shape != FieldShape::age_space) msg << "t=" << format_double(g.t(n)) << ", ";
            if (shape != FieldShape::time_space) msg << "a=" << format_double(g.a(j)) << ", ";
            msg << "x=" << format_double(g.x(i)) << ")";
            throw std::runtime_error(msg.str());
        }
    return f;
}

}  // namespace popctl
