#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ctxseg/errors.hpp"

namespace ctxseg {

// Minimal dense row-major matrix; everything here is C x C or C x T sized.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
};

inline std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& row_names = {}) {
    std::ostringstream out;
    out << std::setprecision(12);
    for (int r = 0; r < m.rows; ++r) {
        if (!row_names.empty()) out << row_names[r] << ",";
        for (int c = 0; c < m.cols; ++c) {
            out << m(r, c);
            out << (c + 1 < m.cols ? "," : "\n");
        }
    }
    return out.str();
}

inline void save_csv(const Matrix& m, const std::string& path,
                     const std::vector<std::string>& row_names = {}) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write " + path);
    out << matrix_to_csv(m, row_names);
}

}  // namespace ctxseg
