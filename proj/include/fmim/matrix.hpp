#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fmim {

// Dense row-major matrix of doubles. Small and deliberately boring; all the
// heavy lifting in this project is plain loops over this storage.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    static Matrix from_rows(const std::vector<std::vector<double>>& rws) {
        Matrix m(static_cast<int>(rws.size()), rws.empty() ? 0 : static_cast<int>(rws[0].size()));
        for (int i = 0; i < m.rows; ++i) {
            if (static_cast<int>(rws[i].size()) != m.cols)
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            for (int j = 0; j < m.cols; ++j) m(i, j) = rws[i][j];
        }
        return m;
    }

    double& operator()(int i, int j) {
        return a[static_cast<size_t>(i) * static_cast<size_t>(cols) + static_cast<size_t>(j)];
    }
    double operator()(int i, int j) const {
        return a[static_cast<size_t>(i) * static_cast<size_t>(cols) + static_cast<size_t>(j)];
    }

    double* row_ptr(int i) { return a.data() + static_cast<size_t>(i) * static_cast<size_t>(cols); }
    const double* row_ptr(int i) const {
        return a.data() + static_cast<size_t>(i) * static_cast<size_t>(cols);
    }

    size_t size() const { return a.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { a.assign(a.size(), v); }
};

}  // namespace fmim
