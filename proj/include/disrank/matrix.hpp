#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace disrank {

/// Dense row-major matrix of doubles. Rows are samples throughout the toolkit.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : m_rows(rows), m_cols(cols), m_data(rows * cols, fill) {}

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    bool empty() const noexcept { return m_data.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept {
        assert(r < m_rows && c < m_cols);
        return m_data[r * m_cols + c];
    }
    double operator()(std::size_t r, std::size_t c) const noexcept {
        assert(r < m_rows && c < m_cols);
        return m_data[r * m_cols + c];
    }

    std::span<double> row(std::size_t r) noexcept { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {m_data.data() + r * m_cols, m_cols};
    }

    std::span<double> data() noexcept { return m_data; }
    std::span<const double> data() const noexcept { return m_data; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<double> m_data;
};

} // namespace disrank
