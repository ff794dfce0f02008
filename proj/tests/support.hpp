#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include "longtail/data.hpp"
#include "longtail/rng.hpp"
#include "longtail/types.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace longtail::testing {

inline Vector random_vector(Rng& rng, Eigen::Index n, double scale = 1.0)
{
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = scale * rng.normal();
    }
    return v;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
{
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = scale * rng.normal();
        }
    }
    return m;
}

// Central difference of f along every coordinate of x.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, Vector x,
                               double eps = 1e-5)
{
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double up = f(x);
        x[i] = saved - eps;
        const double down = f(x);
        x[i] = saved;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

// max |a - b| / max(|a|, |b|, floor), elementwise.
inline double relative_error(const Vector& a, const Vector& b, double floor = 1e-6)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

// Gaussian blobs with explicit counts and centroids on scaled basis vectors.
inline Dataset blobs(const std::vector<std::size_t>& counts, int dim, double separation,
                     std::uint64_t seed)
{
    Rng rng(seed);
    const int classes = static_cast<int>(counts.size());
    std::size_t total = 0;
    for (auto c : counts) {
        total += c;
    }
    RowMatrix features(static_cast<Eigen::Index>(total), dim);
    std::vector<int> labels;
    Eigen::Index row = 0;
    for (int c = 0; c < classes; ++c) {
        for (std::size_t k = 0; k < counts[static_cast<std::size_t>(c)]; ++k) {
            for (int j = 0; j < dim; ++j) {
                features(row, j) = rng.normal() + (j == c % dim ? separation : 0.0);
            }
            labels.push_back(c);
            ++row;
        }
    }
    return make_dataset(std::move(features), std::move(labels), classes);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("longtail_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace longtail::testing
