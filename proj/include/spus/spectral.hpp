#pragma once

#include <complex>
#include <vector>

#include "spus/errors.hpp"

namespace spus {

using Field = std::vector<double>;  // row-major [y*n + x]

// FFT-backed periodic operators on an n x n grid over a square domain of
// side `length`. n must be a power of two. Plans are cached per instance.
class Spectral {
public:
    Spectral(int n, double length);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    int n() const { return n_; }
    double length() const { return length_; }

    // Solves lap(psi) = rhs with zero-mean psi. rhs must have zero mean.
    Field poisson(const Field& rhs) const;
    // Spectral partial derivatives (Nyquist mode zeroed).
    Field ddx(const Field& f) const;
    Field ddy(const Field& f) const;
    // Exact spectral Laplacian.
    Field laplacian(const Field& f) const;

private:
    struct Plans;
    void to_spectral(const Field& f) const;
    Field from_spectral() const;

    int n_;
    double length_;
    Plans* plans_;
};

bool is_power_of_two(int n);

}  // namespace spus
