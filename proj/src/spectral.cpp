#include "spus/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>

namespace spus {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct Spectral::Plans {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    double* real = nullptr;
    fftw_complex* spec = nullptr;
};

Spectral::Spectral(int n, double length) : n_(n), length_(length) {
    if (!is_power_of_two(n)) throw config_error("spectral grid must be a power of two, got " +
                                                std::to_string(n));
    plans_ = new Plans;
    plans_->real = fftw_alloc_real(static_cast<size_t>(n) * n);
    plans_->spec = fftw_alloc_complex(static_cast<size_t>(n) * (n / 2 + 1));
    plans_->fwd = fftw_plan_dft_r2c_2d(n, n, plans_->real, plans_->spec, FFTW_ESTIMATE);
    plans_->bwd = fftw_plan_dft_c2r_2d(n, n, plans_->spec, plans_->real, FFTW_ESTIMATE);
}

Spectral::~Spectral() {
    fftw_destroy_plan(plans_->fwd);
    fftw_destroy_plan(plans_->bwd);
    fftw_free(plans_->real);
    fftw_free(plans_->spec);
    delete plans_;
}

void Spectral::to_spectral(const Field& f) const {
    if (static_cast<int>(f.size()) != n_ * n_)
        throw shape_error("field size does not match spectral grid");
    std::memcpy(plans_->real, f.data(), f.size() * sizeof(double));
    fftw_execute(plans_->fwd);
}

Field Spectral::from_spectral() const {
    fftw_execute(plans_->bwd);
    Field out(static_cast<size_t>(n_) * n_);
    const double scale = 1.0 / (static_cast<double>(n_) * n_);
    for (size_t i = 0; i < out.size(); ++i) out[i] = plans_->real[i] * scale;
    return out;
}

// Wavenumber for row/col index j (c2r full axis).
static double wavenum(int j, int n, double length) {
    const int k = j <= n / 2 ? j : j - n;
    return 2.0 * M_PI * k / length;
}

Field Spectral::poisson(const Field& rhs) const {
    double mean = 0.0;
    for (double v : rhs) mean += v;
    mean /= static_cast<double>(rhs.size());
    double scale = 0.0;
    for (double v : rhs) scale = std::max(scale, std::abs(v));
    if (std::abs(mean) > 1e-12 * std::max(scale, 1.0))
        throw contract_error("poisson rhs must have zero mean (got mean " + std::to_string(mean) +
                             ")");
    to_spectral(rhs);
    const int hw = n_ / 2 + 1;
    for (int jy = 0; jy < n_; ++jy) {
        const double ky = wavenum(jy, n_, length_);
        for (int jx = 0; jx < hw; ++jx) {
            const double kx = wavenum(jx, n_, length_);
            const double k2 = kx * kx + ky * ky;
            fftw_complex& c = plans_->spec[static_cast<size_t>(jy) * hw + jx];
            if (k2 == 0.0) {
                c[0] = 0.0;
                c[1] = 0.0;
            } else {
                c[0] /= -k2;
                c[1] /= -k2;
            }
        }
    }
    return from_spectral();
}

Field Spectral::ddx(const Field& f) const {
    to_spectral(f);
    const int hw = n_ / 2 + 1;
    for (int jy = 0; jy < n_; ++jy) {
        for (int jx = 0; jx < hw; ++jx) {
            const double kx = jx == n_ / 2 ? 0.0 : wavenum(jx, n_, length_);
            fftw_complex& c = plans_->spec[static_cast<size_t>(jy) * hw + jx];
            const double re = c[0], im = c[1];
            c[0] = -kx * im;
            c[1] = kx * re;
        }
    }
    return from_spectral();
}

Field Spectral::ddy(const Field& f) const {
    to_spectral(f);
    const int hw = n_ / 2 + 1;
    for (int jy = 0; jy < n_; ++jy) {
        const double ky = jy == n_ / 2 ? 0.0 : wavenum(jy, n_, length_);
        for (int jx = 0; jx < hw; ++jx) {
            fftw_complex& c = plans_->spec[static_cast<size_t>(jy) * hw + jx];
            const double re = c[0], im = c[1];
            c[0] = -ky * im;
            c[1] = ky * re;
        }
    }
    return from_spectral();
}

Field Spectral::laplacian(const Field& f) const {
    to_spectral(f);
    const int hw = n_ / 2 + 1;
    for (int jy = 0; jy < n_; ++jy) {
        const double ky = wavenum(jy, n_, length_);
        for (int jx = 0; jx < hw; ++jx) {
            const double kx = wavenum(jx, n_, length_);
            const double k2 = kx * kx + ky * ky;
            fftw_complex& c = plans_->spec[static_cast<size_t>(jy) * hw + jx];
            c[0] *= -k2;
            c[1] *= -k2;
        }
    }
    return from_spectral();
}

}  // namespace spus
