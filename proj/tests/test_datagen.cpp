#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spus/datagen.hpp"
#include "spus/rng.hpp"

using namespace spus;

namespace {

double field_sum(const Field& f) {
    double s = 0.0;
    for (double v : f) s += v;
    return s;
}

double max_abs(const Field& f) {
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

// Sod-type left/right states replicated into the four quadrants so the 2D
// problem is uniform along y.
IcSpec sod_spec() {
    IcSpec spec;
    spec.kind = IcKind::riemann_quadrants;
    spec.quadrant_states = {
        1.0,   0.0, 0.0, 1.0,  // bottom-left  (x < 0.5)
        0.125, 0.0, 0.0, 0.1,  // bottom-right
        1.0,   0.0, 0.0, 1.0,  // top-left
        0.125, 0.0, 0.0, 0.1,  // top-right
    };
    return spec;
}

// Independent 1D periodic Rusanov solver for [rho, m, E].
struct Oracle1d {
    std::vector<double> rho, mom, e;
    double dx, gamma;

    void prim(size_t i, double& u, double& p, double& c) const {
        u = mom[i] / rho[i];
        p = (gamma - 1.0) * (e[i] - 0.5 * rho[i] * u * u);
        c = std::sqrt(gamma * p / rho[i]);
    }
    void step(double dt) {
        const size_t n = rho.size();
        std::vector<double> f0(n), f1(n), f2(n);
        for (size_t i = 0; i < n; ++i) {
            const size_t j = (i + 1) % n;
            double ul, pl, cl, ur, pr, cr;
            prim(i, ul, pl, cl);
            prim(j, ur, pr, cr);
            const double smax = std::max(std::abs(ul) + cl, std::abs(ur) + cr);
            f0[i] = 0.5 * (mom[i] + mom[j]) - 0.5 * smax * (rho[j] - rho[i]);
            f1[i] = 0.5 * (mom[i] * ul + pl + mom[j] * ur + pr) - 0.5 * smax * (mom[j] - mom[i]);
            f2[i] = 0.5 * ((e[i] + pl) * ul + (e[j] + pr) * ur) - 0.5 * smax * (e[j] - e[i]);
        }
        const double r = dt / dx;
        for (size_t i = 0; i < n; ++i) {
            const size_t m = (i + n - 1) % n;
            rho[i] -= r * (f0[i] - f0[m]);
            mom[i] -= r * (f1[i] - f1[m]);
            e[i] -= r * (f2[i] - f2[m]);
        }
    }
};

}  // namespace

TEST_CASE("euler solver conserves mass, momentum and energy over 100 steps") {
    IcSpec spec;
    spec.kind = IcKind::riemann_quadrants;
    spec.seed = 5;
    EulerState st = euler_from_primitives(gen_initial_condition(Family::euler, spec, 32, 32), 1.4);
    const double m0 = field_sum(st.rho), px0 = field_sum(st.mx), py0 = field_sum(st.my),
                 e0 = field_sum(st.e);
    for (int k = 0; k < 100; ++k) {
        const double dt = 0.5 * euler_max_dt(st, 1.4, 1.0);
        step_euler(st, dt, 1.4);
    }
    const double scale = std::abs(e0);
    CHECK(std::abs(field_sum(st.rho) - m0) <= 1e-10 * scale);
    CHECK(std::abs(field_sum(st.mx) - px0) <= 1e-10 * scale);
    CHECK(std::abs(field_sum(st.my) - py0) <= 1e-10 * scale);
    CHECK(std::abs(field_sum(st.e) - e0) <= 1e-10 * scale);
}

TEST_CASE("a uniform euler state is a fixed point of the update") {
    FieldStack prim;
    prim.h = prim.w = 8;
    const size_t m = 64;
    prim.fields = {Field(m, 1.2), Field(m, 0.3), Field(m, -0.1), Field(m, 0.9)};
    EulerState st = euler_from_primitives(prim, 1.4);
    const EulerState before = st;
    for (int k = 0; k < 10; ++k) step_euler(st, 0.01, 1.4);
    for (size_t i = 0; i < m; ++i) {
        CHECK(st.rho[i] == doctest::Approx(before.rho[i]).epsilon(1e-13));
        CHECK(st.mx[i] == doctest::Approx(before.mx[i]).epsilon(1e-13));
        CHECK(st.my[i] == doctest::Approx(before.my[i]).epsilon(1e-13));
        CHECK(st.e[i] == doctest::Approx(before.e[i]).epsilon(1e-13));
    }
}

TEST_CASE("the 2D euler solver reproduces an independent 1D Rusanov solver on a Sod tube") {
    const int n = 64;
    EulerState st =
        euler_from_primitives(gen_initial_condition(Family::euler, sod_spec(), 4, n), 1.4);
    Oracle1d oracle;
    oracle.dx = 1.0 / n;
    oracle.gamma = 1.4;
    oracle.rho.resize(n);
    oracle.mom.resize(n);
    oracle.e.resize(n);
    for (int i = 0; i < n; ++i) {
        oracle.rho[i] = st.rho[i];
        oracle.mom[i] = st.mx[i];
        oracle.e[i] = st.e[i];
    }
    for (int k = 0; k < 60; ++k) {
        const double dt = 0.4 * euler_max_dt(st, 1.4, 1.0);
        step_euler(st, dt, 1.4);
        oracle.step(dt);
    }
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < n; ++i) {
            const size_t id = static_cast<size_t>(j) * n + i;
            CHECK(std::abs(st.rho[id] - oracle.rho[i]) <= 1e-11);
            CHECK(std::abs(st.mx[id] - oracle.mom[i]) <= 1e-11);
            CHECK(std::abs(st.my[id]) <= 1e-13);
            CHECK(std::abs(st.e[id] - oracle.e[i]) <= 1e-11);
        }
}

TEST_CASE("euler rejects non-positive density or pressure") {
    FieldStack prim;
    prim.h = prim.w = 4;
    prim.fields = {Field(16, 1.0), Field(16, 0.0), Field(16, 0.0), Field(16, -0.5)};
    CHECK_THROWS_AS(euler_from_primitives(prim, 1.4), stability_error);
    prim.fields[3] = Field(16, 1.0);
    EulerState st = euler_from_primitives(prim, 1.4);
    CHECK_THROWS_AS(step_euler(st, 100.0, 1.4), step_size_error);
}

TEST_CASE("a single vorticity mode decays at exp(-nu k^2 t)") {
    const int n = 32, k = 2;
    const double nu = 0.01, t_end = 1.0;
    Spectral sp(n, 2.0 * M_PI);
    Field omega(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            omega[static_cast<size_t>(j) * n + i] = std::cos(k * (i + 0.5) * 2.0 * M_PI / n);
    const int steps = 200;
    const double dt = t_end / steps;
    for (int s = 0; s < steps; ++s) step_ns(omega, dt, nu, 0.0, 4, sp);
    const double decay = std::exp(-nu * k * k * t_end);
    double worst = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double want = decay * std::cos(k * (i + 0.5) * 2.0 * M_PI / n);
            worst = std::max(worst, std::abs(omega[static_cast<size_t>(j) * n + i] - want));
        }
    CHECK(worst <= 1e-4);
}

TEST_CASE("navier-stokes velocity is divergence free in the spectral sense") {
    IcSpec spec;
    spec.kind = IcKind::gaussian_vorticity;
    spec.seed = 9;
    const int n = 32;
    Spectral sp(n, 2.0 * M_PI);
    Field omega = gen_initial_condition(Family::navier_stokes, spec, n, n).fields[0];
    for (int s = 0; s < 5; ++s) step_ns(omega, 1e-3, 1e-3, 0.0, 4, sp);
    Field u, v;
    ns_velocity(omega, sp, u, v);
    Field div = sp.ddx(u);
    const Field dv = sp.ddy(v);
    for (size_t i = 0; i < div.size(); ++i) div[i] += dv[i];
    CHECK(max_abs(div) <= 1e-10 * std::max(1.0, max_abs(u)));
}

TEST_CASE("mean vorticity is exactly conserved by the transport step") {
    IcSpec spec;
    spec.kind = IcKind::piecewise_constant_vorticity;
    spec.seed = 3;
    const int n = 32;
    Spectral sp(n, 2.0 * M_PI);
    Field omega = gen_initial_condition(Family::navier_stokes, spec, n, n).fields[0];
    const double mean0 = field_sum(omega) / omega.size();
    for (int s = 0; s < 20; ++s) step_ns(omega, 2e-3, 1e-3, 0.0, 4, sp);
    CHECK(std::abs(field_sum(omega) / omega.size() - mean0) <= 1e-12);
}

TEST_CASE("poisson solve inverts the spectral laplacian") {
    const int n = 64;
    Spectral sp(n, 2.0 * M_PI);
    Rng rng(77);
    Field rhs(n * n);
    for (double& v : rhs) v = rng.uniform(-1.0, 1.0);
    const double mean = field_sum(rhs) / rhs.size();
    for (double& v : rhs) v -= mean;
    Field psi = sp.poisson(rhs);
    Field back = sp.laplacian(psi);
    double worst = 0.0;
    for (size_t i = 0; i < rhs.size(); ++i) worst = std::max(worst, std::abs(back[i] - rhs[i]));
    CHECK(worst <= 1e-10);
    CHECK(std::abs(field_sum(psi)) <= 1e-10);
    // non-zero-mean right-hand side has no periodic solution
    for (double& v : rhs) v += 0.5;
    CHECK_THROWS_AS(sp.poisson(rhs), contract_error);
}

TEST_CASE("spectral derivatives are exact for single Fourier modes") {
    const int n = 32;
    Spectral sp(n, 2.0 * M_PI);
    Field f(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            f[static_cast<size_t>(j) * n + i] =
                std::sin(3.0 * (i + 0.5) * 2.0 * M_PI / n) * std::cos(2.0 * (j + 0.5) * 2.0 * M_PI / n);
    Field fx = sp.ddx(f), fy = sp.ddy(f), lap = sp.laplacian(f);
    double w1 = 0.0, w2 = 0.0, w3 = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) * 2.0 * M_PI / n, y = (j + 0.5) * 2.0 * M_PI / n;
            const size_t id = static_cast<size_t>(j) * n + i;
            w1 = std::max(w1, std::abs(fx[id] - 3.0 * std::cos(3.0 * x) * std::cos(2.0 * y)));
            w2 = std::max(w2, std::abs(fy[id] + 2.0 * std::sin(3.0 * x) * std::sin(2.0 * y)));
            w3 = std::max(w3, std::abs(lap[id] + 13.0 * f[id]));
        }
    CHECK(w1 <= 1e-11);
    CHECK(w2 <= 1e-11);
    CHECK(w3 <= 1e-10);
}

TEST_CASE("wave modes follow the scalar leapfrog recurrence of the 5-point stencil") {
    const int n = 32;
    const double c = 1.0, dx = 1.0 / n;
    const double k = 2.0 * M_PI;  // one full period across the domain
    WaveState st;
    st.h = st.w = n;
    st.dx = dx;
    st.w_cur.resize(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            st.w_cur[static_cast<size_t>(j) * n + i] = std::cos(k * (i + 0.5) * dx);
    st.w_prev = st.w_cur;
    const Field speed(n * n, c);
    const double dt = 0.5 * dx / (c * std::sqrt(2.0));

    // A_{m+1} = 2 A_m - A_{m-1} + (c dt/dx)^2 * 2(cos(k dx) - 1) * A_m
    double a_prev = 1.0, a_cur = 1.0;
    const double factor = std::pow(c * dt / dx, 2) * 2.0 * (std::cos(k * dx) - 1.0);
    for (int s = 0; s < 50; ++s) {
        step_wave(st, dt, speed);
        const double a_next = 2.0 * a_cur - a_prev + factor * a_cur;
        a_prev = a_cur;
        a_cur = a_next;
    }
    double worst = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(st.w_cur[static_cast<size_t>(j) * n + i] -
                                             a_cur * std::cos(k * (i + 0.5) * dx)));
    CHECK(worst <= 1e-11);
}

TEST_CASE("leapfrog conserves its discrete energy at half the CFL limit") {
    IcSpec spec;
    spec.kind = IcKind::gaussian_sum_wave;
    spec.seed = 21;
    const int n = 32;
    FieldStack ic = gen_initial_condition(Family::wave, spec, n, n);
    const Field& speed = ic.fields[1];
    WaveState st;
    st.h = st.w = n;
    st.dx = 1.0 / n;
    st.w_cur = ic.fields[0];
    st.w_prev = ic.fields[0];
    double cmax = 0.0;
    for (double cv : speed) cmax = std::max(cmax, cv);
    const double dt = 0.5 * st.dx / (cmax * std::sqrt(2.0));

    // E^n = (1/2dt^2) (w^{n+1}-w^n)^T M (w^{n+1}-w^n) - (1/2) w^{n+1,T} L w^n,
    // M = diag(1/c^2), L = 5-point laplacian / dx^2; exactly conserved
    auto energy = [&](const Field& wn, const Field& wn1) {
        double kin = 0.0, pot = 0.0;
        for (int j = 0; j < n; ++j) {
            const int jm = (j + n - 1) % n, jp = (j + 1) % n;
            for (int i = 0; i < n; ++i) {
                const int im = (i + n - 1) % n, ip = (i + 1) % n;
                const size_t id = static_cast<size_t>(j) * n + i;
                const double d = wn1[id] - wn[id];
                kin += d * d / (speed[id] * speed[id]);
                const double lap = (wn[static_cast<size_t>(j) * n + ip] +
                                    wn[static_cast<size_t>(j) * n + im] +
                                    wn[static_cast<size_t>(jp) * n + i] +
                                    wn[static_cast<size_t>(jm) * n + i] - 4.0 * wn[id]) /
                                   (st.dx * st.dx);
                pot += wn1[id] * lap;
            }
        }
        return kin / (2.0 * dt * dt) - 0.5 * pot;
    };

    step_wave(st, dt, speed);
    const double e0 = energy(st.w_prev, st.w_cur);
    for (int s = 0; s < 200; ++s) step_wave(st, dt, speed);
    const double e1 = energy(st.w_prev, st.w_cur);
    CHECK(std::abs(e1 - e0) <= 1e-9 * std::abs(e0));
    CHECK_THROWS_AS(step_wave(st, 10.0 * st.dx, speed), step_size_error);
}

TEST_CASE("initial conditions are deterministic in the seed") {
    for (auto [family, kind] :
         {std::pair{Family::euler, IcKind::kelvin_helmholtz_shear},
          std::pair{Family::navier_stokes, IcKind::gaussian_vorticity},
          std::pair{Family::wave, IcKind::gaussian_sum_wave}}) {
        IcSpec spec;
        spec.kind = kind;
        spec.seed = 1234;
        FieldStack a = gen_initial_condition(family, spec, 16, 16);
        FieldStack b = gen_initial_condition(family, spec, 16, 16);
        spec.seed = 1235;
        FieldStack c = gen_initial_condition(family, spec, 16, 16);
        REQUIRE(a.fields.size() == b.fields.size());
        bool equal = true, differs = false;
        for (size_t f = 0; f < a.fields.size(); ++f) {
            if (a.fields[f] != b.fields[f]) equal = false;
            if (a.fields[f] != c.fields[f]) differs = true;
        }
        CHECK(equal);
        CHECK(differs);
    }
}

TEST_CASE("explicit quadrant states are placed exactly") {
    FieldStack st = gen_initial_condition(Family::euler, sod_spec(), 8, 8);
    // left half of the first row: the left state; right half: the right state
    CHECK(st.fields[0][0] == 1.0);
    CHECK(st.fields[3][0] == 1.0);
    CHECK(st.fields[0][7] == 0.125);
    CHECK(st.fields[3][7] == 0.1);
    CHECK(st.fields[1][3] == 0.0);
    IcSpec bad = sod_spec();
    bad.quadrant_states.pop_back();
    CHECK_THROWS_AS(gen_initial_condition(Family::euler, bad, 8, 8), config_error);
}

TEST_CASE("piecewise-constant vorticity forms a 4x4 block pattern") {
    IcSpec spec;
    spec.kind = IcKind::piecewise_constant_vorticity;
    spec.seed = 8;
    FieldStack st = gen_initial_condition(Family::navier_stokes, spec, 16, 16);
    const Field& f = st.fields[0];
    for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) {
            // every cell matches the top-left cell of its 4x4 block
            const size_t anchor = static_cast<size_t>(j / 4 * 4) * 16 + (i / 4 * 4);
            CHECK(f[static_cast<size_t>(j) * 16 + i] == f[anchor]);
        }
}

TEST_CASE("wave speed fields respect the lower bound") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        IcSpec spec;
        spec.kind = IcKind::gaussian_sum_wave;
        spec.seed = seed;
        FieldStack st = gen_initial_condition(Family::wave, spec, 16, 16);
        for (double c : st.fields[1]) CHECK(c >= 0.3);
    }
}

TEST_CASE("family/ic combinations are validated") {
    IcSpec spec;
    spec.kind = IcKind::gaussian_sum_wave;
    CHECK_THROWS_AS(gen_initial_condition(Family::euler, spec, 8, 8), config_error);
    spec.kind = IcKind::riemann_quadrants;
    CHECK_THROWS_AS(gen_initial_condition(Family::navier_stokes, spec, 8, 8), config_error);
    spec.kind = IcKind::double_shear_layer;
    CHECK_THROWS_AS(gen_initial_condition(Family::wave, spec, 8, 8), config_error);
    // the vorticity-derived euler IC needs a spectral-friendly grid
    spec.kind = IcKind::gaussian_vorticity;
    CHECK_THROWS_AS(gen_initial_condition(Family::euler, spec, 12, 12), config_error);
}

TEST_CASE("generate_trajectory records n+1 snapshots at the requested spacing") {
    IcSpec spec;
    spec.kind = IcKind::gaussian_sum_wave;
    spec.seed = 2;
    SolverParams params;
    Trajectory traj = generate_trajectory(Family::wave, spec, 16, 16, 5, params);
    CHECK(traj.snapshots() == 6);
    CHECK(traj.fields() == 1);
    CHECK(traj.dt == doctest::Approx(1.0 / 5.0).epsilon(1e-15));
    CHECK(traj.field_names == std::vector<std::string>{"w"});
    // the first snapshot is the initial condition itself
    FieldStack ic = gen_initial_condition(Family::wave, spec, 16, 16);
    CHECK(traj.data[0][0] == ic.fields[0]);

    CHECK_THROWS_AS(generate_trajectory(Family::wave, spec, 16, 16, 0, params), contract_error);
    IcSpec ns;
    ns.kind = IcKind::gaussian_vorticity;
    CHECK_THROWS_AS(generate_trajectory(Family::navier_stokes, ns, 12, 12, 2, params),
                    config_error);
}

TEST_CASE("generated euler snapshots carry consistent primitive and conserved fields") {
    IcSpec spec;
    spec.kind = IcKind::riemann_quadrants_perturbed;
    spec.seed = 4;
    SolverParams params;
    Trajectory traj = generate_trajectory(Family::euler, spec, 16, 16, 3, params);
    CHECK(traj.snapshots() == 4);
    CHECK(traj.field_names == std::vector<std::string>({"rho", "u", "v", "p", "E"}));
    for (const auto& snap : traj.data)
        for (size_t i = 0; i < snap[0].size(); ++i) {
            const double rho = snap[0][i], u = snap[1][i], v = snap[2][i], p = snap[3][i],
                         e = snap[4][i];
            CHECK(rho > 0.0);
            CHECK(p > 0.0);
            CHECK(e == doctest::Approx(p / 0.4 + 0.5 * rho * (u * u + v * v)).epsilon(1e-12));
        }
}

TEST_CASE("family name round trips") {
    for (Family f : {Family::euler, Family::navier_stokes, Family::wave}) {
        CHECK(family_from_name(family_name(f)) == f);
        CHECK(static_cast<int>(family_field_names(f).size()) == field_count(f));
    }
    CHECK_THROWS_AS(family_from_name("heat"), config_error);
    CHECK_THROWS_AS(ic_kind_from_name("vortex"), config_error);
}
