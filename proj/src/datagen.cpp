#include "spus/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "spus/rng.hpp"

namespace spus {

int field_count(Family family) {
    switch (family) {
        case Family::euler: return 5;
        case Family::navier_stokes: return 2;
        case Family::wave: return 1;
    }
    throw config_error("unknown family tag");
}

std::vector<std::string> family_field_names(Family family) {
    switch (family) {
        case Family::euler: return {"rho", "u", "v", "p", "E"};
        case Family::navier_stokes: return {"u", "v"};
        case Family::wave: return {"w"};
    }
    throw config_error("unknown family tag");
}

std::string family_name(Family family) {
    switch (family) {
        case Family::euler: return "euler";
        case Family::navier_stokes: return "navier-stokes";
        case Family::wave: return "wave";
    }
    throw config_error("unknown family tag");
}

Family family_from_name(const std::string& name) {
    if (name == "euler") return Family::euler;
    if (name == "navier-stokes" || name == "ns") return Family::navier_stokes;
    if (name == "wave") return Family::wave;
    throw config_error("unknown family: " + name);
}

std::string ic_kind_name(IcKind kind) {
    switch (kind) {
        case IcKind::riemann_quadrants: return "riemann-quadrants";
        case IcKind::riemann_quadrants_perturbed: return "riemann-quadrants-perturbed";
        case IcKind::kelvin_helmholtz_shear: return "kelvin-helmholtz-shear";
        case IcKind::gaussian_vorticity: return "gaussian-vorticity";
        case IcKind::piecewise_constant_vorticity: return "piecewise-constant-vorticity";
        case IcKind::double_shear_layer: return "double-shear-layer";
        case IcKind::gaussian_sum_wave: return "gaussian-sum-wave";
    }
    throw config_error("unknown ic kind");
}

IcKind ic_kind_from_name(const std::string& name) {
    for (IcKind k :
         {IcKind::riemann_quadrants, IcKind::riemann_quadrants_perturbed,
          IcKind::kelvin_helmholtz_shear, IcKind::gaussian_vorticity,
          IcKind::piecewise_constant_vorticity, IcKind::double_shear_layer,
          IcKind::gaussian_sum_wave})
        if (ic_kind_name(k) == name) return k;
    throw config_error("unknown ic kind: " + name);
}

namespace {

double min_image(double d, double length) {
    while (d > 0.5 * length) d -= length;
    while (d < -0.5 * length) d += length;
    return d;
}

// Gaussian bump on the periodic domain (minimum-image distance).
double periodic_gaussian(double x, double y, double cx, double cy, double sigma, double length) {
    const double dx = min_image(x - cx, length);
    const double dy = min_image(y - cy, length);
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

FieldStack make_stack(int h, int w, int nfields) {
    FieldStack st;
    st.h = h;
    st.w = w;
    st.fields.assign(nfields, Field(static_cast<size_t>(h) * w, 0.0));
    return st;
}

FieldStack ic_riemann(const IcSpec& spec, int h, int w, bool perturbed) {
    Rng rng(spec.seed);
    // quadrant states [rho, u, v, p]
    double q[4][4];
    if (!spec.quadrant_states.empty()) {
        if (spec.quadrant_states.size() != 16)
            throw config_error("quadrant_states must hold 16 values");
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) q[i][j] = spec.quadrant_states[i * 4 + j];
    } else {
        for (int i = 0; i < 4; ++i) {
            q[i][0] = rng.uniform(0.5, 1.5);
            q[i][1] = spec.amplitude * rng.uniform(-0.3, 0.3);
            q[i][2] = spec.amplitude * rng.uniform(-0.3, 0.3);
            q[i][3] = rng.uniform(0.5, 1.5);
        }
    }
    double x0 = 0.5, y0 = 0.5;
    if (perturbed) {
        x0 += 0.1 * (2.0 * rng.uniform() - 1.0);
        y0 += 0.1 * (2.0 * rng.uniform() - 1.0);
    }
    FieldStack st = make_stack(h, w, 4);
    for (int j = 0; j < h; ++j) {
        const double y = (j + 0.5) / h;
        for (int i = 0; i < w; ++i) {
            const double x = (i + 0.5) / w;
            const int quad = (x < x0 ? 0 : 1) + (y < y0 ? 0 : 2);
            for (int f = 0; f < 4; ++f) st.fields[f][static_cast<size_t>(j) * w + i] = q[quad][f];
        }
    }
    return st;
}

FieldStack ic_kelvin_helmholtz(const IcSpec& spec, int h, int w) {
    Rng rng(spec.seed);
    const double delta = rng.uniform(0.02, 0.04);
    const double u0 = rng.uniform(0.3, 0.7);
    const int kx = 2 + static_cast<int>(rng.below(3));
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double vamp = 0.05 * spec.amplitude;
    FieldStack st = make_stack(h, w, 4);
    for (int j = 0; j < h; ++j) {
        const double y = (j + 0.5) / h;
        const double s =
            0.5 * (std::tanh((y - 0.25) / delta) - std::tanh((y - 0.75) / delta));
        const double envelope = std::exp(-std::pow(y - 0.25, 2) / (2.0 * 0.03 * 0.03)) +
                                std::exp(-std::pow(y - 0.75, 2) / (2.0 * 0.03 * 0.03));
        for (int i = 0; i < w; ++i) {
            const double x = (i + 0.5) / w;
            const size_t id = static_cast<size_t>(j) * w + i;
            st.fields[0][id] = 1.0 + 0.5 * s;
            st.fields[1][id] = u0 * (2.0 * s - 1.0);
            st.fields[2][id] = vamp * std::sin(2.0 * M_PI * kx * x + phase) * envelope;
            st.fields[3][id] = 2.5;
        }
    }
    return st;
}

Field gaussian_vorticity_field(const IcSpec& spec, int h, int w, double length) {
    Rng rng(spec.seed);
    const int m = 3 + static_cast<int>(rng.below(3));
    Field omega(static_cast<size_t>(h) * w, 0.0);
    for (int g = 0; g < m; ++g) {
        const double cx = rng.uniform(0.0, length);
        const double cy = rng.uniform(0.0, length);
        const double sigma = rng.uniform(0.05, 0.1) * length;
        const double amp = spec.amplitude * (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                           rng.uniform(0.5, 1.5);
        for (int j = 0; j < h; ++j) {
            const double y = (j + 0.5) * length / h;
            for (int i = 0; i < w; ++i) {
                const double x = (i + 0.5) * length / w;
                omega[static_cast<size_t>(j) * w + i] +=
                    amp * periodic_gaussian(x, y, cx, cy, sigma, length);
            }
        }
    }
    return omega;
}

FieldStack ic_euler_gaussian_vorticity(const IcSpec& spec, int h, int w) {
    if (h != w || !is_power_of_two(h))
        throw config_error("gaussian-vorticity euler IC needs a square power-of-two grid");
    Field omega = gaussian_vorticity_field(spec, h, w, 1.0);
    double mean = 0.0;
    for (double v : omega) mean += v;
    mean /= static_cast<double>(omega.size());
    for (double& v : omega) v -= mean;
    Spectral sp(h, 1.0);
    Field neg = omega;
    for (double& v : neg) v = -v;
    Field psi = sp.poisson(neg);
    Field u = sp.ddy(psi);
    Field vv = sp.ddx(psi);
    FieldStack st = make_stack(h, w, 4);
    for (size_t i = 0; i < omega.size(); ++i) {
        st.fields[0][i] = 1.0;
        st.fields[1][i] = u[i];
        st.fields[2][i] = -vv[i];
        st.fields[3][i] = 2.5;
    }
    return st;
}

FieldStack ic_piecewise_vorticity(const IcSpec& spec, int h, int w) {
    Rng rng(spec.seed);
    const int blocks = 4;
    double vals[blocks][blocks];
    for (auto& row : vals)
        for (double& v : row) v = spec.amplitude * rng.uniform(-1.0, 1.0);
    FieldStack st = make_stack(h, w, 1);
    for (int j = 0; j < h; ++j) {
        const int bj = std::min(j * blocks / h, blocks - 1);
        for (int i = 0; i < w; ++i) {
            const int bi = std::min(i * blocks / w, blocks - 1);
            st.fields[0][static_cast<size_t>(j) * w + i] = vals[bj][bi];
        }
    }
    return st;
}

FieldStack ic_double_shear(const IcSpec& spec, int h, int w) {
    Rng rng(spec.seed);
    const double length = 2.0 * M_PI;
    const double delta = rng.uniform(0.2, 0.4);
    const double eps = spec.amplitude * rng.uniform(0.02, 0.08);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    FieldStack st = make_stack(h, w, 1);
    for (int j = 0; j < h; ++j) {
        const double y = (j + 0.5) * length / h;
        double shear;
        if (y < M_PI) {
            const double t = std::tanh((y - 0.5 * M_PI) / delta);
            shear = -(1.0 - t * t) / delta;
        } else {
            const double t = std::tanh((1.5 * M_PI - y) / delta);
            shear = (1.0 - t * t) / delta;
        }
        for (int i = 0; i < w; ++i) {
            const double x = (i + 0.5) * length / w;
            st.fields[0][static_cast<size_t>(j) * w + i] = eps * std::cos(x + phase) + shear;
        }
    }
    return st;
}

FieldStack ic_wave_gaussians(const IcSpec& spec, int h, int w) {
    Rng rng(spec.seed);
    FieldStack st = make_stack(h, w, 2);
    const int m = 2 + static_cast<int>(rng.below(3));
    for (int g = 0; g < m; ++g) {
        const double cx = rng.uniform(0.0, 1.0), cy = rng.uniform(0.0, 1.0);
        const double sigma = rng.uniform(0.05, 0.12);
        const double amp = spec.amplitude * rng.uniform(0.5, 1.0);
        for (int j = 0; j < h; ++j) {
            const double y = (j + 0.5) / h;
            for (int i = 0; i < w; ++i) {
                const double x = (i + 0.5) / w;
                st.fields[0][static_cast<size_t>(j) * w + i] +=
                    amp * periodic_gaussian(x, y, cx, cy, sigma, 1.0);
            }
        }
    }
    // Smooth spatially varying wave speed, bounded away from zero.
    for (int g = 0; g < 3; ++g) {
        const double cx = rng.uniform(0.0, 1.0), cy = rng.uniform(0.0, 1.0);
        const double sigma = rng.uniform(0.1, 0.25);
        const double amp = rng.uniform(-0.4, 0.6);
        for (int j = 0; j < h; ++j) {
            const double y = (j + 0.5) / h;
            for (int i = 0; i < w; ++i) {
                const double x = (i + 0.5) / w;
                st.fields[1][static_cast<size_t>(j) * w + i] +=
                    amp * periodic_gaussian(x, y, cx, cy, sigma, 1.0);
            }
        }
    }
    for (double& c : st.fields[1]) c = std::max(0.3, 1.0 + c);
    return st;
}

}  // namespace

FieldStack gen_initial_condition(Family family, const IcSpec& spec, int h, int w) {
    if (h < 2 || w < 2) throw config_error("grid must be at least 2x2");
    switch (family) {
        case Family::euler:
            switch (spec.kind) {
                case IcKind::riemann_quadrants: return ic_riemann(spec, h, w, false);
                case IcKind::riemann_quadrants_perturbed: return ic_riemann(spec, h, w, true);
                case IcKind::kelvin_helmholtz_shear: return ic_kelvin_helmholtz(spec, h, w);
                case IcKind::gaussian_vorticity: return ic_euler_gaussian_vorticity(spec, h, w);
                default: break;
            }
            break;
        case Family::navier_stokes:
            switch (spec.kind) {
                case IcKind::gaussian_vorticity: {
                    FieldStack st = make_stack(h, w, 1);
                    st.fields[0] = gaussian_vorticity_field(spec, h, w, 2.0 * M_PI);
                    return st;
                }
                case IcKind::piecewise_constant_vorticity:
                    return ic_piecewise_vorticity(spec, h, w);
                case IcKind::double_shear_layer: return ic_double_shear(spec, h, w);
                default: break;
            }
            break;
        case Family::wave:
            if (spec.kind == IcKind::gaussian_sum_wave) return ic_wave_gaussians(spec, h, w);
            break;
    }
    throw config_error("ic kind " + ic_kind_name(spec.kind) + " not valid for family " +
                       family_name(family));
}

EulerState euler_from_primitives(const FieldStack& prim, double gas_gamma) {
    if (prim.fields.size() != 4) throw config_error("euler primitives need 4 fields");
    EulerState s;
    s.h = prim.h;
    s.w = prim.w;
    s.dx = 1.0 / prim.w;
    s.dy = 1.0 / prim.h;
    const size_t m = static_cast<size_t>(prim.h) * prim.w;
    s.rho.resize(m);
    s.mx.resize(m);
    s.my.resize(m);
    s.e.resize(m);
    for (size_t i = 0; i < m; ++i) {
        const double rho = prim.fields[0][i], u = prim.fields[1][i], v = prim.fields[2][i],
                     p = prim.fields[3][i];
        if (rho <= 0.0 || p <= 0.0)
            throw stability_error("non-positive density/pressure in initial condition");
        s.rho[i] = rho;
        s.mx[i] = rho * u;
        s.my[i] = rho * v;
        s.e[i] = p / (gas_gamma - 1.0) + 0.5 * rho * (u * u + v * v);
    }
    return s;
}

namespace {

inline void euler_primitive(double rho, double mx, double my, double e, double gamma, double& u,
                            double& v, double& p, double& c) {
    u = mx / rho;
    v = my / rho;
    p = (gamma - 1.0) * (e - 0.5 * rho * (u * u + v * v));
    c = std::sqrt(gamma * std::max(p, 1e-300) / rho);
}

double euler_lambda(const EulerState& s, double gamma) {
    double lam = 0.0;
    for (size_t i = 0; i < s.rho.size(); ++i) {
        double u, v, p, c;
        euler_primitive(s.rho[i], s.mx[i], s.my[i], s.e[i], gamma, u, v, p, c);
        if (s.rho[i] <= 0.0 || p <= 0.0)
            throw stability_error("non-positive density/pressure at cell " + std::to_string(i));
        lam = std::max(lam, (std::abs(u) + c) / s.dx + (std::abs(v) + c) / s.dy);
    }
    return lam;
}

}  // namespace

double euler_max_dt(const EulerState& state, double gas_gamma, double cfl) {
    return cfl / euler_lambda(state, gas_gamma);
}

void step_euler(EulerState& s, double dt, double gas_gamma) {
    const double lam = euler_lambda(s, gas_gamma);
    if (dt * lam > 1.0 + 1e-12)
        throw step_size_error("dt " + std::to_string(dt) + " exceeds CFL bound " +
                              std::to_string(1.0 / lam));
    const int h = s.h, w = s.w;
    const size_t m = static_cast<size_t>(h) * w;
    Field nrho = s.rho, nmx = s.mx, nmy = s.my, ne = s.e;
    const double rx = dt / s.dx, ry = dt / s.dy;

    auto idx = [w](int j, int i) { return static_cast<size_t>(j) * w + i; };

    // x-direction Rusanov fluxes across (i, i+1) interfaces
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            const size_t a = idx(j, i);
            const size_t b = idx(j, (i + 1) % w);
            double ul, vl, pl, cl, ur, vr, pr, cr;
            euler_primitive(s.rho[a], s.mx[a], s.my[a], s.e[a], gas_gamma, ul, vl, pl, cl);
            euler_primitive(s.rho[b], s.mx[b], s.my[b], s.e[b], gas_gamma, ur, vr, pr, cr);
            const double smax = std::max(std::abs(ul) + cl, std::abs(ur) + cr);
            const double f0 = 0.5 * (s.mx[a] + s.mx[b]) - 0.5 * smax * (s.rho[b] - s.rho[a]);
            const double f1 = 0.5 * (s.mx[a] * ul + pl + s.mx[b] * ur + pr) -
                              0.5 * smax * (s.mx[b] - s.mx[a]);
            const double f2 =
                0.5 * (s.my[a] * ul + s.my[b] * ur) - 0.5 * smax * (s.my[b] - s.my[a]);
            const double f3 = 0.5 * ((s.e[a] + pl) * ul + (s.e[b] + pr) * ur) -
                              0.5 * smax * (s.e[b] - s.e[a]);
            nrho[a] -= rx * f0;
            nrho[b] += rx * f0;
            nmx[a] -= rx * f1;
            nmx[b] += rx * f1;
            nmy[a] -= rx * f2;
            nmy[b] += rx * f2;
            ne[a] -= rx * f3;
            ne[b] += rx * f3;
        }
    }
    // y-direction fluxes across (j, j+1) interfaces
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            const size_t a = idx(j, i);
            const size_t b = idx((j + 1) % h, i);
            double ul, vl, pl, cl, ur, vr, pr, cr;
            euler_primitive(s.rho[a], s.mx[a], s.my[a], s.e[a], gas_gamma, ul, vl, pl, cl);
            euler_primitive(s.rho[b], s.mx[b], s.my[b], s.e[b], gas_gamma, ur, vr, pr, cr);
            const double smax = std::max(std::abs(vl) + cl, std::abs(vr) + cr);
            const double g0 = 0.5 * (s.my[a] + s.my[b]) - 0.5 * smax * (s.rho[b] - s.rho[a]);
            const double g1 =
                0.5 * (s.mx[a] * vl + s.mx[b] * vr) - 0.5 * smax * (s.mx[b] - s.mx[a]);
            const double g2 = 0.5 * (s.my[a] * vl + pl + s.my[b] * vr + pr) -
                              0.5 * smax * (s.my[b] - s.my[a]);
            const double g3 = 0.5 * ((s.e[a] + pl) * vl + (s.e[b] + pr) * vr) -
                              0.5 * smax * (s.e[b] - s.e[a]);
            nrho[a] -= ry * g0;
            nrho[b] += ry * g0;
            nmx[a] -= ry * g1;
            nmx[b] += ry * g1;
            nmy[a] -= ry * g2;
            nmy[b] += ry * g2;
            ne[a] -= ry * g3;
            ne[b] += ry * g3;
        }
    }
    for (size_t i = 0; i < m; ++i) {
        const double u = nmx[i] / nrho[i], v = nmy[i] / nrho[i];
        const double p = (gas_gamma - 1.0) * (ne[i] - 0.5 * nrho[i] * (u * u + v * v));
        if (nrho[i] <= 0.0 || p <= 0.0 || !std::isfinite(p))
            throw stability_error("negative density/pressure after update at cell " +
                                  std::to_string(i));
    }
    s.rho = std::move(nrho);
    s.mx = std::move(nmx);
    s.my = std::move(nmy);
    s.e = std::move(ne);
}

void ns_velocity(const Field& omega, const Spectral& sp, Field& u, Field& v) {
    Field rhs = omega;
    double mean = 0.0;
    for (double x : rhs) mean += x;
    mean /= static_cast<double>(rhs.size());
    // mean vorticity mode has no periodic streamfunction; drop it
    for (double& x : rhs) x = -(x - mean);
    Field psi = sp.poisson(rhs);
    u = sp.ddy(psi);
    v = sp.ddx(psi);
    for (double& x : v) x = -x;
}

namespace {

// tendency: -u.grad(omega) (centered FD, mean-projected) + nu lap(omega) + forcing
Field ns_tendency(const Field& omega, double viscosity, double forcing_amp, int forcing_k,
                  const Spectral& sp) {
    const int n = sp.n();
    Field u, v;
    ns_velocity(omega, sp, u, v);
    const double dx = sp.length() / n;
    Field tend = sp.laplacian(omega);
    for (double& x : tend) x *= viscosity;

    Field adv(omega.size());
    double adv_mean = 0.0;
    for (int j = 0; j < n; ++j) {
        const int jm = (j + n - 1) % n, jp = (j + 1) % n;
        for (int i = 0; i < n; ++i) {
            const int im = (i + n - 1) % n, ip = (i + 1) % n;
            const size_t id = static_cast<size_t>(j) * n + i;
            const double wx = (omega[static_cast<size_t>(j) * n + ip] -
                               omega[static_cast<size_t>(j) * n + im]) /
                              (2.0 * dx);
            const double wy = (omega[static_cast<size_t>(jp) * n + i] -
                               omega[static_cast<size_t>(jm) * n + i]) /
                              (2.0 * dx);
            adv[id] = u[id] * wx + v[id] * wy;
            adv_mean += adv[id];
        }
    }
    adv_mean /= static_cast<double>(adv.size());
    for (size_t i = 0; i < adv.size(); ++i) tend[i] -= adv[i] - adv_mean;

    if (forcing_amp != 0.0) {
        for (int j = 0; j < n; ++j) {
            const double y = (j + 0.5) * sp.length() / n;
            const double f = forcing_amp * std::cos(forcing_k * y * 2.0 * M_PI / sp.length());
            for (int i = 0; i < n; ++i) tend[static_cast<size_t>(j) * n + i] += f;
        }
    }
    return tend;
}

double ns_max_speed(const Field& omega, const Spectral& sp) {
    Field u, v;
    ns_velocity(omega, sp, u, v);
    double vmax = 0.0;
    for (size_t i = 0; i < u.size(); ++i)
        vmax = std::max(vmax, std::max(std::abs(u[i]), std::abs(v[i])));
    return vmax;
}

}  // namespace

void step_ns(Field& omega, double dt, double viscosity, double forcing_amp, int forcing_k,
             const Spectral& sp) {
    const int n = sp.n();
    if (static_cast<int>(omega.size()) != n * n)
        throw shape_error("vorticity size does not match spectral grid");
    const double dx = sp.length() / n;
    const double vmax = ns_max_speed(omega, sp);
    if (dt * vmax / dx > 1.0 + 1e-12)
        throw step_size_error("dt exceeds advective CFL bound " + std::to_string(dx / vmax));

    Field k1 = ns_tendency(omega, viscosity, forcing_amp, forcing_k, sp);
    Field mid = omega;
    for (size_t i = 0; i < mid.size(); ++i) mid[i] += dt * k1[i];
    Field k2 = ns_tendency(mid, viscosity, forcing_amp, forcing_k, sp);
    for (size_t i = 0; i < omega.size(); ++i) omega[i] += 0.5 * dt * (k1[i] + k2[i]);
}

void step_wave(WaveState& s, double dt, const Field& speed) {
    const size_t m = static_cast<size_t>(s.h) * s.w;
    if (speed.size() != m || s.w_cur.size() != m || s.w_prev.size() != m)
        throw shape_error("wave state/speed field size mismatch");
    double cmax = 0.0;
    for (double c : speed) cmax = std::max(cmax, c);
    if (dt > s.dx / (cmax * std::sqrt(2.0)) + 1e-15)
        throw step_size_error("dt exceeds wave CFL bound " +
                              std::to_string(s.dx / (cmax * std::sqrt(2.0))));
    Field next(m);
    const int h = s.h, w = s.w;
    const double r = dt * dt / (s.dx * s.dx);
    for (int j = 0; j < h; ++j) {
        const int jm = (j + h - 1) % h, jp = (j + 1) % h;
        for (int i = 0; i < w; ++i) {
            const int im = (i + w - 1) % w, ip = (i + 1) % w;
            const size_t id = static_cast<size_t>(j) * w + i;
            const double lap = s.w_cur[static_cast<size_t>(j) * w + ip] +
                               s.w_cur[static_cast<size_t>(j) * w + im] +
                               s.w_cur[static_cast<size_t>(jp) * w + i] +
                               s.w_cur[static_cast<size_t>(jm) * w + i] - 4.0 * s.w_cur[id];
            next[id] = 2.0 * s.w_cur[id] - s.w_prev[id] + r * speed[id] * speed[id] * lap;
        }
    }
    s.w_prev = std::move(s.w_cur);
    s.w_cur = std::move(next);
}

double default_horizon(Family family) {
    switch (family) {
        case Family::euler: return 0.4;
        case Family::navier_stokes: return 5.0;
        case Family::wave: return 1.0;
    }
    throw config_error("unknown family tag");
}

Trajectory generate_trajectory(Family family, const IcSpec& spec, int h, int w, int n_snapshots,
                               const SolverParams& params) {
    if (n_snapshots < 1) throw contract_error("n_snapshots must be >= 1");
    const double horizon = params.horizon > 0.0 ? params.horizon : default_horizon(family);
    if (!(horizon > 0.0)) throw contract_error("physical horizon must be positive");
    const double snap_dt = horizon / n_snapshots;

    Trajectory traj;
    traj.family = family;
    traj.h = h;
    traj.w = w;
    traj.field_names = family_field_names(family);
    traj.dt = snap_dt;
    traj.seed = spec.seed;
    traj.data.reserve(n_snapshots + 1);

    FieldStack ic = gen_initial_condition(family, spec, h, w);
    const std::string seed_tag = " (trajectory seed " + std::to_string(spec.seed) + ")";

    try {
        if (family == Family::euler) {
            EulerState st = euler_from_primitives(ic, params.gas_gamma);
            auto record = [&]() {
                std::vector<Field> snap(5, Field(st.rho.size()));
                for (size_t i = 0; i < st.rho.size(); ++i) {
                    const double rho = st.rho[i];
                    const double u = st.mx[i] / rho, v = st.my[i] / rho;
                    snap[0][i] = rho;
                    snap[1][i] = u;
                    snap[2][i] = v;
                    snap[3][i] = (params.gas_gamma - 1.0) *
                                 (st.e[i] - 0.5 * rho * (u * u + v * v));
                    snap[4][i] = st.e[i];
                }
                traj.data.push_back(std::move(snap));
            };
            record();
            for (int s = 0; s < n_snapshots; ++s) {
                const double dtmax = euler_max_dt(st, params.gas_gamma, params.cfl);
                const int sub = std::max(1, static_cast<int>(std::ceil(snap_dt / dtmax)));
                const double dt = snap_dt / sub;
                for (int k = 0; k < sub; ++k) step_euler(st, dt, params.gas_gamma);
                record();
            }
        } else if (family == Family::navier_stokes) {
            if (h != w || !is_power_of_two(h))
                throw config_error("navier-stokes requires a square power-of-two grid");
            Spectral sp(h, 2.0 * M_PI);
            Field omega = ic.fields[0];
            const double dx = sp.length() / h;
            auto record = [&]() {
                std::vector<Field> snap(2);
                ns_velocity(omega, sp, snap[0], snap[1]);
                traj.data.push_back(std::move(snap));
            };
            record();
            for (int s = 0; s < n_snapshots; ++s) {
                const double vmax = std::max(ns_max_speed(omega, sp), 1e-6);
                const double dtmax = params.cfl * dx / vmax;
                const int sub = std::max(1, static_cast<int>(std::ceil(snap_dt / dtmax)));
                const double dt = snap_dt / sub;
                for (int k = 0; k < sub; ++k)
                    step_ns(omega, dt, params.viscosity, params.forcing_amp, params.forcing_k,
                            sp);
                record();
            }
        } else {
            WaveState st;
            st.h = h;
            st.w = w;
            st.dx = 1.0 / w;
            st.w_cur = ic.fields[0];
            st.w_prev = ic.fields[0];  // zero initial velocity
            const Field& speed = ic.fields[1];
            double cmax = 0.0;
            for (double c : speed) cmax = std::max(cmax, c);
            const double dtmax = params.cfl * st.dx / (cmax * std::sqrt(2.0));
            const int sub = std::max(1, static_cast<int>(std::ceil(snap_dt / dtmax)));
            const double dt = snap_dt / sub;
            traj.data.push_back({st.w_cur});
            for (int s = 0; s < n_snapshots; ++s) {
                for (int k = 0; k < sub; ++k) step_wave(st, dt, speed);
                traj.data.push_back({st.w_cur});
            }
        }
    } catch (const stability_error& e) {
        throw stability_error(std::string(e.what()) + seed_tag);
    }

    for (const auto& snap : traj.data)
        for (const auto& f : snap)
            for (double v : f)
                if (!std::isfinite(v))
                    throw stability_error("non-finite value in trajectory" + seed_tag);
    return traj;
}

}  // namespace spus
