#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spus/spectral.hpp"
#include "spus/trajectory.hpp"

namespace spus {

enum class IcKind {
    riemann_quadrants,
    riemann_quadrants_perturbed,
    kelvin_helmholtz_shear,
    gaussian_vorticity,
    piecewise_constant_vorticity,
    double_shear_layer,
    gaussian_sum_wave,
};

std::string ic_kind_name(IcKind kind);
IcKind ic_kind_from_name(const std::string& name);

struct IcSpec {
    IcKind kind = IcKind::riemann_quadrants;
    uint64_t seed = 0;
    double amplitude = 1.0;
    // Optional explicit quadrant states [rho,u,v,p] x 4 (overrides sampling).
    std::vector<double> quadrant_states;
};

// Per-family IC field stacks (layouts differ from the stored trajectory
// fields): euler -> [rho, u, v, p]; navier_stokes -> [omega];
// wave -> [w0, c] with c the per-trajectory speed field.
struct FieldStack {
    int h = 0, w = 0;
    std::vector<Field> fields;
};

FieldStack gen_initial_condition(Family family, const IcSpec& spec, int h, int w);

// Conserved compressible Euler state on a periodic [0,1)^2 grid.
struct EulerState {
    int h = 0, w = 0;
    double dx = 0.0, dy = 0.0;
    Field rho, mx, my, e;
};

EulerState euler_from_primitives(const FieldStack& prim, double gas_gamma);
// Largest stable dt times the given CFL number.
double euler_max_dt(const EulerState& state, double gas_gamma, double cfl);
// One first-order Rusanov finite-volume update. Throws step_size_error if dt
// exceeds the stability bound, stability_error on negative density/pressure.
void step_euler(EulerState& state, double dt, double gas_gamma);

// One Heun (RK2) step of 2D vorticity transport on [0, 2pi)^2: centered-
// difference advection with spectrally derived velocity, exact spectral
// diffusion, optional fixed sinusoidal forcing added to the vorticity.
void step_ns(Field& omega, double dt, double viscosity, double forcing_amp, int forcing_k,
             const Spectral& sp);
// Velocity (u, v) = (d psi/dy, -d psi/dx) with lap(psi) = -omega.
void ns_velocity(const Field& omega, const Spectral& sp, Field& u, Field& v);

// Leapfrog for w_tt = c(x)^2 lap(w) on a periodic [0,1)^2 grid.
struct WaveState {
    int h = 0, w = 0;
    double dx = 0.0;
    Field w_cur, w_prev;
};

void step_wave(WaveState& state, double dt, const Field& speed);

struct SolverParams {
    double gas_gamma = 1.4;
    double cfl = 0.4;
    double viscosity = 1e-3;
    double forcing_amp = 0.0;  // > 0 selects the forced (Kolmogorov) NS variant
    int forcing_k = 4;
    double horizon = 0.0;  // 0 = family default
};

double default_horizon(Family family);

// Runs the family solver over a fixed physical horizon, CFL-limited
// internally, and records n_snapshots+1 equispaced states (IC included).
Trajectory generate_trajectory(Family family, const IcSpec& spec, int h, int w, int n_snapshots,
                               const SolverParams& params);

}  // namespace spus
