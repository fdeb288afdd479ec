#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spus/errors.hpp"

namespace spus {

enum class Family : uint8_t { euler = 0, navier_stokes = 1, wave = 2 };

int field_count(Family family);
std::vector<std::string> family_field_names(Family family);
std::string family_name(Family family);
Family family_from_name(const std::string& name);

// One PDE solution: n+1 snapshots of d fields on an H x W grid.
struct Trajectory {
    Family family = Family::euler;
    int h = 0, w = 0;
    std::vector<std::string> field_names;
    double dt = 0.0;  // physical time between stored snapshots
    uint64_t seed = 0;
    // data[t][field][y*w + x]
    std::vector<std::vector<std::vector<double>>> data;

    int snapshots() const { return static_cast<int>(data.size()); }
    int fields() const { return static_cast<int>(field_names.size()); }
};

// "PDET" binary format, little-endian, f32 payload.
void write_trajectory(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory(const std::string& path);

}  // namespace spus
