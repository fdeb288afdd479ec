#pragma once

#include <stdexcept>
#include <string>

namespace spus {

// Shape/dimension disagreement between tensors or against an op contract.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

// Invalid configuration (grid size, channel schedule, unknown family, ...).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Violated call contract (non-scalar loss, epoch out of range, zero-mean rhs, ...).
struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

// Autodiff graph misuse (unrecorded node, backward before loss designation).
struct graph_error : std::runtime_error {
    explicit graph_error(const std::string& msg) : std::runtime_error("graph error: " + msg) {}
};

// Non-finite values where finiteness is required (NaN gradient/loss, diverged rollout).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// Explicit time step exceeds the stability bound.
struct step_size_error : std::runtime_error {
    explicit step_size_error(const std::string& msg) : std::runtime_error("step size error: " + msg) {}
};

// Solver produced an unphysical state (negative density/pressure, blow-up).
struct stability_error : std::runtime_error {
    explicit stability_error(const std::string& msg) : std::runtime_error("stability error: " + msg) {}
};

// Malformed on-disk file (bad magic, header inconsistency).
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

// File shorter than its manifest declares.
struct corruption_error : std::runtime_error {
    explicit corruption_error(const std::string& msg) : std::runtime_error("corruption error: " + msg) {}
};

// Unsupported on-disk format version.
struct version_error : std::runtime_error {
    explicit version_error(const std::string& msg) : std::runtime_error("version error: " + msg) {}
};

// Dataset-level inconsistency (mixed field counts, snapshot shortfall).
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

}  // namespace spus
