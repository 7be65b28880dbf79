#pragma once

// System definition files (JSON):
//
//   { "name": "...", "n": 2, "params": { "k": 10, ... },
//     "builtin": "double_pendulum" | "coupled_masses" | "quintuple_pendulum",
//     "potential": "s1" | "s2" | "a" }
//
// or, for expression-defined systems,
//
//   { "name": "...", "n": 2, "params": {...},
//     "V_expr": "0.5*k*q1^2 + ...", "M_expr": [["m", "0"], ["0", "m"]] }
//
// Optional keys: "equilibrium_guess": [..n numbers..] and
// "phi": [..n expressions in q1..qn..] for a spatial symmetry other than the
// point reflection about the equilibrium.

#include "modalkit/system.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace modalkit {

struct SystemFile {
    MechSystem system;
    Vec equilibrium_guess;
    std::optional<std::vector<std::string>> phi_expr;
    std::map<std::string, double> params;
};

/// Throws ParseError (with byte offset for malformed JSON).
SystemFile parse_system_file(const std::string& json_text);
SystemFile load_system_file(const std::filesystem::path& path);

} // namespace modalkit
