#pragma once

#include "cmdp_accel/mdp_core.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace cmdp_accel {

// Instance file layout:
//   { "num_states": int, "num_actions": int, "discount": float,
//     "initial_dist": [float], "transition": [[[float]]] indexed [s][a][s'],
//     "rewards": [[[float]]] indexed [i][s][a] for i = 0..m, "thresholds": [float] }
// Parsing reports the first missing field, wrong shape or violated invariant
// as InvalidInput.
TabularCmdp cmdp_from_json(const nlohmann::json& doc, const Tolerances& tol = {});
nlohmann::json cmdp_to_json(const TabularCmdp& cmdp);

TabularCmdp load_cmdp(const std::string& path, const Tolerances& tol = {});
void save_cmdp(const TabularCmdp& cmdp, const std::string& path);

nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json vector_to_json(const Vector& v);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& what);
Vector vector_from_json(const nlohmann::json& j, const std::string& what);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& doc, const std::string& path);

}  // namespace cmdp_accel
