#pragma once

#include <string>

#include <Eigen/Dense>
#include "json.hpp"

#include "orderspn/leaf.hpp"
#include "orderspn/model.hpp"

namespace orderspn {

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

// Headerless CSV, one row per sample, '.' decimal separator.
Dataset read_csv_dataset(const std::string& path);
void write_csv_dataset(const std::string& path, const Dataset& data);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

// {"d": int, "parents": [[int, ...], ...]}
nlohmann::json dag_to_json(const Dag& dag);
Dag dag_from_json(const nlohmann::json& j);

// [{"child": int, "parent": int, "present": bool}, ...]
EdgeConjunction conjunction_from_json(const nlohmann::json& j, int d);
nlohmann::json conjunction_to_json(const EdgeConjunction& c);

}  // namespace orderspn
