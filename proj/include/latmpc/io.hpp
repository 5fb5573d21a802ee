#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "latmpc/lattice.hpp"
#include "latmpc/mpc_model.hpp"
#include "latmpc/sampler.hpp"
#include "latmpc/verification.hpp"

namespace latmpc {

/// Problem document: model, horizon, bounds and the sampling domain.
struct ProblemSpec {
  std::string name;
  MpcProblem problem;
  Box domain;
  std::optional<double> Ts;
};

ProblemSpec problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const ProblemSpec& spec);

nlohmann::json dataset_to_json(const SampleDataset& ds);
SampleDataset dataset_from_json(const nlohmann::json& j);

nlohmann::json lattice_to_json(const LatticeForm& form);
LatticeForm lattice_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LpScanReport& r);
nlohmann::json to_json(const ValidationReport& r);
nlohmann::json to_json(const SandwichReport& r);
nlohmann::json to_json(const StorageStats& s);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& M);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);

}  // namespace latmpc
