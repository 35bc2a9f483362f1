#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "penlin/mrp.hpp"
#include "penlin/weighted_geometry.hpp"

namespace penlin {

/// A model document: the chain (with an optional behavior matrix making it
/// off-policy) and its features.
struct ModelFile {
  std::string name;
  MrpModel model;
  FeatureMap features;
};

/// Reads a whole file; throws ParseError if it cannot be opened.
std::string read_text_file(const std::string& path);

/// Parses JSON text, reporting syntax errors as "<source>:line:column: ...".
nlohmann::json parse_json(const std::string& text, const std::string& source);

/// Dense matrix from an array of equal-length rows. Errors name the field and
/// the offending row.
Matrix matrix_from_json(const nlohmann::json& value, const std::string& field);
Vector vector_from_json(const nlohmann::json& value, const std::string& field);
nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const Vector& v);

/// Fields: name, n_states, gamma, reward_noise_std, transition, mean_reward,
/// features, and optionally behavior.
ModelFile parse_model(const std::string& text, const std::string& source = "<model>");
ModelFile load_model(const std::string& path);
nlohmann::json to_json(const ModelFile& model);

enum class Estimator { Unsquared, Squared, SelectRho };

std::optional<Estimator> parse_estimator(std::string_view name);
std::string_view to_string(Estimator e);

/// Ad-hoc estimation request: A_obs, b_obs, optional weight M (identity when
/// absent), penalty, estimator and its regularization levels.
struct SolveRequest {
  Matrix a_obs;
  Vector b_obs;
  std::optional<Matrix> m;
  PenaltyNorm penalty = PenaltyNorm::L1;
  Estimator estimator = Estimator::Unsquared;
  double lambda = 0.0;
  double rho = 0.0;
  double c = 0.0;
};

SolveRequest parse_solve_request(const std::string& text, const std::string& source = "<request>");

}  // namespace penlin
