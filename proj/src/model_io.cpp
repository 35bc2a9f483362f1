#include "penlin/model_io.hpp"

#include <fstream>
#include <sstream>

#include "penlin/error.hpp"

namespace penlin {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points one past the offending character.
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << column << ": " << e.what();
    throw Error(ErrorCode::ParseError, os.str());
  }
}

namespace {

double number_at(const json& v, const std::string& where) {
  if (!v.is_number()) throw Error(ErrorCode::ParseError, where + " is not a number");
  return v.get<double>();
}

const json& require(const json& doc, const char* key, const std::string& source) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, source + ": document is not an object");
  auto it = doc.find(key);
  if (it == doc.end()) {
    throw Error(ErrorCode::ParseError, source + ": missing field '" + key + "'");
  }
  return *it;
}

double require_number(const json& doc, const char* key, const std::string& source) {
  return number_at(require(doc, key, source), source + ": field '" + key + "'");
}

}  // namespace

Matrix matrix_from_json(const json& value, const std::string& field) {
  if (!value.is_array() || value.empty()) {
    throw Error(ErrorCode::ParseError, field + " must be a non-empty array of rows");
  }
  const std::size_t rows = value.size();
  std::size_t cols = 0;
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = value[i];
    if (!row.is_array()) {
      throw Error(ErrorCode::ParseError, field + " row " + std::to_string(i) + " is not an array");
    }
    if (i == 0) {
      cols = row.size();
      if (cols == 0) throw Error(ErrorCode::ParseError, field + " row 0 is empty");
      out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (row.size() != cols) {
      throw Error(ErrorCode::ParseError, field + " row " + std::to_string(i) + " has " +
                                             std::to_string(row.size()) + " entries, expected " +
                                             std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number_at(
          row[j], field + " row " + std::to_string(i) + " entry " + std::to_string(j));
    }
  }
  return out;
}

Vector vector_from_json(const json& value, const std::string& field) {
  if (!value.is_array() || value.empty()) {
    throw Error(ErrorCode::ParseError, field + " must be a non-empty array");
  }
  Vector out(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = number_at(value[i], field + " entry " + std::to_string(i));
  }
  return out;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

namespace {

void check_square(const Matrix& m, Eigen::Index n, const std::string& field) {
  if (m.rows() != n || m.cols() != n) {
    throw Error(ErrorCode::ParseError, field + " must be " + std::to_string(n) + "x" +
                                           std::to_string(n) + " (n_states)");
  }
}

}  // namespace

ModelFile parse_model(const std::string& text, const std::string& source) {
  const json doc = parse_json(text, source);
  ModelFile out;
  if (doc.is_object() && doc.contains("name")) {
    if (!doc["name"].is_string()) throw Error(ErrorCode::ParseError, source + ": name must be a string");
    out.name = doc["name"].get<std::string>();
  }
  const json& n_json = require(doc, "n_states", source);
  if (!n_json.is_number_integer() || n_json.get<long>() < 1) {
    throw Error(ErrorCode::ParseError, source + ": n_states must be a positive integer");
  }
  const auto n = static_cast<Eigen::Index>(n_json.get<long>());

  FiniteMrp base;
  base.gamma = require_number(doc, "gamma", source);
  base.reward_noise_std = doc.contains("reward_noise_std")
                              ? number_at(doc["reward_noise_std"], source + ": reward_noise_std")
                              : 0.0;
  base.transition = matrix_from_json(require(doc, "transition", source), source + ": transition");
  check_square(base.transition, n, source + ": transition");
  base.mean_reward =
      matrix_from_json(require(doc, "mean_reward", source), source + ": mean_reward");
  check_square(base.mean_reward, n, source + ": mean_reward");
  out.features.phi = matrix_from_json(require(doc, "features", source), source + ": features");
  if (out.features.phi.rows() != n) {
    throw Error(ErrorCode::ParseError, source + ": features must have n_states rows");
  }

  try {
    if (doc.contains("behavior") && !doc["behavior"].is_null()) {
      OffPolicyMrp off;
      off.base = std::move(base);
      off.behavior = matrix_from_json(doc["behavior"], source + ": behavior");
      check_square(off.behavior, n, source + ": behavior");
      off.validate();
      out.model = std::move(off);
    } else {
      base.validate();
      out.model = std::move(base);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, source + ": " + e.what());
  }
  return out;
}

ModelFile load_model(const std::string& path) { return parse_model(read_text_file(path), path); }

json to_json(const ModelFile& file) {
  const FiniteMrp& base = target_of(file.model);
  json doc;
  doc["name"] = file.name;
  doc["n_states"] = base.n_states();
  doc["gamma"] = base.gamma;
  doc["reward_noise_std"] = base.reward_noise_std;
  doc["transition"] = to_json(base.transition);
  doc["mean_reward"] = to_json(base.mean_reward);
  if (const auto* off = std::get_if<OffPolicyMrp>(&file.model)) doc["behavior"] = to_json(off->behavior);
  doc["features"] = to_json(file.features.phi);
  return doc;
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  if (name == "unsquared") return Estimator::Unsquared;
  if (name == "squared") return Estimator::Squared;
  if (name == "select-rho") return Estimator::SelectRho;
  return std::nullopt;
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Unsquared: return "unsquared";
    case Estimator::Squared: return "squared";
    case Estimator::SelectRho: return "select-rho";
  }
  return "unknown";
}

SolveRequest parse_solve_request(const std::string& text, const std::string& source) {
  const json doc = parse_json(text, source);
  SolveRequest req;
  req.a_obs = matrix_from_json(require(doc, "A_obs", source), source + ": A_obs");
  req.b_obs = vector_from_json(require(doc, "b_obs", source), source + ": b_obs");
  if (req.b_obs.size() != req.a_obs.rows()) {
    throw Error(ErrorCode::ParseError, source + ": b_obs length must equal the rows of A_obs");
  }
  if (doc.contains("M") && !doc["M"].is_null()) {
    req.m = matrix_from_json(doc["M"], source + ": M");
    if (req.m->rows() != req.a_obs.rows() || req.m->cols() != req.a_obs.rows()) {
      throw Error(ErrorCode::ParseError, source + ": M must be square with the rows of A_obs");
    }
  }
  if (doc.contains("penalty")) {
    const json& p = doc["penalty"];
    auto parsed = p.is_string() ? parse_penalty(p.get<std::string>()) : std::nullopt;
    if (!parsed) throw Error(ErrorCode::ParseError, source + ": penalty must be \"l1\" or \"l2\"");
    req.penalty = *parsed;
  }
  if (doc.contains("estimator")) {
    const json& e = doc["estimator"];
    auto parsed = e.is_string() ? parse_estimator(e.get<std::string>()) : std::nullopt;
    if (!parsed) {
      throw Error(ErrorCode::ParseError,
                  source + ": estimator must be unsquared, squared or select-rho");
    }
    req.estimator = *parsed;
  }
  switch (req.estimator) {
    case Estimator::Unsquared:
      req.lambda = require_number(doc, "lambda", source);
      break;
    case Estimator::Squared:
      req.rho = require_number(doc, "rho", source);
      break;
    case Estimator::SelectRho:
      req.lambda = require_number(doc, "lambda", source);
      req.c = require_number(doc, "c", source);
      break;
  }
  return req;
}

}  // namespace penlin
