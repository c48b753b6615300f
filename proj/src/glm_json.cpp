#include <json.hpp>

#include "recontact/error.hpp"
#include "recontact/glm.hpp"

namespace recontact::glm {

namespace {

using nlohmann::ordered_json;

ordered_json vec(const VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ordered_json mat(const MatrixXd& m) {
  ordered_json out = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) out.push_back(vec(m.row(i).transpose()));
  return out;
}

VectorXd read_vec(const ordered_json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = j[i].get<double>();
  return v;
}

MatrixXd read_mat(const ordered_json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows ? static_cast<Index>(j[0].size()) : 0;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) != cols) throw Error("ragged covariance matrix");
    for (Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

ordered_json parse(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed fit JSON: ") + e.what());
  }
}

}  // namespace

std::string to_json(const GlmFit& fit) {
  ordered_json j;
  j["family"] = fit.family == Family::Logistic ? "logistic" : "negative_binomial";
  j["names"] = fit.names;
  j["coefficients"] = vec(fit.coefficients);
  j["covariance"] = mat(fit.covariance);
  j["theta"] = fit.dispersion;
  j["log_likelihood"] = fit.log_likelihood;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["poisson_limit"] = fit.poisson_limit;
  j["score_norm"] = fit.score_norm;
  return j.dump(2);
}

GlmFit glm_from_json(const std::string& text) {
  try {
    const auto j = parse(text);
    GlmFit fit;
    fit.family = j.at("family") == "logistic" ? Family::Logistic : Family::NegativeBinomial;
    fit.names = j.at("names").get<std::vector<std::string>>();
    fit.coefficients = read_vec(j.at("coefficients"));
    fit.covariance = read_mat(j.at("covariance"));
    fit.dispersion = j.at("theta").get<double>();
    fit.log_likelihood = j.at("log_likelihood").get<double>();
    fit.converged = j.at("converged").get<bool>();
    fit.iterations = j.at("iterations").get<int>();
    fit.poisson_limit = j.at("poisson_limit").get<bool>();
    fit.score_norm = j.at("score_norm").get<double>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad fit JSON: ") + e.what());
  }
}

std::string to_json(const ZinbFit& fit) {
  ordered_json j;
  j["family"] = "zero_inflated_negative_binomial";
  j["count_names"] = fit.count_names;
  j["count_coefficients"] = vec(fit.count_coefficients);
  j["zero_names"] = fit.zero_names;
  j["zero_coefficients"] = vec(fit.zero_coefficients);
  j["theta"] = fit.theta;
  j["covariance"] = mat(fit.covariance);
  j["log_likelihood"] = fit.log_likelihood;
  j["converged"] = fit.converged;
  j["em_iterations"] = fit.em_iterations;
  j["newton_iterations"] = fit.newton_iterations;
  j["score_norm"] = fit.score_norm;
  return j.dump(2);
}

ZinbFit zinb_from_json(const std::string& text) {
  try {
    const auto j = parse(text);
    ZinbFit fit;
    fit.count_names = j.at("count_names").get<std::vector<std::string>>();
    fit.count_coefficients = read_vec(j.at("count_coefficients"));
    fit.zero_names = j.at("zero_names").get<std::vector<std::string>>();
    fit.zero_coefficients = read_vec(j.at("zero_coefficients"));
    fit.theta = j.at("theta").get<double>();
    fit.covariance = read_mat(j.at("covariance"));
    fit.log_likelihood = j.at("log_likelihood").get<double>();
    fit.converged = j.at("converged").get<bool>();
    fit.em_iterations = j.at("em_iterations").get<int>();
    fit.newton_iterations = j.at("newton_iterations").get<int>();
    fit.score_norm = j.at("score_norm").get<double>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad fit JSON: ") + e.what());
  }
}

}  // namespace recontact::glm
