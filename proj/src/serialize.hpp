#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "closed_form.hpp"
#include "linear_transformer.hpp"
#include "task_sampler.hpp"
#include "trainer.hpp"

namespace icl {

// 17 significant digits: enough to round-trip a double exactly.
std::string format_double(double v);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);  // row-major nesting
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const CovarianceSpec& spec);
CovarianceSpec spec_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(const TransformerParams& params);
TransformerParams params_from_json(const nlohmann::json& j);

nlohmann::json optimum_to_json(const OptimalSingleLayer& opt);

std::string matrix_to_csv(const Eigen::MatrixXd& M);

// One header row, then one row per record entry.
std::string rows_to_csv(const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& rows);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace icl
