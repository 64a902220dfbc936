#include "serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace icl {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError("matrix: expected a nested array");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw ValidationError("matrix: ragged rows");
    for (int c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
  }
  return M;
}

json spec_to_json(const CovarianceSpec& spec) {
  json j;
  j["d"] = spec.dim;
  j["d_entries"] = std::vector<double>(spec.d_entries.begin(), spec.d_entries.end());
  j["u"] = matrix_to_json(spec.U);
  return j;
}

CovarianceSpec spec_from_json(const json& j) {
  if (!j.contains("d") || !j.contains("d_entries"))
    throw ValidationError("spec: missing d or d_entries");
  const int d = j["d"].get<int>();
  const auto entries_vec = j["d_entries"].get<std::vector<double>>();
  if (static_cast<int>(entries_vec.size()) != d)
    throw ValidationError("spec: d_entries length mismatch");
  Eigen::VectorXd entries =
      Eigen::Map<const Eigen::VectorXd>(entries_vec.data(), d);
  if (j.contains("u_seed"))
    return make_covariance_haar(d, entries, j["u_seed"].get<std::uint64_t>());
  if (j.contains("u")) {
    if (j["u"].is_string()) {
      if (j["u"].get<std::string>() != "identity")
        throw ValidationError("spec: unknown basis keyword");
      return make_covariance_identity(d, entries);
    }
    return make_covariance(d, entries, matrix_from_json(j["u"]));
  }
  return make_covariance_identity(d, entries);
}

json params_to_json(const TransformerParams& params) {
  json j;
  json layers = json::array();
  switch (params.variant) {
    case Variant::Sparse:
      j["variant"] = "sparse";
      for (const auto& l : params.sparse) layers.push_back({{"A", matrix_to_json(l.A)}});
      break;
    case Variant::GDPP:
      j["variant"] = "gdpp";
      for (const auto& l : params.gdpp)
        layers.push_back({{"A", matrix_to_json(l.A)}, {"B", matrix_to_json(l.B)}});
      break;
    case Variant::Full:
      j["variant"] = "full";
      for (const auto& l : params.full)
        layers.push_back({{"P", matrix_to_json(l.P)}, {"Q", matrix_to_json(l.Q)}});
      break;
  }
  j["layers"] = std::move(layers);
  return j;
}

TransformerParams params_from_json(const json& j) {
  if (!j.contains("variant") || !j.contains("layers"))
    throw ValidationError("params: missing variant or layers");
  const std::string variant = j["variant"].get<std::string>();
  const json& layers = j["layers"];
  if (!layers.is_array() || layers.empty())
    throw ValidationError("params: empty layer list");
  if (variant == "sparse") {
    std::vector<Eigen::MatrixXd> A;
    for (const auto& l : layers) A.push_back(matrix_from_json(l.at("A")));
    return make_sparse(std::move(A));
  }
  if (variant == "gdpp") {
    std::vector<Eigen::MatrixXd> A, B;
    for (const auto& l : layers) {
      A.push_back(matrix_from_json(l.at("A")));
      B.push_back(matrix_from_json(l.at("B")));
    }
    return make_gdpp(std::move(A), std::move(B));
  }
  if (variant == "full") {
    std::vector<FullLayer> full;
    for (const auto& l : layers)
      full.push_back({matrix_from_json(l.at("P")), matrix_from_json(l.at("Q"))});
    return make_full(std::move(full));
  }
  throw ValidationError("params: unknown variant " + variant);
}

json optimum_to_json(const OptimalSingleLayer& opt) {
  json j;
  j["b"] = std::vector<double>(opt.b.begin(), opt.b.end());
  j["A"] = matrix_to_json(opt.A);
  j["s"] = std::vector<double>(opt.s.begin(), opt.s.end());
  return j;
}

std::string matrix_to_csv(const Eigen::MatrixXd& M) {
  std::ostringstream out;
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
  return out.str();
}

std::string rows_to_csv(const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << content;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace icl
