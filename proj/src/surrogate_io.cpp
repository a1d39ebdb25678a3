#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dnnaif/surrogate.hpp"

namespace dnnaif {

using json = nlohmann::json;

namespace {

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
  return rows;
}

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Matrix matrix_from_json(const json& j, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Vector row = vector_from_json(j.at(static_cast<std::size_t>(r)));
    if (row.size() != cols) throw Error(ErrorKind::ParseError, "ragged matrix in checkpoint");
    m.row(r) = row.transpose();
  }
  return m;
}

}  // namespace

std::string checkpoint_to_string(const NetworkParams& theta) {
  const Architecture& a = theta.arch;
  json doc;
  doc["architecture"] = {
      {"input_dim", a.input_dim},       {"hidden_dim", a.hidden_dim},
      {"depth", a.depth},               {"output_dim", a.output_dim},
      {"activation", "relu"},           {"g_mode", std::string(to_string(a.g_mode))},
      {"alpha", a.alpha},               {"head", std::string(to_string(a.head))},
  };
  json layers = json::array();
  for (std::size_t j = 0; j < theta.K.size(); ++j) {
    layers.push_back({{"K", to_json(theta.K[j])}, {"b", to_json(theta.b[j])}});
  }
  doc["layers"] = std::move(layers);
  doc["input_shift"] = to_json(theta.input_shift);
  doc["input_scale"] = to_json(theta.input_scale);
  doc["target_shift"] = theta.target_shift;
  doc["target_scale"] = theta.target_scale;
  return doc.dump(1);
}

NetworkParams checkpoint_from_string(std::string_view text) {
  try {
    const json doc = json::parse(text);
    const json& ja = doc.at("architecture");
    NetworkParams theta;
    Architecture& a = theta.arch;
    a.input_dim = ja.at("input_dim").get<int>();
    a.hidden_dim = ja.at("hidden_dim").get<int>();
    a.depth = ja.at("depth").get<int>();
    a.output_dim = ja.at("output_dim").get<int>();
    if (ja.at("activation").get<std::string>() != "relu") {
      throw Error(ErrorKind::ParseError, "unsupported activation");
    }
    a.g_mode = g_mode_from_string(ja.at("g_mode").get<std::string>());
    a.alpha = ja.at("alpha").get<double>();
    a.head = head_from_string(ja.at("head").get<std::string>());
    a.validate();
    const json& layers = doc.at("layers");
    if (layers.size() != static_cast<std::size_t>(a.depth)) {
      throw Error(ErrorKind::ParseError, "layer count does not match depth");
    }
    for (std::size_t j = 0; j < layers.size(); ++j) {
      const Eigen::Index cols = j == 0 ? a.input_dim : a.hidden_dim;
      theta.K.push_back(matrix_from_json(layers[j].at("K"), cols));
      theta.b.push_back(vector_from_json(layers[j].at("b")));
    }
    theta.input_shift = vector_from_json(doc.at("input_shift"));
    theta.input_scale = vector_from_json(doc.at("input_scale"));
    theta.target_shift = doc.at("target_shift").get<double>();
    theta.target_scale = doc.at("target_scale").get<double>();
    return theta;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const NetworkParams& theta) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  out << checkpoint_to_string(theta) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "write to " + path + " failed");
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_string(buffer.str());
}

}  // namespace dnnaif
