#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "latentmimic/nn/dense_net.hpp"

namespace lm::nn {

inline constexpr int kNetFormatVersion = 1;

inline nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) return Mat(0, 0);
  const auto rows = j.size();
  const auto cols = j.at(0).size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) {
      throw std::runtime_error("mat_from_json: ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          j.at(i).at(c).get<double>();
    }
  }
  return m;
}

inline nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json j;
  j["version"] = kNetFormatVersion;
  j["name"] = net.name();
  j["layer_sizes"] = net.layer_sizes();
  j["activation"] = net.activation() == Activation::kElu ? "elu" : "identity";
  j["head"] = net.head() == OutputHead::kGaussian ? "gaussian" : "deterministic";
  nlohmann::json ws = nlohmann::json::array();
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& w : net.weights()) ws.push_back(mat_to_json(w.value));
  for (const auto& b : net.biases()) bs.push_back(mat_to_json(b.value));
  j["weights"] = std::move(ws);
  j["biases"] = std::move(bs);
  return j;
}

inline DenseNet net_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kNetFormatVersion) {
    throw std::runtime_error("net_from_json: unsupported version");
  }
  auto sizes = j.at("layer_sizes").get<std::vector<int>>();
  Activation act = j.at("activation").get<std::string>() == "elu"
                       ? Activation::kElu
                       : Activation::kIdentity;
  OutputHead head = j.at("head").get<std::string>() == "gaussian"
                        ? OutputHead::kGaussian
                        : OutputHead::kDeterministic;
  DenseNet net(sizes, act, head, j.at("name").get<std::string>());
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  if (ws.size() != net.weights().size() || bs.size() != net.biases().size()) {
    throw std::runtime_error("net_from_json: layer count mismatch");
  }
  for (std::size_t l = 0; l < ws.size(); ++l) {
    Mat w = mat_from_json(ws.at(l));
    Mat b = mat_from_json(bs.at(l));
    if (w.rows() != net.weights()[l].value.rows() ||
        w.cols() != net.weights()[l].value.cols() ||
        b.rows() != net.biases()[l].value.rows() || b.cols() != 1) {
      throw std::runtime_error("net_from_json: weight shape mismatch at layer " +
                               std::to_string(l));
    }
    net.weights()[l].value = std::move(w);
    net.biases()[l].value = std::move(b);
  }
  return net;
}

}  // namespace lm::nn
