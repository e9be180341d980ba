#pragma once

#include <json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentmimic/motion/frame.hpp"

namespace lm::motion {

struct MotionDataset {
  std::string style;
  double frame_rate = 50.0;
  int joint_count = kNumJoints;
  std::vector<MotionFrame> frames;
};

namespace detail {
inline std::vector<double> to_vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
}  // namespace detail

// JSON-lines: one header record {n, frame_rate, style}, then one frame per
// line. Round-trips at full double precision.
inline void save_dataset(const MotionDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  nlohmann::json header = {
      {"n", ds.joint_count}, {"frame_rate", ds.frame_rate}, {"style", ds.style}};
  out << header.dump() << "\n";
  for (const auto& f : ds.frames) {
    nlohmann::json j = {{"p", detail::to_vec(f.p)},
                        {"theta", detail::to_vec(f.theta)},
                        {"v", detail::to_vec(f.v)},
                        {"q", detail::to_vec(f.q)},
                        {"q_dot", detail::to_vec(f.q_dot)}};
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

inline MotionDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("load_dataset: " + path + ":" +
                             std::to_string(line_no) + ": " + what);
  };

  MotionDataset ds;
  bool have_header = false;
  int frame_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("parse error: ") + e.what());
    }
    if (!have_header) {
      if (!j.contains("n") || !j.contains("frame_rate")) {
        fail("missing header record {n, frame_rate, style}");
      }
      ds.joint_count = j.at("n").get<int>();
      ds.frame_rate = j.at("frame_rate").get<double>();
      ds.style = j.value("style", "");
      if (ds.joint_count <= 0) fail("header joint count must be positive");
      have_header = true;
      continue;
    }
    MotionFrame f;
    try {
      auto p = j.at("p").get<std::vector<double>>();
      auto th = j.at("theta").get<std::vector<double>>();
      auto v = j.at("v").get<std::vector<double>>();
      auto q = j.at("q").get<std::vector<double>>();
      auto qd = j.at("q_dot").get<std::vector<double>>();
      if (p.size() != 3 || th.size() != 4 || v.size() != 6) {
        fail("frame " + std::to_string(frame_index) + ": bad base field sizes");
      }
      if (static_cast<int>(q.size()) != ds.joint_count ||
          static_cast<int>(qd.size()) != ds.joint_count) {
        fail("frame " + std::to_string(frame_index) + ": joint count " +
             std::to_string(q.size()) + " does not match header n=" +
             std::to_string(ds.joint_count));
      }
      f.p = Eigen::Map<Eigen::Vector3d>(p.data());
      f.theta = Eigen::Map<Eigen::Vector4d>(th.data());
      f.v = Eigen::Map<Eigen::Matrix<double, 6, 1>>(v.data());
      f.q = Eigen::Map<Vec>(q.data(), ds.joint_count);
      f.q_dot = Eigen::Map<Vec>(qd.data(), ds.joint_count);
    } catch (const nlohmann::json::exception& e) {
      fail("frame " + std::to_string(frame_index) + ": " + e.what());
    }
    validate_frame(f, frame_index);
    ds.frames.push_back(std::move(f));
    ++frame_index;
  }
  if (!have_header && !ds.frames.empty()) fail("missing header");
  return ds;
}

}  // namespace lm::motion
