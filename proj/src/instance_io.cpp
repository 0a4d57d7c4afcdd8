#include "cmdp_accel/instance_io.hpp"

#include "cmdp_accel/errors.hpp"

#include <fstream>

namespace cmdp_accel {

using nlohmann::json;

namespace {

const json& field(const json& doc, const char* name) {
  if (!doc.is_object()) throw InvalidInput("instance document must be a JSON object");
  auto it = doc.find(name);
  if (it == doc.end()) throw InvalidInput(std::string("missing field '") + name + "'");
  return *it;
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw InvalidInput(what + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw InvalidInput(what + " must be an integer");
  return j.get<int>();
}

}  // namespace

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = number(j[i], what + "[" + std::to_string(i) + "]");
  }
  return v;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + " must be an array of rows");
  const size_t rows = j.size();
  const size_t cols = rows > 0 && j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw InvalidInput(what + " row " + std::to_string(r) + " has inconsistent length");
    }
    for (size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], what + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

TabularCmdp cmdp_from_json(const json& doc, const Tolerances& tol) {
  const int n = integer(field(doc, "num_states"), "num_states");
  const int k = integer(field(doc, "num_actions"), "num_actions");
  if (n <= 0) throw InvalidInput("num_states must be positive");
  if (k <= 0) throw InvalidInput("num_actions must be positive");
  const double gamma = number(field(doc, "discount"), "discount");
  Vector rho = vector_from_json(field(doc, "initial_dist"), "initial_dist");
  Vector thresholds = vector_from_json(field(doc, "thresholds"), "thresholds");

  const json& tr = field(doc, "transition");
  if (!tr.is_array() || tr.size() != static_cast<size_t>(n)) {
    throw InvalidInput("transition must have num_states entries");
  }
  Matrix transition(static_cast<Eigen::Index>(n) * k, n);
  for (int s = 0; s < n; ++s) {
    const Matrix block = matrix_from_json(tr[static_cast<size_t>(s)],
                                          "transition[" + std::to_string(s) + "]");
    if (block.rows() != k || block.cols() != n) {
      throw InvalidInput("transition[" + std::to_string(s) +
                         "] must be num_actions x num_states");
    }
    transition.middleRows(static_cast<Eigen::Index>(s) * k, k) = block;
  }

  const json& rw = field(doc, "rewards");
  if (!rw.is_array()) throw InvalidInput("rewards must be an array of matrices");
  std::vector<Matrix> rewards;
  for (size_t i = 0; i < rw.size(); ++i) {
    rewards.push_back(matrix_from_json(rw[i], "rewards[" + std::to_string(i) + "]"));
  }
  return TabularCmdp(n, k, std::move(transition), std::move(rewards), std::move(thresholds),
                     gamma, std::move(rho), tol);
}

json cmdp_to_json(const TabularCmdp& cmdp) {
  const int n = cmdp.num_states();
  const int k = cmdp.num_actions();
  json tr = json::array();
  for (int s = 0; s < n; ++s) {
    tr.push_back(matrix_to_json(cmdp.transition().middleRows(static_cast<Eigen::Index>(s) * k, k)));
  }
  json rw = json::array();
  for (const Matrix& r : cmdp.rewards()) rw.push_back(matrix_to_json(r));
  return json{{"num_states", n},
              {"num_actions", k},
              {"discount", cmdp.discount()},
              {"initial_dist", vector_to_json(cmdp.initial_dist())},
              {"transition", std::move(tr)},
              {"rewards", std::move(rw)},
              {"thresholds", vector_to_json(cmdp.thresholds())}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << doc.dump(2) << "\n";
}

TabularCmdp load_cmdp(const std::string& path, const Tolerances& tol) {
  return cmdp_from_json(read_json_file(path), tol);
}

void save_cmdp(const TabularCmdp& cmdp, const std::string& path) {
  write_json_file(cmdp_to_json(cmdp), path);
}

}  // namespace cmdp_accel
