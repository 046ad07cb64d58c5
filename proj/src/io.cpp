#include "orderspn/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "orderspn/error.hpp"

namespace orderspn {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

Dataset read_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      std::size_t a = pos;
      std::size_t b = end;
      while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
      while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t' || line[b - 1] == '\r')) --b;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, v);
      if (ec != std::errc() || ptr != line.data() + b)
        throw ConfigError(path + ": bad number on line " + std::to_string(rows.size() + 1));
      row.push_back(v);
      pos = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path + ": ragged row " + std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no rows");
  Dataset data;
  data.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) data.rows(r, c) = rows[r][c];
  data.validate();
  return data;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot write " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) std::fprintf(f, c ? ",%.17g" : "%.17g", m(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

void write_csv_dataset(const std::string& path, const Dataset& data) { write_matrix_csv(path, data.rows); }

nlohmann::json dag_to_json(const Dag& dag) {
  nlohmann::json parents = nlohmann::json::array();
  for (int i = 0; i < dag.d(); ++i) parents.push_back(dag.parents(i).members());
  return {{"d", dag.d()}, {"parents", parents}};
}

Dag dag_from_json(const nlohmann::json& j) {
  const int d = j.at("d").get<int>();
  const auto& parents = j.at("parents");
  if (!parents.is_array() || static_cast<int>(parents.size()) != d)
    throw ConfigError("dag: 'parents' must list one array per variable");
  Dag dag(d);
  for (int i = 0; i < d; ++i)
    for (int p : parents.at(i).get<std::vector<int>>()) {
      if (p < 0 || p >= d) throw ConfigError("dag: parent index out of range");
      dag.add_edge(p, i);
    }
  if (!dag.is_acyclic()) throw ConfigError("dag: graph has a cycle");
  return dag;
}

EdgeConjunction conjunction_from_json(const nlohmann::json& j, int d) {
  if (!j.is_array()) throw ConfigError("literals: expected a JSON array");
  EdgeConjunction c(d);
  for (const auto& lit : j) c.add(lit.at("child").get<int>(), lit.at("parent").get<int>(), lit.at("present").get<bool>());
  return c;
}

nlohmann::json conjunction_to_json(const EdgeConjunction& c) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < c.d(); ++i) {
    for (int p : c.required(i).members()) out.push_back({{"child", i}, {"parent", p}, {"present", true}});
    for (int p : c.forbidden(i).members()) out.push_back({{"child", i}, {"parent", p}, {"present", false}});
  }
  return out;
}

}  // namespace orderspn
