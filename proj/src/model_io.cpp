#include "pldist/model_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace pldist {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_model(std::ostream& out, const MarkovGraph& g, const ParamVector& theta) {
  check_param_vector(g, theta);
  out << "p " << g.node_count() << '\n';
  for (int i = 0; i < g.node_count(); ++i) out << "node " << i << ' ' << format_double(theta(i)) << '\n';
  for (int k = 0; k < g.edge_count(); ++k) {
    const Edge& e = g.edges()[static_cast<std::size_t>(k)];
    out << "edge " << e.u << ' ' << e.v << ' ' << format_double(theta(g.node_count() + k)) << '\n';
  }
}

ModelFile read_model(std::istream& in) {
  std::string line;
  int p = -1;
  std::map<int, double> nodes;
  std::vector<std::pair<int, int>> edges;
  std::vector<double> edge_theta;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto fail = [&](const std::string& what) {
      return FormatError("model line " + std::to_string(line_no) + ": " + what);
    };
    if (key == "p") {
      if (p >= 0) throw fail("duplicate header");
      if (!(ls >> p) || p < 1) throw fail("bad node count");
    } else if (key == "node") {
      if (p < 0) throw fail("node before header");
      int i;
      double v;
      if (!(ls >> i >> v)) throw fail("expected 'node <i> <theta>'");
      if (!edges.empty()) throw fail("node lines must precede edge lines");
      if (!nodes.emplace(i, v).second) throw fail("duplicate node " + std::to_string(i));
    } else if (key == "edge") {
      if (p < 0) throw fail("edge before header");
      int i, j;
      double v;
      if (!(ls >> i >> j >> v)) throw fail("expected 'edge <i> <j> <theta>'");
      edges.emplace_back(i, j);
      edge_theta.push_back(v);
    } else {
      throw fail("unknown record '" + key + "'");
    }
    std::string extra;
    if (ls >> extra) throw fail("trailing tokens");
  }
  if (p < 0) throw FormatError("model file missing 'p <count>' header");
  if (static_cast<int>(nodes.size()) != p) throw FormatError("expected one node line per node");
  for (int i = 0; i < p; ++i) {
    if (!nodes.count(i)) throw FormatError("missing node " + std::to_string(i));
  }

  MarkovGraph g(p, edges);
  ParamVector theta(term_count(g));
  for (auto [i, v] : nodes) theta(i) = v;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    theta(p + g.edge_index(edges[k].first, edges[k].second)) = edge_theta[k];
  }
  check_param_vector(g, theta);
  return {std::move(g), std::move(theta)};
}

ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_model(in);
}

void write_model_file(const std::string& path, const MarkovGraph& g, const ParamVector& theta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_model(out, g, theta);
}

void write_samples_csv(std::ostream& out, const SampleMatrix& x) {
  std::string row;
  for (int k = 0; k < x.rows(); ++k) {
    row.clear();
    for (int i = 0; i < x.cols(); ++i) {
      if (i) row += ',';
      row += x(k, i) > 0 ? "1" : "-1";
    }
    row += '\n';
    out << row;
  }
}

SampleMatrix read_samples_csv(std::istream& in) {
  std::vector<std::int8_t> values;
  int cols = -1;
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    int width = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      std::string cell = line.substr(pos, comma - pos);
      if (cell == "1" || cell == "+1") {
        values.push_back(1);
      } else if (cell == "-1") {
        values.push_back(-1);
      } else {
        throw FormatError("sample row " + std::to_string(rows + 1) + ": entry '" + cell + "' is not -1/+1");
      }
      ++width;
      pos = comma + 1;
    }
    if (cols < 0) cols = width;
    if (width != cols) throw FormatError("sample row " + std::to_string(rows + 1) + " has inconsistent width");
    ++rows;
  }
  return SampleMatrix(rows, std::max(cols, 0), std::move(values));
}

SampleMatrix read_samples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_samples_csv(in);
}

void write_samples_file(const std::string& path, const SampleMatrix& x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_samples_csv(out, x);
}

}  // namespace pldist
