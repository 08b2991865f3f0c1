#pragma once

#include <iosfwd>
#include <string>

#include "pldist/model.hpp"

namespace pldist {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain-text model format:
//   p <count>
//   node <i> <theta>      (one per node, ascending)
//   edge <i> <j> <theta>  (one per edge, i < j, lexicographic)
// Blank lines and lines starting with '#' are ignored on input.
struct ModelFile {
  MarkovGraph graph;
  ParamVector theta;
};

void write_model(std::ostream& out, const MarkovGraph& g, const ParamVector& theta);
ModelFile read_model(std::istream& in);
ModelFile read_model_file(const std::string& path);
void write_model_file(const std::string& path, const MarkovGraph& g, const ParamVector& theta);

// One configuration per row, comma separated -1/+1 entries, no header.
void write_samples_csv(std::ostream& out, const SampleMatrix& x);
SampleMatrix read_samples_csv(std::istream& in);
SampleMatrix read_samples_file(const std::string& path);
void write_samples_file(const std::string& path, const SampleMatrix& x);

// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace pldist
