#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mclt/chain.hpp"

// Chain-spec files: JSON with keys horizon, states (array of arrays of
// labels), kernels (array of row-major matrices), initial (vector),
// functional (array of matrices), lattice (optional number).

namespace mclt::io {

using nlohmann::json;

struct ChainSpec {
  Chain chain;
  std::optional<Functional> functional;
};

inline matrix matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw BadChainSpec("matrix must be a non-empty array");
  const std::size_t r = rows.size();
  const std::size_t c = rows[0].size();
  matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) throw BadChainSpec("ragged matrix rows");
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

inline json matrix_to_json(const matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ChainSpec parse_chain_spec(const json& j) {
  ChainSpec spec;
  if (!j.contains("horizon") || !j.contains("states") || !j.contains("kernels") ||
      !j.contains("initial"))
    throw BadChainSpec("need keys horizon, states, kernels, initial");
  spec.chain.horizon = j["horizon"].get<int>();
  for (const auto& s : j["states"]) {
    std::vector<std::string> labels;
    for (const auto& l : s)
      labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
    spec.chain.states.push_back(std::move(labels));
  }
  for (const auto& k : j["kernels"]) spec.chain.kernels.push_back(matrix_from_json(k));
  spec.chain.initial = j["initial"].get<std::vector<double>>();
  if (j.contains("functional")) {
    std::vector<matrix> vals;
    for (const auto& fm : j["functional"]) vals.push_back(matrix_from_json(fm));
    std::optional<double> lattice;
    if (j.contains("lattice") && !j["lattice"].is_null()) lattice = j["lattice"].get<double>();
    spec.functional = Functional::from_values(std::move(vals), lattice);
  }
  return spec;
}

inline ChainSpec load_chain_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadChainSpec("cannot open " + path);
  json j;
  in >> j;
  return parse_chain_spec(j);
}

inline json chain_spec_to_json(const Chain& chain, const Functional* f = nullptr) {
  json j;
  j["horizon"] = chain.horizon;
  j["states"] = chain.states;
  json kernels = json::array();
  for (const auto& k : chain.kernels) kernels.push_back(matrix_to_json(k));
  j["kernels"] = std::move(kernels);
  j["initial"] = chain.initial;
  if (f) {
    json vals = json::array();
    for (const auto& v : f->values) vals.push_back(matrix_to_json(v));
    j["functional"] = std::move(vals);
    if (f->lattice) j["lattice"] = *f->lattice;
  }
  return j;
}

inline void save_chain_spec(const std::string& path, const Chain& chain,
                            const Functional* f = nullptr) {
  std::ofstream out(path);
  out << chain_spec_to_json(chain, f).dump(2) << "\n";
}

// ----------------------------------------------------------------------------
// CSV emission.
// ----------------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path) {
    for (std::size_t i = 0; i < header.size(); ++i)
      out_ << (i ? "," : "") << header[i];
    out_ << "\n";
    out_.precision(17);
  }

  template <class... Ts>
  void row(const Ts&... vals) {
    bool first = true;
    ((out_ << (first ? "" : ","), out_ << vals, first = false), ...);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace mclt::io
