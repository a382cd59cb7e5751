#include "strudel/dataset.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "strudel/rng.hpp"

namespace strudel {

Dataset::Dataset(std::vector<BitVector> columns, std::size_t num_samples,
                 std::vector<double> weights)
    : columns_(std::move(columns)), num_samples_(num_samples), weights_(std::move(weights)) {
  if (columns_.empty()) throw std::invalid_argument("dataset needs at least one variable");
  for (const auto& c : columns_) {
    if (c.size() != num_samples_) throw std::invalid_argument("column length mismatch");
  }
  if (!weights_.empty()) {
    if (weights_.size() != num_samples_)
      throw std::invalid_argument("weight vector length must equal sample count");
    bool any_positive = false;
    for (double w : weights_) {
      if (w < 0.0) throw std::invalid_argument("weights must be non-negative");
      if (w > 0.0) any_positive = true;
    }
    if (!any_positive) throw std::invalid_argument("at least one weight must be positive");
  }
}

double Dataset::total_weight() const {
  if (weights_.empty()) return static_cast<double>(num_samples_);
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

Dataset Dataset::with_weights(std::vector<double> weights) const {
  return Dataset(columns_, num_samples_, std::move(weights));
}

std::vector<bool> Dataset::row(std::size_t sample) const {
  std::vector<bool> r(num_vars());
  for (std::size_t v = 0; v < num_vars(); ++v) r[v] = columns_[v].get(sample);
  return r;
}

void DatasetBuilder::add_row(const std::vector<bool>& row) {
  if (row.size() != num_vars_) throw std::invalid_argument("row width mismatch");
  rows_.push_back(row);
}

Dataset DatasetBuilder::build() && {
  std::vector<BitVector> cols(num_vars_, BitVector(rows_.size()));
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (std::size_t v = 0; v < num_vars_; ++v) {
      if (rows_[r][v]) cols[v].set(r);
    }
  }
  return Dataset(std::move(cols), rows_.size());
}

namespace {

// Accepts "0" or "1" with surrounding whitespace; anything else is an error.
int parse_token(const std::string& tok, std::size_t line_no) {
  std::size_t b = tok.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    throw ParseError("line " + std::to_string(line_no) + ": empty token");
  std::size_t e = tok.find_last_not_of(" \t\r");
  if (e != b || (tok[b] != '0' && tok[b] != '1'))
    throw ParseError("line " + std::to_string(line_no) + ": token '" + tok.substr(b, e - b + 1) +
                     "' is not 0 or 1");
  return tok[b] - '0';
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);

  std::vector<std::vector<bool>> rows;
  std::size_t num_vars = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;  // blank line
    std::vector<bool> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(parse_token(tok, line_no) == 1);
    if (rows.empty()) {
      num_vars = row.size();
    } else if (row.size() != num_vars) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(num_vars) + " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("dataset file is empty: " + path);

  DatasetBuilder b(num_vars);
  for (const auto& r : rows) b.add_row(r);
  return std::move(b).build();
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (std::size_t s = 0; s < d.num_samples(); ++s) {
    for (std::size_t v = 0; v < d.num_vars(); ++v) {
      if (v) out << ',';
      out << (d.value(s, v) ? '1' : '0');
    }
    out << '\n';
  }
}

Dataset bag_resample(const Dataset& d, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = d.num_samples();
  std::vector<BitVector> cols(d.num_vars(), BitVector(n));
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t src = static_cast<std::size_t>(rng.below(n));
    for (std::size_t v = 0; v < d.num_vars(); ++v) {
      if (d.value(src, v)) cols[v].set(s);
    }
  }
  return Dataset(std::move(cols), n);
}

}  // namespace strudel
