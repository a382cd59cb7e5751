#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "strudel/bitvector.hpp"

namespace strudel {

/// Raised on malformed input files; the message names the offending line.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Immutable binary sample matrix, stored column-major as packed bits so the
/// flow evaluator and MI counting can work word-parallel. Optional per-sample
/// weights support EM responsibilities and fractional counts.
class Dataset {
public:
  Dataset(std::vector<BitVector> columns, std::size_t num_samples,
          std::vector<double> weights = {});

  std::size_t num_vars() const { return columns_.size(); }
  std::size_t num_samples() const { return num_samples_; }
  const BitVector& column(std::size_t var) const { return columns_[var]; }
  bool value(std::size_t sample, std::size_t var) const { return columns_[var].get(sample); }

  bool has_weights() const { return !weights_.empty(); }
  /// Empty unless explicitly weighted; use total_weight() for the mass.
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t sample) const { return weights_.empty() ? 1.0 : weights_[sample]; }
  double total_weight() const;

  Dataset with_weights(std::vector<double> weights) const;

  /// Row-level access, used by serialization and resampling.
  std::vector<bool> row(std::size_t sample) const;

private:
  std::vector<BitVector> columns_;
  std::size_t num_samples_ = 0;
  std::vector<double> weights_;
};

/// Builds a Dataset row by row; all rows must have the same width.
class DatasetBuilder {
public:
  explicit DatasetBuilder(std::size_t num_vars) : num_vars_(num_vars) {}
  void add_row(const std::vector<bool>& row);
  Dataset build() &&;

private:
  std::size_t num_vars_;
  std::vector<std::vector<bool>> rows_;
};

/// Reads the comma-separated 0/1 text format (one sample per line, no
/// header). Column count is fixed by the first row; ragged or non-binary
/// input raises ParseError naming the line.
Dataset load_dataset(const std::string& path);

/// Writes the same text format back out.
void save_dataset(const Dataset& d, const std::string& path);

/// Uniform resample with replacement (|D| draws), deterministic per seed.
Dataset bag_resample(const Dataset& d, std::uint64_t seed);

}  // namespace strudel
