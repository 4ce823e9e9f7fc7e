#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace quadgroup {

/// Design matrix X (n observations by p covariates) with response y.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

/// Validates Dataset invariants (n >= 2, p >= 1, matching lengths,
/// finite entries); throws std::invalid_argument on violation.
void validate_dataset(const Dataset& d);

/// Index set G of tested coefficients. Public indices are 1-based;
/// construction sorts and validates them.
class GroupSpec {
 public:
  /// Builds a group from 1-based indices (any order). Throws
  /// std::invalid_argument when empty, duplicated, or below 1.
  explicit GroupSpec(std::vector<int> indices);

  const std::vector<int>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }

  /// 0-based column index of member k, for matrix slicing.
  Eigen::Index col(std::size_t k) const { return indices_[k] - 1; }

  bool contains(int one_based) const;

 private:
  std::vector<int> indices_;
};

/// Checks group indices against the covariate count p; throws
/// std::invalid_argument naming the offending index otherwise.
void validate_group(const GroupSpec& g, Eigen::Index p);

/// Known positive definite weight matrix A of dimension |G|.
class WeightMatrix {
 public:
  /// Throws std::invalid_argument when a is non-square, asymmetric
  /// beyond 1e-10 relative tolerance, or not positive definite
  /// (checked via a Cholesky factorization attempt).
  explicit WeightMatrix(Eigen::MatrixXd a);

  const Eigen::MatrixXd& a() const { return a_; }
  Eigen::Index dim() const { return a_.rows(); }

 private:
  Eigen::MatrixXd a_;
};

/// Disjoint halves of {1..n} for the sample-splitting variant.
/// Indices are 1-based and sorted.
struct SampleSplit {
  std::vector<int> first_half;
  std::vector<int> second_half;
};

/// Uniformly random partition of {1..n} into sizes floor(n/2) and
/// n - floor(n/2), deterministic given seed. Requires n >= 4.
SampleSplit make_split(int n, std::uint64_t seed);

/// CSV ingestion options. The response column is found by header name
/// "y" unless response_col (1-based) is given; without a header the
/// response defaults to the last column.
struct CsvOptions {
  bool has_header = true;
  std::optional<int> response_col;
  /// Drop rows containing empty/NA cells instead of failing.
  bool drop_incomplete = false;
};

/// Loads a rectangular numeric CSV into a Dataset. Parse failures
/// throw std::invalid_argument naming the 1-based file row and column.
Dataset load_dataset(const std::string& path, const CsvOptions& opts = {});

/// Writes a Dataset as CSV with header x1,...,xp,y at full double
/// round-trip precision.
void save_dataset(const Dataset& d, const std::string& path);

/// Reads one 1-based index per line into a GroupSpec. Blank lines are
/// skipped; malformed lines throw naming the line number.
GroupSpec load_group(const std::string& path);

/// Reads one group per line, comma-separated 1-based indices.
std::vector<GroupSpec> load_groups(const std::string& path);

}  // namespace quadgroup
