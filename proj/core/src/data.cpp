#include "quadgroup/data.hpp"

#include "quadgroup/rng.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace quadgroup {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string lower = cell;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower == "na" || lower == "nan";
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(cell, &consumed);
    if (consumed != cell.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw std::invalid_argument("non-numeric cell '" + cell + "' at row " +
                                std::to_string(row) + ", column " + std::to_string(col));
  }
}

}  // namespace

void validate_dataset(const Dataset& d) {
  if (d.x.rows() != d.y.size()) {
    throw std::invalid_argument("dataset: x has " + std::to_string(d.x.rows()) +
                                " rows but y has length " + std::to_string(d.y.size()));
  }
  if (d.n() < 2) throw std::invalid_argument("dataset: need at least 2 observations");
  if (d.p() < 1) throw std::invalid_argument("dataset: need at least 1 covariate");
  if (!d.x.allFinite() || !d.y.allFinite()) {
    throw std::invalid_argument("dataset: non-finite entries are not allowed");
  }
}

GroupSpec::GroupSpec(std::vector<int> indices) : indices_(std::move(indices)) {
  if (indices_.empty()) throw std::invalid_argument("group: empty index set");
  std::sort(indices_.begin(), indices_.end());
  if (indices_.front() < 1) {
    throw std::invalid_argument("group: index " + std::to_string(indices_.front()) +
                                " below 1 (indices are 1-based)");
  }
  const auto dup = std::adjacent_find(indices_.begin(), indices_.end());
  if (dup != indices_.end()) {
    throw std::invalid_argument("group: duplicate index " + std::to_string(*dup));
  }
}

bool GroupSpec::contains(int one_based) const {
  return std::binary_search(indices_.begin(), indices_.end(), one_based);
}

void validate_group(const GroupSpec& g, Eigen::Index p) {
  if (g.indices().back() > p) {
    throw std::invalid_argument("group: index " + std::to_string(g.indices().back()) +
                                " exceeds covariate count " + std::to_string(p));
  }
}

WeightMatrix::WeightMatrix(Eigen::MatrixXd a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols() || a_.rows() < 1) {
    throw std::invalid_argument("weight matrix: must be square and nonempty");
  }
  const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("weight matrix: not symmetric");
  }
  a_ = 0.5 * (a_ + a_.transpose().eval());
  Eigen::LLT<Eigen::MatrixXd> llt(a_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("weight matrix: not positive definite");
  }
}

SampleSplit make_split(int n, std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("make_split: need n >= 4");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 1);
  CounterRng rng(seed, 0, StreamRole::split);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i + 1));
    std::swap(perm[i], perm[j]);
  }
  const std::size_t n1 = static_cast<std::size_t>(n) / 2;
  SampleSplit split;
  split.first_half.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n1));
  split.second_half.assign(perm.begin() + static_cast<std::ptrdiff_t>(n1), perm.end());
  std::sort(split.first_half.begin(), split.first_half.end());
  std::sort(split.second_half.begin(), split.second_half.end());
  return split;
}

Dataset load_dataset(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<bool> keep;
  std::size_t width = 0;
  std::size_t file_row = 0;
  std::string line;

  while (std::getline(in, line)) {
    ++file_row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (file_row == 1 && opts.has_header) {
      header = cells;
      width = cells.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw std::invalid_argument("ragged row " + std::to_string(file_row) + ": expected " +
                                  std::to_string(width) + " cells, found " +
                                  std::to_string(cells.size()));
    }
    bool incomplete = false;
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (is_missing(cells[c])) {
        if (opts.drop_incomplete) {
          incomplete = true;
          break;
        }
        throw std::invalid_argument("missing value at row " + std::to_string(file_row) +
                                    ", column " + std::to_string(c + 1));
      }
      values[c] = parse_cell(cells[c], file_row, c + 1);
    }
    if (!incomplete) rows.push_back(std::move(values));
  }

  if (rows.empty()) throw std::invalid_argument("no data rows in " + path);
  if (width < 2) throw std::invalid_argument("need at least one covariate and a response");

  std::size_t y_col;
  if (opts.response_col) {
    if (*opts.response_col < 1 || static_cast<std::size_t>(*opts.response_col) > width) {
      throw std::invalid_argument("response column " + std::to_string(*opts.response_col) +
                                  " out of range 1.." + std::to_string(width));
    }
    y_col = static_cast<std::size_t>(*opts.response_col) - 1;
  } else if (opts.has_header) {
    const auto it = std::find(header.begin(), header.end(), "y");
    if (it == header.end()) {
      throw std::invalid_argument("no column named 'y'; use the response-column option");
    }
    y_col = static_cast<std::size_t>(it - header.begin());
  } else {
    y_col = width - 1;
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(width - 1);
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == y_col) {
        d.y(i) = rows[static_cast<std::size_t>(i)][c];
      } else {
        d.x(i, j++) = rows[static_cast<std::size_t>(i)][c];
      }
    }
  }
  validate_dataset(d);
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out.precision(17);
  for (Eigen::Index j = 0; j < d.p(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    for (Eigen::Index j = 0; j < d.p(); ++j) out << d.x(i, j) << ',';
    out << d.y(i) << '\n';
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

namespace {

int parse_index(const std::string& token, std::size_t line_no) {
  int value = 0;
  const auto* begin = token.data();
  const auto* end = begin + token.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end) {
    throw std::invalid_argument("bad index '" + token + "' at line " + std::to_string(line_no));
  }
  return value;
}

}  // namespace

GroupSpec load_group(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open group file: " + path);
  std::vector<int> indices;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string token = trim(line);
    if (token.empty()) continue;
    indices.push_back(parse_index(token, line_no));
  }
  if (indices.empty()) throw std::invalid_argument("empty group file: " + path);
  return GroupSpec(std::move(indices));
}

std::vector<GroupSpec> load_groups(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open groups file: " + path);
  std::vector<GroupSpec> groups;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<int> indices;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      token = trim(token);
      if (token.empty()) continue;
      indices.push_back(parse_index(token, line_no));
    }
    if (indices.empty()) continue;
    groups.push_back(GroupSpec(std::move(indices)));
  }
  if (groups.empty()) throw std::invalid_argument("empty groups file: " + path);
  return groups;
}

}  // namespace quadgroup
