#include "quadgroup/apps.hpp"

#include <nlohmann/json.hpp>

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace quadgroup {

InteractionDesign build_interaction(const Dataset& d, const Eigen::VectorXd& treatment) {
  validate_dataset(d);
  if (treatment.size() != d.n()) {
    throw std::invalid_argument("build_interaction: treatment length " +
                                std::to_string(treatment.size()) + " mismatches n = " +
                                std::to_string(d.n()));
  }
  if (!treatment.allFinite()) {
    throw std::invalid_argument("build_interaction: treatment has non-finite entries");
  }

  const Eigen::Index p = d.p();
  Dataset design;
  design.x.resize(d.n(), 2 * p);
  design.x.leftCols(p) = d.x.array().colwise() * treatment.array();
  design.x.rightCols(p) = d.x;
  design.y = d.y;

  std::vector<int> gamma(static_cast<std::size_t>(p));
  std::iota(gamma.begin(), gamma.end(), 1);
  InteractionDesign out{std::move(design), GroupSpec(std::move(gamma)), std::nullopt};
  if (treatment.isZero(0.0)) {
    out.warning = "treatment is identically zero; the interaction block is degenerate";
  }
  return out;
}

std::vector<HeritRecord> heritability_report(const Dataset& d,
                                             const std::vector<GroupSpec>& groups,
                                             const HeritOptions& opts) {
  validate_dataset(d);
  if (groups.empty()) throw std::invalid_argument("heritability_report: no groups");
  for (const GroupSpec& g : groups) validate_group(g, d.p());
  if (opts.mode == ProjectionMode::general) {
    throw std::invalid_argument("heritability_report: general mode needs per-group weights; "
                                "use sigma or identity");
  }

  const InitialFit fit = fit_initial(d, opts.fit);
  const EstimationContext context(d, fit, opts.c_lambda);
  const double n = static_cast<double>(d.n());
  const double y_mean = d.y.mean();
  const double var_y = (d.y.array() - y_mean).square().sum() / (n - 1.0);

  std::vector<HeritRecord> records;
  records.reserve(groups.size());
  for (const GroupSpec& g : groups) {
    QuadEstimate est = context.estimate(g, opts.mode, std::nullopt, opts.tau);
    ConfInterval ci = confidence_interval(est, opts.level);
    std::optional<double> proportion;
    if (opts.normalize && var_y > 0.0) proportion = est.q_hat / var_y;
    records.push_back(HeritRecord{g, std::move(est), ci, proportion});
  }
  return records;
}

std::string herit_to_json(const std::vector<HeritRecord>& records) {
  nlohmann::json out = nlohmann::json::array();
  for (const HeritRecord& record : records) {
    nlohmann::json entry{{"group", record.group.indices()},
                         {"q_hat", record.estimate.q_hat},
                         {"v_hat", record.estimate.v_hat},
                         {"plug_in", record.estimate.plug_in},
                         {"correction", record.estimate.correction},
                         {"ci", {record.ci.lower, record.ci.upper}},
                         {"level", record.ci.level},
                         {"tau", record.estimate.tau},
                         {"mode", mode_name(record.estimate.mode)}};
    if (record.proportion) entry["proportion"] = *record.proportion;
    out.push_back(std::move(entry));
  }
  return out.dump(2);
}

std::string herit_to_csv(const std::vector<HeritRecord>& records) {
  std::ostringstream out;
  out.precision(12);
  out << "group,q_hat,lower,upper,proportion\n";
  for (const HeritRecord& record : records) {
    const auto& members = record.group.indices();
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k > 0) out << ';';
      out << members[k];
    }
    out << ',' << record.estimate.q_hat << ',' << record.ci.lower << ',' << record.ci.upper
        << ',';
    if (record.proportion) out << *record.proportion;
    else out << "NA";
    out << '\n';
  }
  return out.str();
}

}  // namespace quadgroup
