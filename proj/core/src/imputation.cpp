#include "gridrecon/imputation.hpp"

#include <algorithm>
#include <cmath>

#include "gridrecon/error.hpp"
#include "gridrecon/simlab.hpp"

namespace gridrecon {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::full_gp: return "full-gp";
    case Method::rgp: return "rgp";
    case Method::rgp_g: return "rgp-g";
    case Method::linear: return "linear";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "full-gp") return Method::full_gp;
  if (text == "rgp") return Method::rgp;
  if (text == "rgp-g") return Method::rgp_g;
  if (text == "linear") return Method::linear;
  fail(ErrorCode::TypeError, "unknown method '" + std::string(text) + "'");
}

Standardizer Standardizer::identity(int slots) {
  return {Eigen::VectorXd::Zero(slots), Eigen::VectorXd::Ones(slots)};
}

Standardizer Standardizer::fit(const BatchDataset& data) {
  const int slots = data.slots();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(slots), sq = sum, count = sum;
  for (const auto& b : data.observations) {
    for (int s = 0; s < slots; ++s) {
      if (!b.mask[static_cast<std::size_t>(s)]) continue;
      sum(s) += b.values(s);
      sq(s) += b.values(s) * b.values(s);
      count(s) += 1.0;
    }
  }
  auto stats = [](double s, double q, double n) {
    const double mean = s / n;
    const double var = std::max(q / n - mean * mean, 0.0);
    return std::pair{mean, std::sqrt(var)};
  };

  Standardizer out = identity(slots);
  for (int a = 0; a < data.tasks; ++a) {
    const auto seg = Eigen::seqN(a * data.nodes, data.nodes);
    const double n_task = count(seg).sum();
    double pooled_mean = 0.0, pooled_sd = 1.0;
    if (n_task > 0) {
      auto [m, sd] = stats(sum(seg).sum(), sq(seg).sum(), n_task);
      pooled_mean = m;
      if (sd > 1e-12 * std::max(1.0, std::abs(m))) pooled_sd = sd;
      else if (std::abs(m) > 0.0) pooled_sd = std::abs(m);
    }
    for (int b = 0; b < data.nodes; ++b) {
      const int s = a * data.nodes + b;
      out.offset(s) = pooled_mean;
      out.scale(s) = pooled_sd;
      if (count(s) >= 2) {
        auto [m, sd] = stats(sum(s), sq(s), count(s));
        out.offset(s) = m;
        if (sd > 1e-9 * std::max(1.0, std::abs(m))) out.scale(s) = sd;
      }
    }
  }
  return out;
}

BatchDataset Standardizer::apply(const BatchDataset& data) const {
  BatchDataset out = data;
  for (auto& b : out.observations) {
    for (Eigen::Index s = 0; s < b.values.size(); ++s) {
      b.values(s) = b.mask[static_cast<std::size_t>(s)] ? (b.values(s) - offset(s)) / scale(s) : 0.0;
    }
  }
  return out;
}

void Standardizer::restore(ImputationResult& result) const {
  const Eigen::Index nq = result.query_count();
  for (Eigen::Index s = 0; s < offset.size(); ++s) {
    result.mean.segment(s * nq, nq) = result.mean.segment(s * nq, nq).array() * scale(s) + offset(s);
    if (result.variance.size() > 0)
      result.variance.segment(s * nq, nq) *= scale(s) * scale(s);
  }
  if (result.covariance.size() > 0) {
    Eigen::VectorXd expanded(result.mean.size());
    for (Eigen::Index s = 0; s < offset.size(); ++s) expanded.segment(s * nq, nq).setConstant(scale(s));
    result.covariance = expanded.asDiagonal() * result.covariance * expanded.asDiagonal();
  }
}

ImputationResult impute(Method method, const BatchDataset& data, const std::vector<double>& fine_grid,
                        const Hyperparameters& hp, const TaskKernel& task, const GraphFilter* filter,
                        const ImputeOptions& options) {
  data.validate();
  require(!fine_grid.empty(), ErrorCode::EmptyQuery, "fine grid is empty");
  if (method == Method::linear) return linear_interpolate(data, fine_grid, options.empty_series);

  const Standardizer z = options.standardize ? Standardizer::fit(data) : Standardizer::identity(data.slots());
  const BatchDataset work = options.standardize ? z.apply(data) : data;

  ImputationResult out;
  if (method == Method::full_gp) {
    BatchOptions bo;
    bo.noise_mode = options.noise_mode;
    bo.covariance = options.covariance;
    out = fit_predict_full(work, fine_grid, hp, task, bo);
  } else {
    const RecursiveMode mode = method == Method::rgp_g ? RecursiveMode::rgp_g : RecursiveMode::rgp;
    require(mode == RecursiveMode::rgp || filter != nullptr, ErrorCode::ModeFilterMismatch,
            "rgp-g requires a graph filter");
    double lo = fine_grid.front(), hi = fine_grid.back();
    if (!data.times.empty()) {
      lo = std::min(lo, data.times.front());
      hi = std::max(hi, data.times.back());
    }
    const BasisConfig basis = options.basis ? *options.basis
                                            : BasisConfig::from_observations(work, options.basis_n_max, lo, hi);
    RecursiveOptions ro;
    ro.noise_mode = options.noise_mode;
    ro.verify_theorems = options.verify_theorems;
    ro.covariance = options.covariance;
    SessionResult session = run_session(mode, work, basis, options.schedule, fine_grid, hp, task,
                                        mode == RecursiveMode::rgp_g ? filter : nullptr, ro);
    if (options.trace_sink) *options.trace_sink = std::move(session.trace_log);
    out = std::move(session.result);
  }
  z.restore(out);
  return out;
}

}  // namespace gridrecon
