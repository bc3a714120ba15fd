#include "gridrecon/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>
#include <string>

#include "gridrecon/error.hpp"
#include "gridrecon/rng.hpp"

namespace gridrecon {

namespace {

constexpr std::array<std::string_view, 3> kClassNames{"residential", "commercial", "industrial"};
constexpr std::array<std::string_view, kQuantityCount> kQuantityNames{"P", "Q", "v_real", "v_imag", "v_mag"};

/// Raised-cosine bump of half-width `width` minutes centred at `centre`, wrapping over the day.
double bump(double minute, double centre, double width) {
  double d = std::fmod(std::abs(minute - centre), 1440.0);
  d = std::min(d, 1440.0 - d);
  if (d >= width) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * d / width));
}

double uniform(std::mt19937_64& rng, std::pair<double, double> range) {
  return range.first + (range.second - range.first) * uniform01(rng);
}

}  // namespace

std::string_view to_string(LoadClass c) { return kClassNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(Quantity q) { return kQuantityNames[static_cast<std::size_t>(q)]; }

LoadClass parse_load_class(std::string_view text) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == text) return static_cast<LoadClass>(i);
  fail(ErrorCode::ParseError, "unknown load class '" + std::string(text) + "'");
}

Quantity parse_quantity(std::string_view text) {
  for (std::size_t i = 0; i < kQuantityNames.size(); ++i)
    if (kQuantityNames[i] == text) return static_cast<Quantity>(i);
  fail(ErrorCode::ParseError, "unknown quantity '" + std::string(text) + "'");
}

std::string_view to_string(NoiseFamily f) { return f == NoiseFamily::gaussian ? "gaussian" : "laplacian"; }

NoiseFamily parse_noise_family(std::string_view text) {
  if (text == "gaussian") return NoiseFamily::gaussian;
  if (text == "laplacian") return NoiseFamily::laplacian;
  fail(ErrorCode::ParseError, "unknown noise family '" + std::string(text) + "'");
}

double class_template(LoadClass c, double minute_of_day) {
  switch (c) {
    case LoadClass::residential:
      return 0.6 + 0.35 * bump(minute_of_day, 450.0, 150.0) + 0.6 * bump(minute_of_day, 1170.0, 210.0);
    case LoadClass::commercial:
      return 0.45 + 0.75 * bump(minute_of_day, 780.0, 360.0);
    case LoadClass::industrial:
      return 0.8 + 0.3 * bump(minute_of_day, 660.0, 480.0);
  }
  return 1.0;
}

void ProfileSpec::validate(int nodes) const {
  require(horizon_steps >= 2, ErrorCode::InvalidSpec, "horizon must be at least 2 steps");
  require(step_minutes > 0.0, ErrorCode::InvalidSpec, "step_minutes must be positive");
  require(classes.empty() || static_cast<int>(classes.size()) == nodes, ErrorCode::DimensionMismatch,
          "one load class per node");
  require(base_load.empty() || static_cast<int>(base_load.size()) == nodes, ErrorCode::DimensionMismatch,
          "one base load per node");
  for (double b : base_load) require(b > 0.0, ErrorCode::InvalidSpec, "base loads must be positive");
  require(base_load_range.first > 0.0 && base_load_range.second >= base_load_range.first,
          ErrorCode::InvalidSpec, "bad base load range");
  require(power_factor > 0.0 && power_factor <= 1.0, ErrorCode::InvalidSpec, "power factor must be in (0, 1]");
  require(sinusoid_amplitude_range.first >= 0.0 &&
              sinusoid_amplitude_range.second >= sinusoid_amplitude_range.first,
          ErrorCode::InvalidSpec, "bad sinusoid amplitude range");
  require(sinusoid_period_minutes.first > 0.0 && sinusoid_period_minutes.second >= sinusoid_period_minutes.first,
          ErrorCode::InvalidSpec, "bad sinusoid period range");
  require(sinusoid_count >= 0 && noise_scale >= 0.0 && spatial_alpha >= 0.0 && base_power_kw > 0.0,
          ErrorCode::InvalidSpec, "negative profile parameter");
}

Truth generate_truth(const ProfileSpec& spec, const RadialFeeder& feeder) {
  feeder.validate();
  const int m = feeder.buses();
  spec.validate(m);
  const Eigen::MatrixXd s =
      make_filter(feeder_graph(feeder, {.allow_disconnected = true}), spec.spatial_alpha).matrix_s;
  const RngStreams streams(spec.seed);

  auto class_rng = streams.stream("profile.class");
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(m, 3);
  for (int i = 0; i < m; ++i) {
    const auto c = spec.classes.empty() ? static_cast<std::size_t>(std::min(2.0, std::floor(3.0 * uniform01(class_rng))))
                                        : static_cast<std::size_t>(spec.classes[static_cast<std::size_t>(i)]);
    onehot(i, static_cast<Eigen::Index>(c)) = 1.0;
  }
  const Eigen::MatrixXd weights = s * onehot;

  auto base_rng = streams.stream("profile.base");
  Eigen::VectorXd base(m);
  for (int i = 0; i < m; ++i)
    base(i) = spec.base_load.empty() ? uniform(base_rng, spec.base_load_range) : spec.base_load[static_cast<std::size_t>(i)];

  auto wave_rng = streams.stream("profile.sinusoid");
  const int k = spec.sinusoid_count;
  Eigen::VectorXd period(k), phase(k);
  Eigen::MatrixXd amplitude(m, k);
  for (int j = 0; j < k; ++j) {
    period(j) = uniform(wave_rng, spec.sinusoid_period_minutes);
    phase(j) = 2.0 * std::numbers::pi * uniform01(wave_rng);
    Eigen::VectorXd raw(m);
    for (int i = 0; i < m; ++i) raw(i) = uniform(wave_rng, spec.sinusoid_amplitude_range);
    amplitude.col(j) = s * raw;
  }

  auto noise_rng = streams.stream("profile.noise");
  const int horizon = spec.horizon_steps;
  Truth truth;
  truth.nodes = m;
  truth.horizon = horizon;
  truth.step_minutes = spec.step_minutes;
  truth.base_power_kw = spec.base_power_kw;
  truth.pf = build_toy_pf_model(feeder);
  for (auto& series : truth.series) series.resize(m, horizon);

  const double q_ratio = std::tan(std::acos(spec.power_factor));
  Eigen::VectorXd raw(m), shape(m);
  for (int t = 0; t < horizon; ++t) {
    const double minute = spec.start_minute + t * spec.step_minutes;
    const double day_minute = std::fmod(minute, 1440.0);
    const Eigen::Vector3d templ(class_template(LoadClass::residential, day_minute),
                                class_template(LoadClass::commercial, day_minute),
                                class_template(LoadClass::industrial, day_minute));
    shape = weights * templ;
    for (int j = 0; j < k; ++j)
      shape += amplitude.col(j) * std::sin(2.0 * std::numbers::pi * minute / period(j) + phase(j));
    for (int i = 0; i < m; ++i) raw(i) = standard_normal(noise_rng);
    shape += spec.noise_scale * (s * raw);
    const Eigen::VectorXd p = base.cwiseProduct(shape);
    const Eigen::VectorXd q = q_ratio * p;
    const Eigen::VectorXcd v = truth.pf.phasor(p / spec.base_power_kw, q / spec.base_power_kw);
    truth.series[0].col(t) = p;
    truth.series[1].col(t) = q;
    truth.series[2].col(t) = v.real();
    truth.series[3].col(t) = v.imag();
    truth.series[4].col(t) = truth.pf.magnitude(p / spec.base_power_kw, q / spec.base_power_kw);
  }
  return truth;
}

void SamplingSchedule::validate(int horizon) const {
  require(!tasks.empty(), ErrorCode::InvalidSpec, "schedule needs at least one task");
  for (const auto& t : tasks) {
    require(t.period >= 1 && t.offset >= 0, ErrorCode::InvalidSpec, "periods >= 1 and offsets >= 0");
    require(t.offset + t.period <= horizon, ErrorCode::InvalidSpec, "task schedule outside the horizon");
    require(t.relative_std.value_or(0.0) >= 0.0, ErrorCode::InvalidSpec, "task noise must be nonnegative");
  }
  require(missing_fraction >= 0.0 && missing_fraction < 1.0, ErrorCode::InvalidSpec,
          "missing_fraction must be in [0, 1)");
  require(fad > 0.0 && fad <= 1.0, ErrorCode::InvalidSpec, "fad must be in (0, 1]");
}

std::vector<bool> place_meters(int nodes, double fad, std::uint64_t seed) {
  require(nodes >= 1 && fad > 0.0 && fad <= 1.0, ErrorCode::InvalidSpec, "bad meter placement request");
  const int count = std::clamp(static_cast<int>(std::lround(fad * nodes)), 1, nodes);
  std::vector<int> order(static_cast<std::size_t>(nodes));
  std::iota(order.begin(), order.end(), 0);
  auto rng = RngStreams(seed).stream("meter");
  for (int i = nodes - 1; i > 0; --i) {
    const int j = static_cast<int>(std::min<double>(i, std::floor((i + 1) * uniform01(rng))));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<bool> meters(static_cast<std::size_t>(nodes), false);
  for (int i = 0; i < count; ++i) meters[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return meters;
}

BatchDataset sample(const Truth& truth, const SamplingSchedule& schedule, const NoiseSpec& noise) {
  schedule.validate(truth.horizon);
  require(noise.relative_std >= 0.0, ErrorCode::InvalidSpec, "relative_std must be nonnegative");
  const int d = static_cast<int>(schedule.tasks.size());
  const int m = truth.nodes;
  const auto meters = place_meters(m, schedule.fad, schedule.meter_seed);

  // Stamps per task, then the union.
  std::vector<std::vector<int>> stamps(static_cast<std::size_t>(d));
  std::vector<int> all;
  for (int a = 0; a < d; ++a) {
    const auto& task = schedule.tasks[static_cast<std::size_t>(a)];
    for (int start = task.offset; start + task.period <= truth.horizon; start += task.period) {
      stamps[static_cast<std::size_t>(a)].push_back(start + (task.period - 1) / 2);
      all.push_back(start + (task.period - 1) / 2);
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  BatchDataset data = empty_dataset(d, m, std::vector<double>(all.begin(), all.end()));
  auto noise_rng = RngStreams(noise.seed).stream("noise");
  auto mask_rng = RngStreams(schedule.mask_seed).stream("missing");
  for (int a = 0; a < d; ++a) {
    const auto& task = schedule.tasks[static_cast<std::size_t>(a)];
    const Eigen::MatrixXd& series = truth[task.quantity];
    const double rel = task.relative_std.value_or(noise.relative_std);
    for (int stamp : stamps[static_cast<std::size_t>(a)]) {
      const int start = stamp - (task.period - 1) / 2;
      auto& batch = data.observations[static_cast<std::size_t>(
          std::lower_bound(all.begin(), all.end(), stamp) - all.begin())];
      for (int b = 0; b < m; ++b) {
        const double clean = series.row(b).segment(start, task.period).mean();
        const double draw = noise.family == NoiseFamily::gaussian ? standard_normal(noise_rng)
                                                                  : laplace(noise_rng, 1.0);
        const bool kept = uniform01(mask_rng) >= schedule.missing_fraction;
        if (!kept || (task.metered && !meters[static_cast<std::size_t>(b)])) continue;
        const auto slot = static_cast<std::size_t>(a * m + b);
        batch.values(static_cast<Eigen::Index>(slot)) = clean + rel * std::abs(clean) * draw;
        batch.mask[slot] = true;
      }
    }
  }
  return data;
}

double mape(std::span<const double> estimate, std::span<const double> truth) {
  require(estimate.size() == truth.size(), ErrorCode::DimensionMismatch, "mape needs equal lengths");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(truth[i]) < kMapeFloor) continue;
    sum += std::abs(estimate[i] - truth[i]) / std::abs(truth[i]);
    ++count;
  }
  require(count > 0, ErrorCode::AllTargetsNearZero, "every target is below the MAPE floor");
  return 100.0 * sum / static_cast<double>(count);
}

std::vector<Area> partition_areas(const FeederGraph& graph, int area_count, std::uint64_t seed) {
  const int m = graph.node_count();
  if (area_count < 1 || area_count > m) fail(ErrorCode::PartitionInfeasible, "area count must be in [1, M]");
  const Eigen::MatrixXd& adj = graph.adjacency();

  // Breadth-first distances from a seed set.
  auto distances = [&](const std::vector<int>& sources) {
    std::vector<int> dist(static_cast<std::size_t>(m), -1);
    std::queue<int> queue;
    for (int v : sources) {
      dist[static_cast<std::size_t>(v)] = 0;
      queue.push(v);
    }
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop();
      for (int u = 0; u < m; ++u)
        if (adj(v, u) != 0.0 && dist[static_cast<std::size_t>(u)] < 0) {
          dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
          queue.push(u);
        }
    }
    return dist;
  };

  // Round-robin region growing: the smallest area with an unclaimed neighbour claims
  // its lowest-index one. Areas stay connected and cover every reachable node.
  auto grow = [&](const std::vector<int>& seeds) {
    std::vector<int> owner(static_cast<std::size_t>(m), -1);
    std::vector<std::vector<int>> areas(seeds.size());
    for (std::size_t a = 0; a < seeds.size(); ++a) {
      owner[static_cast<std::size_t>(seeds[a])] = static_cast<int>(a);
      areas[a].push_back(seeds[a]);
    }
    for (;;) {
      int pick = -1, claim = -1;
      for (std::size_t a = 0; a < areas.size(); ++a) {
        if (pick >= 0 && areas[a].size() >= areas[static_cast<std::size_t>(pick)].size()) continue;
        int candidate = m;
        for (int v : areas[a])
          for (int u = 0; u < m; ++u)
            if (adj(v, u) != 0.0 && owner[static_cast<std::size_t>(u)] < 0) candidate = std::min(candidate, u);
        if (candidate < m) pick = static_cast<int>(a), claim = candidate;
      }
      if (pick < 0) break;
      owner[static_cast<std::size_t>(claim)] = pick;
      areas[static_cast<std::size_t>(pick)].push_back(claim);
    }
    const bool covered = std::none_of(owner.begin(), owner.end(), [](int o) { return o < 0; });
    return std::make_pair(covered, areas);
  };

  auto spread = [](const std::vector<std::vector<int>>& areas) {
    std::size_t lo = areas.front().size(), hi = lo;
    for (const auto& a : areas) lo = std::min(lo, a.size()), hi = std::max(hi, a.size());
    return hi - lo;
  };

  // First attempt: farthest-point seeds from the most peripheral node; later attempts
  // draw seeds at random. The most balanced covering partition wins.
  auto rng = RngStreams(seed).stream("partition");
  constexpr int kAttempts = 64;
  std::optional<std::vector<std::vector<int>>> best;
  for (int attempt = 0; attempt < kAttempts && !(best && spread(*best) <= 1); ++attempt) {
    std::vector<int> seeds;
    if (attempt == 0) {
      int start = 0, far = -1;
      for (int v = 0; v < m; ++v) {
        const auto d = distances({v});
        const int ecc = *std::max_element(d.begin(), d.end());
        if (ecc > far) far = ecc, start = v;
      }
      seeds.push_back(start);
      while (static_cast<int>(seeds.size()) < area_count) {
        const auto d = distances(seeds);
        seeds.push_back(static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin()));
      }
    } else {
      std::vector<int> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), 0);
      for (int i = m - 1; i > 0; --i) {
        const int j = static_cast<int>(std::min<double>(i, std::floor((i + 1) * uniform01(rng))));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      seeds.assign(order.begin(), order.begin() + area_count);
    }
    auto [covered, areas] = grow(seeds);
    if (covered && (!best || spread(areas) < spread(*best))) best = std::move(areas);
  }
  if (!best) fail(ErrorCode::PartitionInfeasible, "graph is not connected enough to cover every node");

  std::vector<Area> out;
  for (auto& members : *best) {
    std::sort(members.begin(), members.end());
    const auto k = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXd sub(k, k);
    std::vector<std::string> labels;
    for (Eigen::Index i = 0; i < k; ++i) {
      labels.push_back(graph.labels()[static_cast<std::size_t>(members[static_cast<std::size_t>(i)])]);
      for (Eigen::Index j = 0; j < k; ++j)
        sub(i, j) = adj(members[static_cast<std::size_t>(i)], members[static_cast<std::size_t>(j)]);
    }
    out.push_back({build_laplacian(sub, std::move(labels), {.allow_disconnected = false, .allow_weighted = true}),
                   members});
  }
  return out;
}

ImputationResult linear_interpolate(const BatchDataset& data, const std::vector<double>& fine_grid,
                                    EmptySeriesPolicy policy) {
  data.validate();
  require(!fine_grid.empty(), ErrorCode::EmptyQuery, "empty fine grid");
  ImputationResult out;
  out.tasks = data.tasks;
  out.nodes = data.nodes;
  out.query_times = fine_grid;
  const Eigen::Index nq = out.query_count();
  out.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.slots()) * nq);
  out.variance = Eigen::VectorXd::Zero(out.mean.size());

  for (int a = 0; a < data.tasks; ++a) {
    double task_sum = 0.0;
    int task_count = 0;
    std::vector<int> empty_nodes;
    for (int b = 0; b < data.nodes; ++b) {
      const auto slot = static_cast<std::size_t>(a * data.nodes + b);
      std::vector<double> xs, ys;
      for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& batch = data.observations[k];
        if (!batch.mask[slot]) continue;
        xs.push_back(data.times[k]);
        ys.push_back(batch.values(static_cast<Eigen::Index>(slot)));
      }
      task_sum += std::accumulate(ys.begin(), ys.end(), 0.0);
      task_count += static_cast<int>(ys.size());
      if (xs.empty()) {
        empty_nodes.push_back(b);
        continue;
      }
      for (Eigen::Index q = 0; q < nq; ++q) {
        const double t = fine_grid[static_cast<std::size_t>(q)];
        double value;
        if (t <= xs.front()) {
          value = ys.front();
        } else if (t >= xs.back()) {
          value = ys.back();
        } else {
          const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin());
          const double w = (t - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
          value = (1.0 - w) * ys[hi - 1] + w * ys[hi];
        }
        out.mean(out.index(a, b, q)) = value;
      }
    }
    if (empty_nodes.empty()) continue;
    if (policy == EmptySeriesPolicy::error || task_count == 0)
      fail(ErrorCode::EmptySeries, "series (task " + std::to_string(a) + ", node " +
                                       std::to_string(empty_nodes.front()) + ") has no observations");
    for (int b : empty_nodes) out.mean.segment(out.index(a, b, 0), nq).setConstant(task_sum / task_count);
  }
  return out;
}

Eigen::VectorXd truth_on_grid(const Truth& truth, Quantity q, const std::vector<double>& grid) {
  const auto nq = static_cast<Eigen::Index>(grid.size());
  Eigen::VectorXd out(truth.nodes * nq);
  const Eigen::MatrixXd& series = truth[q];
  for (Eigen::Index k = 0; k < nq; ++k) {
    const double t = grid[static_cast<std::size_t>(k)];
    const auto step = static_cast<Eigen::Index>(std::lround(t));
    require(step >= 0 && step < truth.horizon && std::abs(t - static_cast<double>(step)) < 1e-9,
            ErrorCode::DimensionMismatch, "grid time is not a truth step");
    for (int b = 0; b < truth.nodes; ++b) out(b * nq + k) = series(b, step);
  }
  return out;
}

}  // namespace gridrecon
