// Writes a simulated feeder as CLI inputs: measurements.csv, edges.csv, pf_model.json.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "gridrecon/error.hpp"
#include "gridrecon/experiment.hpp"
#include "gridrecon/io.hpp"
#include "gridrecon/rng.hpp"

using namespace gridrecon;

int main(int argc, char** argv) {
  CLI::App app{"Simulated feeder inputs for the gridrecon CLI", "gridrecon_sample"};
  std::string out = "sample";
  std::uint64_t seed = 1;
  int buses = 9, horizon = 120;
  double noise = 0.01, missing = 0.1;
  app.add_option("--out", out, "Output directory");
  app.add_option("--seed", seed, "Root seed");
  app.add_option("--buses", buses, "Buses including the slack bus");
  app.add_option("--horizon", horizon, "Fine-grid steps");
  app.add_option("--noise", noise, "Relative Gaussian noise std");
  app.add_option("--missing", missing, "Missing-entry fraction");
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config;
    config.feeder.buses = buses;
    config.profile.horizon_steps = horizon;
    config.profile.start_minute = 420;
    config.validate();
    const auto setup = prepare_seed(config, seed);
    const RngStreams streams(seed);
    const SamplingSchedule schedule{{{Quantity::p, 15, 0, true, {}}, {Quantity::q, 15, 0, true, {}}, {Quantity::v_mag, 1, 0, true, 0.001}},
                                    missing, 1.0, streams.derive("meter"), streams.derive("missing")};
    BatchDataset data = sample(setup.truth, schedule, {NoiseFamily::gaussian, noise, streams.derive("noise")});
    // P and Q in per unit of the power-flow model.
    for (auto& b : data.observations) b.values.head(2 * data.nodes) /= setup.truth.base_power_kw;

    const OutputStamp stamp{digest_hex("gridrecon_sample buses=" + std::to_string(buses) + " horizon=" + std::to_string(horizon) +
                                       " noise=" + format_number(noise) + " missing=" + format_number(missing)),
                            seed};
    const std::filesystem::path dir(out);
    write_measurements_csv(dir / "measurements.csv", data, stamp);
    std::string edges = stamp.csv_header() + "from,to\n";
    for (const auto& [i, j] : setup.graph.edges()) edges += std::to_string(i) + "," + std::to_string(j) + "\n";
    write_text(dir / "edges.csv", edges);
    write_pf_model_json(dir / "pf_model.json", setup.truth.pf, stamp);
  } catch (const Error& e) {
    std::fprintf(stderr, "gridrecon_sample: %s\n", e.what());
    return 2;
  }
  return 0;
}
