#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridrecon/graph.hpp"
#include "gridrecon/gp_recursive.hpp"
#include "gridrecon/measurements.hpp"
#include "gridrecon/power_flow.hpp"

namespace gridrecon {

inline constexpr int kSchemaVersion = 1;

/// Provenance stamped into every output file.
struct OutputStamp {
  std::string config_digest;
  std::uint64_t seed = 0;

  /// "# gridrecon schema=1 config=<digest> seed=<seed>"
  std::string csv_header() const;
};

/// 16 hex digits of FNV-1a over the bytes.
std::string digest_hex(std::string_view bytes);

/// `from,to` rows after a header line.
std::vector<std::pair<std::string, std::string>> read_edges_csv(const std::filesystem::path& path);
void write_laplacian_csv(const std::filesystem::path& path, const FeederGraph& graph, const OutputStamp& stamp);

/// Long format `time,task,node,value,observed`. Task and node are zero-based indices.
BatchDataset read_measurements_csv(const std::filesystem::path& path);
void write_measurements_csv(const std::filesystem::path& path, const BatchDataset& data, const OutputStamp& stamp);

/// `time,task,node,mean,variance`.
void write_imputation_csv(const std::filesystem::path& path, const ImputationResult& result,
                          const OutputStamp& stamp);
/// `step,time,trace_cov_f`.
void write_trace_log_csv(const std::filesystem::path& path, const std::vector<TracePoint>& log,
                         const OutputStamp& stamp);

/// Named row-major matrices plus dimensions and operating-point offsets.
LinearPFModel read_pf_model_json(const std::filesystem::path& path);
void write_pf_model_json(const std::filesystem::path& path, const LinearPFModel& model, const OutputStamp& stamp);

/// Whole-file write; creates parent directories. Throws IoFailure.
void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

/// Shortest round-trip decimal form, so rewritten files stay byte-identical.
std::string format_number(double value);

}  // namespace gridrecon
