#include "gridrecon/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gridrecon/error.hpp"

namespace gridrecon {

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::ParseError, where + ": not a number '" + text + "'");
  return v;
}

long parse_int(const std::string& text, const std::string& where) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::ParseError, where + ": not an integer '" + text + "'");
  return v;
}

/// Data lines of a CSV without comments, blank lines or the header.
std::vector<std::pair<int, std::vector<std::string>>> csv_rows(const std::filesystem::path& path,
                                                               const std::vector<std::string>& header) {
  std::istringstream in(read_text(path));
  std::string line;
  bool header_seen = false;
  int number = 0;
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (!header_seen) {
      if (cells != header)
        fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(number) + ": expected header '" +
                                        [&] {
                                          std::string h;
                                          for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
                                          return h;
                                        }() + "'");
      header_seen = true;
      continue;
    }
    if (cells.size() != header.size())
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(number) + ": expected " +
                                      std::to_string(header.size()) + " fields");
    rows.emplace_back(number, std::move(cells));
  }
  if (!header_seen) fail(ErrorCode::ParseError, path.string() + ": missing header");
  return rows;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    fail(ErrorCode::DimensionMismatch, std::string("pf model: matrix '") + name + "' has the wrong row count");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(ErrorCode::DimensionMismatch, std::string("pf model: matrix '") + name + "' has the wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string OutputStamp::csv_header() const {
  return "# gridrecon schema=" + std::to_string(kSchemaVersion) + " config=" + config_digest +
         " seed=" + std::to_string(seed) + "\n";
}

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_number(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::IoFailure, "write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::pair<std::string, std::string>> read_edges_csv(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> edges;
  for (auto& [line, cells] : csv_rows(path, {"from", "to"})) edges.emplace_back(cells[0], cells[1]);
  return edges;
}

void write_laplacian_csv(const std::filesystem::path& path, const FeederGraph& graph, const OutputStamp& stamp) {
  std::string out = stamp.csv_header() + "node";
  for (const auto& l : graph.labels()) out += "," + l;
  out += "\n";
  for (int i = 0; i < graph.node_count(); ++i) {
    out += graph.labels()[static_cast<std::size_t>(i)];
    for (int j = 0; j < graph.node_count(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", graph.laplacian()(i, j));
      out += ",";
      out += buf;
    }
    out += "\n";
  }
  write_text(path, out);
}

BatchDataset read_measurements_csv(const std::filesystem::path& path) {
  struct Row {
    double time;
    long task, node;
    double value;
    bool observed;
  };
  std::vector<Row> rows;
  long tasks = 0, nodes = 0;
  for (auto& [line, c] : csv_rows(path, {"time", "task", "node", "value", "observed"})) {
    const std::string where = path.string() + ":" + std::to_string(line);
    Row r{parse_double(c[0], where), parse_int(c[1], where), parse_int(c[2], where), parse_double(c[3], where),
          parse_int(c[4], where) != 0};
    if (r.task < 0 || r.node < 0) fail(ErrorCode::ParseError, where + ": negative task or node index");
    tasks = std::max(tasks, r.task + 1);
    nodes = std::max(nodes, r.node + 1);
    rows.push_back(r);
  }
  require(!rows.empty(), ErrorCode::EmptyObservations, path.string() + ": no measurement rows");
  std::map<double, std::size_t> index;
  for (const auto& r : rows) index.emplace(r.time, 0);
  std::vector<double> times;
  for (auto& [t, i] : index) {
    i = times.size();
    times.push_back(t);
  }
  BatchDataset data = empty_dataset(static_cast<int>(tasks), static_cast<int>(nodes), times);
  for (const auto& r : rows) {
    auto& batch = data.observations[index[r.time]];
    const auto slot = static_cast<std::size_t>(r.task * nodes + r.node);
    batch.values(static_cast<Eigen::Index>(slot)) = r.observed ? r.value : 0.0;
    batch.mask[slot] = r.observed;
  }
  data.validate();
  return data;
}

void write_measurements_csv(const std::filesystem::path& path, const BatchDataset& data, const OutputStamp& stamp) {
  std::string out = stamp.csv_header() + "time,task,node,value,observed\n";
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& batch = data.observations[k];
    for (int a = 0; a < data.tasks; ++a)
      for (int b = 0; b < data.nodes; ++b) {
        const auto slot = static_cast<std::size_t>(a * data.nodes + b);
        out += format_number(data.times[k]) + "," + std::to_string(a) + "," + std::to_string(b) + "," +
               format_number(batch.mask[slot] ? batch.values(static_cast<Eigen::Index>(slot)) : 0.0) + "," +
               (batch.mask[slot] ? "1" : "0") + "\n";
      }
  }
  write_text(path, out);
}

void write_imputation_csv(const std::filesystem::path& path, const ImputationResult& result,
                          const OutputStamp& stamp) {
  std::string out = stamp.csv_header() + "time,task,node,mean,variance\n";
  const bool has_var = result.variance.size() == result.mean.size();
  for (Eigen::Index q = 0; q < result.query_count(); ++q)
    for (int a = 0; a < result.tasks; ++a)
      for (int b = 0; b < result.nodes; ++b) {
        const Eigen::Index i = result.index(a, b, q);
        out += format_number(result.query_times[static_cast<std::size_t>(q)]) + "," + std::to_string(a) + "," +
               std::to_string(b) + "," + format_number(result.mean(i)) + "," +
               (has_var ? format_number(result.variance(i)) : std::string()) + "\n";
      }
  write_text(path, out);
}

void write_trace_log_csv(const std::filesystem::path& path, const std::vector<TracePoint>& log,
                         const OutputStamp& stamp) {
  std::string out = stamp.csv_header() + "step,time,trace_cov_f\n";
  for (const auto& p : log)
    out += std::to_string(p.step) + "," + format_number(p.time) + "," + format_number(p.trace) + "\n";
  write_text(path, out);
}

LinearPFModel read_pf_model_json(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  try {
    const auto m = j.at("phases").get<Eigen::Index>();
    LinearPFModel pf;
    pf.m_matrix.resize(m, 2 * m);
    pf.m_matrix.real() = json_matrix(j.at("m_real"), m, 2 * m, "m_real");
    pf.m_matrix.imag() = json_matrix(j.at("m_imag"), m, 2 * m, "m_imag");
    pf.k_matrix = json_matrix(j.at("k"), m, 2 * m, "k");
    const Eigen::MatrixXd v0 = json_matrix(j.at("v0"), m, 2, "v0");
    pf.v0 = v0.col(0) + std::complex<double>(0.0, 1.0) * v0.col(1);
    pf.magnitude_offset = json_matrix(j.at("magnitude_offset"), m, 1, "magnitude_offset").col(0);
    pf.validate();
    return pf;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_pf_model_json(const std::filesystem::path& path, const LinearPFModel& model, const OutputStamp& stamp) {
  model.validate();
  nlohmann::ordered_json j;
  j["schema"] = kSchemaVersion;
  j["config_digest"] = stamp.config_digest;
  j["seed"] = stamp.seed;
  j["phases"] = model.phases();
  j["m_real"] = matrix_json(model.m_matrix.real());
  j["m_imag"] = matrix_json(model.m_matrix.imag());
  j["k"] = matrix_json(model.k_matrix);
  Eigen::MatrixXd v0(model.phases(), 2);
  v0 << model.v0.real(), model.v0.imag();
  j["v0"] = matrix_json(v0);
  j["magnitude_offset"] = matrix_json(model.magnitude_offset);
  write_text(path, j.dump(2) + "\n");
}

}  // namespace gridrecon
