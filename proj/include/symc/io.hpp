#pragma once

// File formats: weighted sets and labeled datasets as CSV (plus a binary
// dataset variant), moment vectors as JSON, and net checkpoints as a JSON
// header with a little-endian float64 companion file.

#include <Eigen/Dense>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "symc/dataset.hpp"
#include "symc/moments.hpp"
#include "symc/nn.hpp"

namespace symc {

using json = nlohmann::json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s, std::size_t line) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  double v = 0.0;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e)
    throw FormatError("line " + std::to_string(line) + ": cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv(line);
    if (t.header.empty()) {
      for (auto& f : fields) t.header.push_back(trim(f));
      continue;
    }
    if (fields.size() != t.header.size())
      throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto& f : fields) row.push_back(parse_double(f, lineno));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw FormatError("empty CSV input");
  return t;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(path, mode);
  if (!f) throw std::runtime_error("cannot open " + path + " for reading");
  return f;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

}  // namespace detail

// ---- WeightedSet CSV: header c,w_1,...,w_m ----

inline void write_weighted_set_csv(std::ostream& out, const WeightedSet& ws) {
  out << "c";
  for (std::size_t i = 1; i <= ws.dim(); ++i) out << ",w_" << i;
  out << '\n';
  for (std::size_t j = 0; j < ws.size(); ++j) {
    out << detail::fmt_double(ws.weight(j));
    for (double v : ws.point(j)) out << ',' << detail::fmt_double(v);
    out << '\n';
  }
}

inline WeightedSet read_weighted_set_csv(std::istream& in) {
  const auto t = detail::read_csv(in);
  if (t.header.size() < 2 || t.header[0] != "c")
    throw FormatError("weighted set CSV must have header c,w_1,...,w_m");
  const std::size_t m = t.header.size() - 1;
  WeightedSet ws(m);
  for (const auto& row : t.rows) ws.push_back(std::span<const double>(row.data() + 1, m), row[0]);
  return ws;
}

inline void save_weighted_set(const std::string& path, const WeightedSet& ws) {
  auto f = detail::open_out(path);
  write_weighted_set_csv(f, ws);
}

inline WeightedSet load_weighted_set(const std::string& path) {
  auto f = detail::open_in(path);
  return read_weighted_set_csv(f);
}

// ---- MomentVector JSON ----

inline json to_json(const MomentVector& mv) {
  return json{{"m", mv.m}, {"k", mv.k}, {"normalized", mv.normalized}, {"values", mv.values}};
}

inline MomentVector moment_vector_from_json(const json& j) {
  MomentVector mv;
  mv.m = j.at("m").get<std::size_t>();
  mv.k = j.at("k").get<std::size_t>();
  mv.normalized = j.at("normalized").get<bool>();
  mv.values = j.at("values").get<std::vector<double>>();
  if (mv.values.size() != n_basis(mv.m, mv.k)) throw FormatError("moment vector length does not match C(m+k, k)");
  return mv;
}

// ---- LabeledDataset CSV: header x_1,...,x_in,y[,c] ----

inline void write_dataset_csv(std::ostream& out, const LabeledDataset& ds, bool with_weights) {
  for (std::size_t a = 1; a <= ds.in_dim(); ++a) out << "x_" << a << ',';
  out << 'y' << (with_weights ? ",c" : "") << '\n';
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
    for (Eigen::Index a = 0; a < ds.x.cols(); ++a) out << detail::fmt_double(ds.x(r, a)) << ',';
    out << detail::fmt_double(ds.y[r]);
    if (with_weights) out << ',' << detail::fmt_double(ds.c[r]);
    out << '\n';
  }
}

inline LabeledDataset read_dataset_csv(std::istream& in) {
  const auto t = detail::read_csv(in);
  const bool weighted = t.header.back() == "c";
  const std::size_t cols = t.header.size();
  if (cols < (weighted ? 3u : 2u) || t.header[cols - (weighted ? 2 : 1)] != "y")
    throw FormatError("dataset CSV must have header x_1,...,x_in,y[,c]");
  const std::size_t in_dim = cols - (weighted ? 2 : 1);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(in_dim));
  Eigen::VectorXd y(static_cast<Eigen::Index>(t.rows.size()));
  Eigen::VectorXd c = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t a = 0; a < in_dim; ++a) x(ri, static_cast<Eigen::Index>(a)) = t.rows[r][a];
    y[ri] = t.rows[r][in_dim];
    if (weighted) c[ri] = t.rows[r][in_dim + 1];
  }
  LabeledDataset ds(std::move(x), std::move(y));
  ds.c = std::move(c);
  return ds;
}

// ---- little-endian float64 blobs ----

namespace detail {

inline void write_f64(std::ostream& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

inline void read_f64(std::istream& in, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("binary file truncated");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    data[i] = std::bit_cast<double>(bits);
  }
}

// Eigen matrices are column-major; the files are row-major.
inline void write_rowmajor(std::ostream& out, const Eigen::MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_f64(out, rm.data(), static_cast<std::size_t>(rm.size()));
}

inline Eigen::MatrixXd read_rowmajor(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  read_f64(in, rm.data(), static_cast<std::size_t>(rm.size()));
  return rm;
}

inline void expect_eof(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("binary file has trailing bytes");
}

}  // namespace detail

/// Binary dataset: <base>.json {rows, in_dim, weighted} and <base>.bin with
/// x (rows x in_dim), y, then c if weighted.
inline void save_dataset_binary(const std::string& base, const LabeledDataset& ds) {
  const bool weighted = ds.weighted();
  auto h = detail::open_out(base + ".json");
  h << json{{"rows", ds.size()}, {"in_dim", ds.in_dim()}, {"weighted", weighted}}.dump(2) << '\n';
  auto b = detail::open_out(base + ".bin", std::ios::binary);
  detail::write_rowmajor(b, ds.x);
  detail::write_f64(b, ds.y.data(), ds.size());
  if (weighted) detail::write_f64(b, ds.c.data(), ds.size());
}

inline LabeledDataset load_dataset_binary(const std::string& base) {
  auto hf = detail::open_in(base + ".json");
  const json h = json::parse(hf);
  const auto rows = h.at("rows").get<Eigen::Index>();
  const auto in_dim = h.at("in_dim").get<Eigen::Index>();
  auto b = detail::open_in(base + ".bin", std::ios::binary);
  Eigen::MatrixXd x = detail::read_rowmajor(b, rows, in_dim);
  Eigen::VectorXd y(rows);
  detail::read_f64(b, y.data(), static_cast<std::size_t>(rows));
  LabeledDataset ds(std::move(x), std::move(y));
  if (h.at("weighted").get<bool>()) detail::read_f64(b, ds.c.data(), static_cast<std::size_t>(rows));
  detail::expect_eof(b);
  return ds;
}

/// Checkpoint: <base>.json {in_dim, width, out_dim, activation} and
/// <base>.bin with W1, b1, W2, c row-major.
inline void save_net(const std::string& base, const TwoLayerNet& net) {
  auto h = detail::open_out(base + ".json");
  h << json{{"in_dim", net.in_dim()},
            {"width", net.width()},
            {"out_dim", net.out_dim()},
            {"activation", to_string(net.activation)}}
           .dump(2)
    << '\n';
  auto b = detail::open_out(base + ".bin", std::ios::binary);
  detail::write_rowmajor(b, net.W1);
  detail::write_f64(b, net.b1.data(), net.width());
  detail::write_rowmajor(b, net.W2);
  detail::write_f64(b, net.c.data(), net.width());
}

inline TwoLayerNet load_net(const std::string& base) {
  auto hf = detail::open_in(base + ".json");
  const json h = json::parse(hf);
  const auto in = h.at("in_dim").get<Eigen::Index>();
  const auto w = h.at("width").get<Eigen::Index>();
  const auto out = h.at("out_dim").get<Eigen::Index>();
  TwoLayerNet net;
  net.activation = activation_from_string(h.at("activation").get<std::string>());
  auto b = detail::open_in(base + ".bin", std::ios::binary);
  net.W1 = detail::read_rowmajor(b, w, in);
  net.b1.resize(w);
  detail::read_f64(b, net.b1.data(), static_cast<std::size_t>(w));
  net.W2 = detail::read_rowmajor(b, out, w);
  net.c.resize(w);
  detail::read_f64(b, net.c.data(), static_cast<std::size_t>(w));
  detail::expect_eof(b);
  return net;
}

}  // namespace symc
