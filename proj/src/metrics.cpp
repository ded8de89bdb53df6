#include "chirplink/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "chirplink/errors.hpp"

namespace chirplink {
namespace {

constexpr const char* kCsvHeader =
    "scheme,symbol_rate_gbd,ipp_ma,ibias_ma,prf_dbm,ser,mi_bits,n_symbols,"
    "seed";

double log2_safe(double p) { return std::log2(std::max(p, 1e-300)); }

}  // namespace

void ResultRow::validate() const {
  if (scheme.empty()) throw Error("result row without a scheme id");
  if (!(ser >= 0.0 && ser <= 1.0))
    throw Error("result row ser out of [0, 1]: " + std::to_string(ser));
  const double cap = std::log2(double(kAlphabet));
  if (!(mi_bits >= 0.0 && mi_bits <= cap))
    throw Error("result row mi out of [0, 2]: " + std::to_string(mi_bits));
  if (n_symbols < 1) throw Error("result row without symbols");
}

double ser(const std::vector<int>& tx, const std::vector<int>& rx) {
  if (tx.size() != rx.size() || tx.empty())
    throw LengthMismatch("ser needs two equal nonempty sequences");
  std::size_t bad = 0;
  for (std::size_t k = 0; k < tx.size(); ++k) bad += tx[k] != rx[k];
  return double(bad) / double(tx.size());
}

double mi_from_probs(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rows != static_cast<int>(labels.size()) || probs.rows == 0)
    throw LengthMismatch("mi_from_probs needs one row per label");
  double ce = 0.0;
  for (int r = 0; r < probs.rows; ++r)
    ce -= log2_safe(probs.at(r, labels[static_cast<std::size_t>(r)]));
  ce /= double(probs.rows);
  return std::max(0.0, std::log2(double(probs.cols)) - ce);
}

double mi_from_confusion(const std::vector<int>& tx,
                         const std::vector<int>& rx) {
  if (tx.size() != rx.size() || tx.empty())
    throw LengthMismatch("mi_from_confusion needs equal nonempty sequences");
  std::array<std::array<double, kAlphabet>, kAlphabet> joint{};
  for (std::size_t k = 0; k < tx.size(); ++k)
    joint[static_cast<std::size_t>(tx[k])]
         [static_cast<std::size_t>(rx[k])] += 1.0;
  const double n = double(tx.size());
  std::array<double, kAlphabet> px{}, py{};
  for (int i = 0; i < kAlphabet; ++i)
    for (int j = 0; j < kAlphabet; ++j) {
      joint[i][j] /= n;
      px[static_cast<std::size_t>(i)] += joint[i][j];
      py[static_cast<std::size_t>(j)] += joint[i][j];
    }
  for (int i = 0; i < kAlphabet; ++i)
    if (px[static_cast<std::size_t>(i)] == 0.0)
      throw EmptyClass("transmit class " + std::to_string(i) +
                       " never occurs");
  double mi = 0.0;
  for (int i = 0; i < kAlphabet; ++i)
    for (int j = 0; j < kAlphabet; ++j) {
      const double p = joint[i][j];
      if (p > 0.0)
        mi += p * std::log2(p / (px[static_cast<std::size_t>(i)] *
                                 py[static_cast<std::size_t>(j)]));
    }
  return std::max(0.0, mi);
}

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows) {
  for (const auto& r : rows) r.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write results csv: " + path);
  out << kCsvHeader << "\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%ld,%llu",
                  r.scheme.c_str(), r.symbol_rate_gbd, r.ipp_ma, r.ibias_ma,
                  r.prf_dbm, r.ser, r.mi_bits, r.n_symbols,
                  static_cast<unsigned long long>(r.seed));
    out << buf << "\n";
  }
  if (!out) throw Error("short write to results csv: " + path);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("missing results csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw Error("results csv " + path + " has an unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ResultRow r;
    std::string field;
    auto next = [&] {
      if (!std::getline(ls, field, ','))
        throw Error("short row in results csv: " + path);
      return field;
    };
    r.scheme = next();
    r.symbol_rate_gbd = std::stod(next());
    r.ipp_ma = std::stod(next());
    r.ibias_ma = std::stod(next());
    r.prf_dbm = std::stod(next());
    r.ser = std::stod(next());
    r.mi_bits = std::stod(next());
    r.n_symbols = std::stol(next());
    r.seed = std::stoull(next());
    r.validate();
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace chirplink
