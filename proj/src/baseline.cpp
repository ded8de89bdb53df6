#include "chirplink/baseline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include "chirplink/channel.hpp"
#include "chirplink/errors.hpp"
#include "chirplink/rng.hpp"

namespace chirplink {
namespace {

constexpr double kRidge = 1e-8;

void check_products(const std::vector<std::pair<int, int>>& products) {
  std::set<std::pair<int, int>> seen;
  for (const auto& p : products) {
    if (p.first < 0 || p.second < p.first)
      throw ConfigError("product lags must satisfy 0 <= i <= j");
    if (!seen.insert(p).second)
      throw ConfigError("duplicate product lag pair (" +
                        std::to_string(p.first) + ", " +
                        std::to_string(p.second) + ")");
  }
}

int max_lag(int n_linear, const std::vector<std::pair<int, int>>& products) {
  int m = n_linear - 1;
  for (const auto& p : products) m = std::max(m, p.second);
  return m;
}

// Feature vector for output index n: linear lags then products.
void fill_features(const std::vector<double>& rx, int n, int shift,
                   int n_linear,
                   const std::vector<std::pair<int, int>>& products,
                   std::vector<double>* feat) {
  std::size_t f = 0;
  for (int i = 0; i < n_linear; ++i)
    (*feat)[f++] = rx[static_cast<std::size_t>(n + shift - i)];
  for (const auto& p : products)
    (*feat)[f++] = rx[static_cast<std::size_t>(n + shift - p.first)] *
                   rx[static_cast<std::size_t>(n + shift - p.second)];
}

// Solves (G + ridge I) w = b in place by Cholesky.
std::vector<double> solve_ridge(std::vector<double>& gram,
                                std::vector<double>& rhs, int m) {
  for (int i = 0; i < m; ++i) gram[static_cast<std::size_t>(i * m + i)] += kRidge;
  // Lower-triangular factor overwrites the Gram matrix.
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = gram[static_cast<std::size_t>(i * m + j)];
      for (int k = 0; k < j; ++k)
        s -= gram[static_cast<std::size_t>(i * m + k)] *
             gram[static_cast<std::size_t>(j * m + k)];
      if (i == j) {
        if (!(s > 0.0))
          throw SingularMatrix("normal equations not positive definite");
        gram[static_cast<std::size_t>(i * m + i)] = std::sqrt(s);
      } else {
        gram[static_cast<std::size_t>(i * m + j)] =
            s / gram[static_cast<std::size_t>(j * m + j)];
      }
    }
  }
  std::vector<double> y(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double s = rhs[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k)
      s -= gram[static_cast<std::size_t>(i * m + k)] * y[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = s / gram[static_cast<std::size_t>(i * m + i)];
  }
  std::vector<double> w(static_cast<std::size_t>(m));
  for (int i = m - 1; i >= 0; --i) {
    double s = y[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < m; ++k)
      s -= gram[static_cast<std::size_t>(k * m + i)] * w[static_cast<std::size_t>(k)];
    w[static_cast<std::size_t>(i)] = s / gram[static_cast<std::size_t>(i * m + i)];
  }
  return w;
}

struct RowRange {
  int lo, hi;
};

RowRange valid_rows(int len, int shift, int lag) {
  RowRange r;
  r.lo = std::max(0, lag - shift);
  r.hi = std::min(len, len - shift);
  if (r.lo >= r.hi)
    throw LengthMismatch("no fully covered rows for the requested lags");
  return r;
}

}  // namespace

std::vector<std::pair<int, int>> diagonal_products(int n) {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(std::max(0, n)));
  for (int i = 0; i < n; ++i) out.emplace_back(i, i);
  return out;
}

int align_delay(const std::vector<double>& rx, const std::vector<double>& ref,
                int window) {
  if (rx.size() != ref.size() || rx.empty())
    throw LengthMismatch("align_delay needs equal nonempty sequences");
  const int len = static_cast<int>(rx.size());
  if (window >= len) throw LengthMismatch("alignment window exceeds input");
  int best_d = 0;
  double best = -1e300;
  for (int d = -window; d <= window; ++d) {
    const int lo = std::max(0, -d);
    const int hi = std::min(len, len - d);
    double acc = 0.0;
    for (int n = lo; n < hi; ++n)
      acc += rx[static_cast<std::size_t>(n + d)] * ref[static_cast<std::size_t>(n)];
    acc /= static_cast<double>(hi - lo);
    if (acc > best) {
      best = acc;
      best_d = d;
    }
  }
  return best_d;
}

VolterraKernel fit_vnle_ls(const std::vector<double>& rx,
                           const std::vector<double>& tx_ref, int n_linear,
                           const std::vector<std::pair<int, int>>& products,
                           int shift) {
  if (rx.size() != tx_ref.size() || rx.empty())
    throw LengthMismatch("fit needs equal nonempty rx and reference");
  if (n_linear < 1) throw ConfigError("need at least one linear tap");
  check_products(products);
  const int m = n_linear + static_cast<int>(products.size());
  const int lag = max_lag(n_linear, products);
  const RowRange rows = valid_rows(static_cast<int>(rx.size()), shift, lag);

  std::vector<double> gram(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
  std::vector<double> feat(static_cast<std::size_t>(m));
  for (int n = rows.lo; n < rows.hi; ++n) {
    fill_features(rx, n, shift, n_linear, products, &feat);
    const double y = tx_ref[static_cast<std::size_t>(n)];
    for (int i = 0; i < m; ++i) {
      rhs[static_cast<std::size_t>(i)] += feat[static_cast<std::size_t>(i)] * y;
      for (int j = 0; j <= i; ++j)
        gram[static_cast<std::size_t>(i * m + j)] +=
            feat[static_cast<std::size_t>(i)] * feat[static_cast<std::size_t>(j)];
    }
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      gram[static_cast<std::size_t>(i * m + j)] =
          gram[static_cast<std::size_t>(j * m + i)];

  const std::vector<double> w = solve_ridge(gram, rhs, m);
  VolterraKernel k;
  k.linear_taps.assign(w.begin(), w.begin() + n_linear);
  k.nonlinear_taps.assign(w.begin() + n_linear, w.end());
  k.products = products;
  return k;
}

std::vector<double> fit_fir_ls(const std::vector<double>& rx,
                               const std::vector<double>& tx_ref, int n_taps,
                               int shift) {
  return fit_vnle_ls(rx, tx_ref, n_taps, {}, shift).linear_taps;
}

std::vector<double> apply_volterra(const std::vector<double>& rx,
                                   const VolterraKernel& kernel, int shift) {
  check_products(kernel.products);
  if (kernel.nonlinear_taps.size() != kernel.products.size())
    throw LengthMismatch("nonlinear taps and product set disagree");
  const int len = static_cast<int>(rx.size());
  const int n_linear = static_cast<int>(kernel.linear_taps.size());
  auto at = [&](int idx) {
    return idx >= 0 && idx < len ? rx[static_cast<std::size_t>(idx)] : 0.0;
  };
  std::vector<double> y(rx.size(), 0.0);
  for (int n = 0; n < len; ++n) {
    double acc = 0.0;
    for (int i = 0; i < n_linear; ++i)
      acc += kernel.linear_taps[static_cast<std::size_t>(i)] * at(n + shift - i);
    for (std::size_t p = 0; p < kernel.products.size(); ++p)
      acc += kernel.nonlinear_taps[p] *
             at(n + shift - kernel.products[p].first) *
             at(n + shift - kernel.products[p].second);
    y[static_cast<std::size_t>(n)] = acc;
  }
  return y;
}

std::array<double, kAlphabet> estimate_levels(
    const std::vector<double>& eq_out, const std::vector<int>& tx_symbols) {
  if (eq_out.size() != 2 * tx_symbols.size() || tx_symbols.empty())
    throw LengthMismatch("estimate_levels needs a 2-SpS stream");
  std::array<double, kAlphabet> sum{};
  std::array<long, kAlphabet> count{};
  for (std::size_t k = 0; k < tx_symbols.size(); ++k) {
    const auto cls = static_cast<std::size_t>(tx_symbols[k]);
    sum[cls] += 0.5 * (eq_out[2 * k] + eq_out[2 * k + 1]);
    ++count[cls];
  }
  std::array<double, kAlphabet> levels{};
  for (int c = 0; c < kAlphabet; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0)
      throw EmptyClass("class " + std::to_string(c) +
                       " missing from the training segment");
    levels[static_cast<std::size_t>(c)] =
        sum[static_cast<std::size_t>(c)] /
        static_cast<double>(count[static_cast<std::size_t>(c)]);
  }
  return levels;
}

std::vector<int> ml_detect(const std::vector<double>& eq_out,
                           const std::array<double, kAlphabet>& levels) {
  if (eq_out.size() % 2 != 0)
    throw LengthMismatch("ml_detect needs a 2-SpS stream");
  std::vector<int> decisions(eq_out.size() / 2);
  for (std::size_t k = 0; k < decisions.size(); ++k) {
    const double v = 0.5 * (eq_out[2 * k] + eq_out[2 * k + 1]);
    int best = 0;
    double best_d = std::abs(v - levels[0]);
    for (int c = 1; c < kAlphabet; ++c) {
      const double d = std::abs(v - levels[static_cast<std::size_t>(c)]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    decisions[k] = best;
  }
  return decisions;
}

std::vector<ResultRow> run_benchmark_sweep(const LinkConfig& link,
                                           const std::string& scheme,
                                           int jobs) {
  if (scheme != "fir" && scheme != "vnle")
    throw ConfigError("unknown benchmark scheme: " + scheme);
  const NoiseCalibration cal = calibrate_noise(link);
  const int trim = chain_trim_symbols(link);
  const int n_linear = scheme == "fir" ? link.taps.fir : link.taps.vnle_linear;
  const auto products = scheme == "vnle"
                            ? diagonal_products(link.taps.vnle_squares)
                            : std::vector<std::pair<int, int>>{};
  const int center = (n_linear - 1) / 2;
  const int lag = max_lag(n_linear, products);

  const int n_points = static_cast<int>(link.baseline.ipp_sweep_ma.size());
  auto run_point = [&](std::size_t point) {
    const double ipp = link.baseline.ipp_sweep_ma[point];
    const double ibias = link.baseline.ibias_ma;

    auto run_segment = [&](const char* tag, long n_symbols,
                           std::uint64_t stream) {
      RngStream rng(link.seed, tag, point);
      const auto symbols = rng.symbols(static_cast<std::size_t>(n_symbols));
      const SampledWaveform x2 =
          rect_pam_waveform(symbols, link.symbol_rate_hz(), 2);
      OracleChainResult chain =
          oracle_chain(link, x2, ipp, ibias, cal, stream);
      // Drop the transient and fiber-edge symbols from both views.
      std::vector<int> sym(symbols.begin() + trim, symbols.end() - trim);
      std::vector<double> rx(
          chain.rx.samples.begin() + 2 * static_cast<std::ptrdiff_t>(trim),
          chain.rx.samples.end() - 2 * static_cast<std::ptrdiff_t>(trim));
      return std::tuple(std::move(sym), std::move(rx), chain.prf_dbm);
    };

    const auto [train_sym, train_rx, train_prf] = run_segment(
        "baseline-train", link.baseline.train_symbols, 2 * point);
    const auto [test_sym, test_rx, test_prf] = run_segment(
        "baseline-test", link.baseline.test_symbols, 2 * point + 1);
    (void)train_prf;

    const SampledWaveform train_ref =
        rect_pam_waveform(train_sym, link.symbol_rate_hz(), 2);
    const int d =
        align_delay(train_rx, train_ref.samples, link.baseline.align_window);
    const int shift = d + center;

    const VolterraKernel kernel =
        fit_vnle_ls(train_rx, train_ref.samples, n_linear, products, shift);

    // Guard the equalizer's own edge reach when scoring.
    const int guard = (lag + std::abs(shift)) / 2 + 2;
    auto score = [&](const std::vector<double>& rx,
                     const std::vector<int>& sym) {
      const std::vector<double> eq = apply_volterra(rx, kernel, shift);
      std::vector<double> eq_in(
          eq.begin() + 2 * static_cast<std::ptrdiff_t>(guard),
          eq.end() - 2 * static_cast<std::ptrdiff_t>(guard));
      std::vector<int> sym_in(sym.begin() + guard, sym.end() - guard);
      return std::pair(std::move(eq_in), std::move(sym_in));
    };

    const auto [train_eq, train_in] = score(train_rx, train_sym);
    const auto levels = estimate_levels(train_eq, train_in);
    const auto [test_eq, test_in] = score(test_rx, test_sym);
    const std::vector<int> decisions = ml_detect(test_eq, levels);

    ResultRow row;
    row.scheme = scheme;
    row.symbol_rate_gbd = link.symbol_rate_gbd;
    row.ipp_ma = ipp;
    row.ibias_ma = ibias;
    row.prf_dbm = test_prf;
    row.ser = ser(test_in, decisions);
    row.mi_bits = mi_from_confusion(test_in, decisions);
    row.n_symbols = static_cast<long>(test_in.size());
    row.seed = link.seed;
    row.validate();
    return row;
  };

  std::vector<ResultRow> rows(static_cast<std::size_t>(n_points));
  const int workers = std::clamp(jobs, 1, std::max(1, n_points));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_points) return;
      try {
        rows[static_cast<std::size_t>(i)] = run_point(static_cast<std::size_t>(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace chirplink
