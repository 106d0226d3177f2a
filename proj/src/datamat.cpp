#include "mz/datamat.hpp"

#include "mz/binio.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

namespace mz {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

using binio::ByteReader;
using binio::put_f64;
using binio::put_u16;
using binio::put_u64;

std::string format_double(double v) { return binio::format_g17(v); }

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string join_csv(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += v[i];
  }
  return out;
}

void check_names(const std::vector<std::string>& names, Index m) {
  if (Index(names.size()) != m) fail("observable name count mismatch");
  std::set<std::string> uniq(names.begin(), names.end());
  if (Index(uniq.size()) != m) fail("observable names must be unique");
}

}  // namespace

ObservableDict ObservableDict::monomials(int max_degree, bool include_constant) {
  if (max_degree < 1) fail("monomial dictionary needs max_degree >= 1");
  ObservableDict d;
  d.kind = Kind::Monomials;
  d.max_degree = max_degree;
  d.include_constant = include_constant;
  return d;
}

ObservableDict ObservableDict::raw_components(std::vector<Index> indices) {
  if (indices.empty()) fail("raw-component dictionary needs indices");
  ObservableDict d;
  d.kind = Kind::RawComponents;
  d.indices = std::move(indices);
  return d;
}

ObservableDict ObservableDict::coarse_grid(Index factor, Index offset) {
  if (factor < 1 || offset < 0 || offset >= factor)
    fail("bad coarse-grid factor/offset");
  ObservableDict d;
  d.kind = Kind::CoarseGrid;
  d.factor = factor;
  d.offset = offset;
  return d;
}

Index ObservableDict::out_dim(Index state_dim) const {
  switch (kind) {
    case Kind::Monomials:
      return max_degree + (include_constant ? 1 : 0);
    case Kind::RawComponents:
      return Index(indices.size());
    case Kind::CoarseGrid:
      if (state_dim % factor != 0)
        fail("coarse-grid factor must divide the grid size");
      return state_dim / factor;
  }
  fail("unreachable dictionary kind");
}

std::vector<std::string> ObservableDict::names(Index state_dim) const {
  std::vector<std::string> out;
  switch (kind) {
    case Kind::Monomials: {
      if (include_constant) out.push_back("1");
      for (int d = 1; d <= max_degree; ++d)
        out.push_back(d == 1 ? "phi" : "phi^" + std::to_string(d));
      return out;
    }
    case Kind::RawComponents: {
      for (Index i : indices) out.push_back("phi" + std::to_string(i));
      return out;
    }
    case Kind::CoarseGrid: {
      const Index m = out_dim(state_dim);
      for (Index i = 0; i < m; ++i) out.push_back("u" + std::to_string(i));
      return out;
    }
  }
  fail("unreachable dictionary kind");
}

Vec ObservableDict::apply(const Vec& state) const {
  switch (kind) {
    case Kind::Monomials: {
      Vec out(out_dim(state.size()));
      Index at = 0;
      if (include_constant) out[at++] = 1.0;
      double p = 1.0;
      for (int d = 1; d <= max_degree; ++d) {
        p *= state[0];
        out[at++] = p;
      }
      return out;
    }
    case Kind::RawComponents: {
      Vec out(Index(indices.size()));
      for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= state.size())
          fail("raw-component index out of range");
        out[Index(i)] = state[indices[i]];
      }
      return out;
    }
    case Kind::CoarseGrid:
      return coarse_grain(state, factor, offset);
  }
  fail("unreachable dictionary kind");
}

Vec coarse_grain(const Vec& snapshot, Index factor, Index offset) {
  if (factor < 1 || snapshot.size() % factor != 0)
    fail("coarse-grid factor must divide the grid size");
  if (offset < 0 || offset >= factor) fail("coarse-grid offset out of range");
  const Index m = snapshot.size() / factor;
  Vec out(m);
  for (Index i = 0; i < m; ++i) out[i] = snapshot[factor * i + offset];
  return out;
}

DataMatrix DataMatrix::ensemble(std::vector<Mat> slices, double delta,
                                std::vector<std::string> names) {
  if (slices.size() < 2) fail("need at least 2 time slices");
  const Index n = slices[0].rows(), m = slices[0].cols();
  if (n < 1 || m < 1) fail("empty data matrix");
  for (const auto& s : slices) {
    if (s.rows() != n || s.cols() != m) fail("ragged time slices");
    if (!s.allFinite()) fail("non-finite data matrix entry");
  }
  check_names(names, m);
  DataMatrix d;
  d.provenance_ = Provenance::Ensemble;
  d.delta_ = delta;
  d.names_ = std::move(names);
  d.slices_ = std::move(slices);
  return d;
}

DataMatrix DataMatrix::ergodic(std::vector<Mat> series, Index window_len,
                               double delta, std::vector<std::string> names) {
  if (series.empty()) fail("need at least one base series");
  if (window_len < 2) fail("window length must be >= 2");
  const Index s = series[0].rows(), m = series[0].cols();
  if (s < window_len + 1) fail("series shorter than window length + 1");
  for (const auto& ser : series) {
    if (ser.rows() != s || ser.cols() != m) fail("ragged base series");
    if (!ser.allFinite()) fail("non-finite data matrix entry");
  }
  check_names(names, m);
  DataMatrix d;
  d.provenance_ = Provenance::Ergodic;
  d.delta_ = delta;
  d.names_ = std::move(names);
  d.series_ = std::move(series);
  d.window_len_ = window_len;
  return d;
}

Index DataMatrix::n() const {
  if (provenance_ == Provenance::Ensemble) return slices_[0].rows();
  return n_series() * windows_per_series();
}

Index DataMatrix::m() const {
  return provenance_ == Provenance::Ensemble ? slices_[0].cols()
                                             : series_[0].cols();
}

Index DataMatrix::k() const {
  return provenance_ == Provenance::Ensemble ? Index(slices_.size())
                                             : window_len_;
}

double DataMatrix::value(Index i, Index j, Index k) const {
  if (provenance_ == Provenance::Ensemble) return slices_[k](i, j);
  const Index wps = windows_per_series();
  return series_[i / wps](i % wps + k, j);
}

Mat DataMatrix::slice(Index k) const {
  if (k < 0 || k >= this->k()) fail("time index out of range");
  if (provenance_ == Provenance::Ensemble) return slices_[k];
  const Index wps = windows_per_series();
  Mat out(n(), m());
  Index at = 0;
  for (const auto& ser : series_) {
    out.middleRows(at, wps) = ser.middleRows(k, wps);
    at += wps;
  }
  return out;
}

const std::vector<Mat>& DataMatrix::series() const {
  if (provenance_ != Provenance::Ergodic) fail("not an ergodic matrix");
  return series_;
}

Index DataMatrix::n_series() const {
  return provenance_ == Provenance::Ergodic ? Index(series_.size()) : n();
}

Index DataMatrix::series_len() const {
  if (provenance_ != Provenance::Ergodic) fail("not an ergodic matrix");
  return series_[0].rows();
}

Index DataMatrix::windows_per_series() const {
  if (provenance_ != Provenance::Ergodic) fail("not an ergodic matrix");
  return series_len() - window_len_ + 1;
}

void DataMatrix::attach_full_grid(std::shared_ptr<const Mat> full_series,
                                  Index factor, Index offset) {
  if (provenance_ != Provenance::Ergodic)
    fail("full-grid backing applies to ergodic matrices");
  if (!full_series || full_series->rows() != series_len() ||
      full_series->cols() != m() * factor)
    fail("full-grid series shape mismatch");
  full_series_ = std::move(full_series);
  full_factor_ = factor;
  full_offset_ = offset;
}

void DataMatrix::save(const std::string& path, const Config& extra_meta) const {
  std::string blob = "MZDM";
  put_u16(blob, 1);
  const bool ens = provenance_ == Provenance::Ensemble;
  const Index fn = ens ? n() : n_series();
  const Index fm = m();
  const Index fk = ens ? k() : series_len();
  put_u64(blob, std::uint64_t(fn));
  put_u64(blob, std::uint64_t(fm));
  put_u64(blob, std::uint64_t(fk));
  put_f64(blob, delta_);
  blob.reserve(blob.size() + std::size_t(fn) * std::size_t(fm) *
                                 std::size_t(fk) * 8);
  for (Index i = 0; i < fn; ++i)
    for (Index j = 0; j < fm; ++j)
      for (Index t = 0; t < fk; ++t)
        put_f64(blob, ens ? slices_[t](i, j) : series_[i](t, j));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write '" + path + "'");
  out.write(blob.data(), std::streamsize(blob.size()));
  if (!out) fail("write failed for '" + path + "'");
  out.close();

  Config meta = extra_meta;
  meta.set("matrix.provenance", ens ? "ensemble" : "ergodic");
  meta.set("matrix.delta", format_double(delta_));
  meta.set("matrix.observables", join_csv(names_));
  if (!ens) meta.set("matrix.window_len", std::to_string(window_len_));
  std::ofstream ms(path + ".meta", std::ios::binary | std::ios::trunc);
  if (!ms) fail("cannot write '" + path + ".meta'");
  const std::string canon = meta.canonical();
  ms.write(canon.data(), std::streamsize(canon.size()));
  if (!ms) fail("write failed for '" + path + ".meta'");
}

DataMatrix DataMatrix::load(const std::string& path, Config* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  ByteReader r(std::move(blob));
  if (r.bytes(4) != "MZDM") fail("bad magic in '" + path + "'");
  if (r.u16() != 1) fail("unsupported data file version");
  const Index fn = Index(r.u64());
  const Index fm = Index(r.u64());
  const Index fk = Index(r.u64());
  const double delta = r.f64();
  if (fn < 1 || fm < 1 || fk < 1) fail("bad dimensions in '" + path + "'");

  Config meta = Config::load(path + ".meta");
  if (meta_out) *meta_out = meta;
  const std::string prov = meta.get_str("matrix.provenance");
  std::vector<std::string> names = split_csv(meta.get_str("matrix.observables"));

  if (prov == "ensemble") {
    std::vector<Mat> slices(static_cast<std::size_t>(fk), Mat(fn, fm));
    for (Index i = 0; i < fn; ++i)
      for (Index j = 0; j < fm; ++j)
        for (Index t = 0; t < fk; ++t) slices[std::size_t(t)](i, j) = r.f64();
    if (!r.at_end()) fail("trailing bytes in '" + path + "'");
    return ensemble(std::move(slices), delta, std::move(names));
  }
  if (prov == "ergodic") {
    const Index window = Index(meta.get_int("matrix.window_len"));
    std::vector<Mat> series(static_cast<std::size_t>(fn), Mat(fk, fm));
    for (Index i = 0; i < fn; ++i)
      for (Index j = 0; j < fm; ++j)
        for (Index t = 0; t < fk; ++t) series[std::size_t(i)](t, j) = r.f64();
    if (!r.at_end()) fail("trailing bytes in '" + path + "'");
    return ergodic(std::move(series), window, delta, std::move(names));
  }
  fail("unknown provenance '" + prov + "'");
}

DataMatrix build_data_matrix(const std::vector<std::vector<Vec>>& trajectories,
                             const ObservableDict& dict, double delta) {
  if (trajectories.empty()) fail("no trajectories");
  const std::size_t kk = trajectories[0].size();
  if (kk < 2) fail("trajectories need at least 2 snapshots");
  const Index state_dim = trajectories[0][0].size();
  const Index m = dict.out_dim(state_dim);
  const Index n = Index(trajectories.size());
  std::vector<Mat> slices(kk, Mat(n, m));
  for (Index i = 0; i < n; ++i) {
    const auto& traj = trajectories[std::size_t(i)];
    if (traj.size() != kk) fail("trajectories have mismatched lengths");
    for (std::size_t t = 0; t < kk; ++t) {
      if (traj[t].size() != state_dim) fail("state dimension mismatch");
      slices[t].row(i) = dict.apply(traj[t]).transpose();
    }
  }
  return DataMatrix::ensemble(std::move(slices), delta, dict.names(state_dim));
}

DataMatrix build_data_matrix_ergodic(const std::vector<Vec>& series,
                                     const ObservableDict& dict, double delta,
                                     Index window_len) {
  if (series.empty()) fail("empty series");
  const Index state_dim = series[0].size();
  const Index m = dict.out_dim(state_dim);
  Mat ser(Index(series.size()), m);
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (series[t].size() != state_dim) fail("state dimension mismatch");
    ser.row(Index(t)) = dict.apply(series[t]).transpose();
  }
  std::vector<Mat> list;
  list.push_back(std::move(ser));
  return DataMatrix::ergodic(std::move(list), window_len, delta,
                             dict.names(state_dim));
}

DataMatrix coarsen_ks(const DataMatrix& full, Index factor, Index offset) {
  if (!full.is_ergodic() || full.n_series() != 1)
    fail("coarse graining expects a single-series ergodic matrix");
  const Mat& f = full.series()[0];
  if (f.cols() % factor != 0)
    fail("coarse-grid factor must divide the grid size");
  if (offset < 0 || offset >= factor) fail("coarse-grid offset out of range");
  const Index m = f.cols() / factor;
  Mat coarse(f.rows(), m);
  for (Index i = 0; i < m; ++i) coarse.col(i) = f.col(factor * i + offset);
  std::vector<std::string> names;
  for (Index i = 0; i < m; ++i) names.push_back("u" + std::to_string(i));
  std::vector<Mat> list;
  list.push_back(std::move(coarse));
  DataMatrix d = DataMatrix::ergodic(std::move(list), full.k(), full.delta(),
                                     std::move(names));
  d.attach_full_grid(std::make_shared<Mat>(f), factor, offset);
  return d;
}

DataMatrix augment(const DataMatrix& d, const AugmentationSpec& spec) {
  if (!spec.shift && !spec.reorder) return d;
  if (!d.is_ergodic() || d.n_series() != 1)
    fail("augmentation expects un-augmented single-series ergodic data");
  if (!d.has_full_grid())
    fail("augmentation needs coarse-grid data with full-grid backing");
  const Mat& full = *d.full_grid();
  const Index factor = d.full_factor();
  const Index m = d.m();

  std::vector<Index> offsets;
  if (spec.shift)
    for (Index j = 0; j < factor; ++j) offsets.push_back(j);
  else
    offsets.push_back(d.full_offset());

  // Offsets outer, rotations inner. Rotations permute the coarse channels
  // cyclically and identically at every time index, so windowed dynamics
  // stay valid; rotation by m would reproduce the original sample.
  std::vector<Mat> series_list;
  for (Index j : offsets) {
    Mat coarse(full.rows(), m);
    for (Index i = 0; i < m; ++i) coarse.col(i) = full.col(factor * i + j);
    if (spec.reorder) {
      for (Index r = 0; r < m; ++r) {
        Mat rot(coarse.rows(), m);
        for (Index i = 0; i < m; ++i) rot.col(i) = coarse.col((i + r) % m);
        series_list.push_back(std::move(rot));
      }
    } else {
      series_list.push_back(std::move(coarse));
    }
  }
  return DataMatrix::ergodic(std::move(series_list), d.k(), d.delta(),
                             d.observable_names());
}

DataMatrix delay_embed(const DataMatrix& d, Index e) {
  if (e < 1) fail("embedding depth must be >= 1");
  if (e == 1) return d;
  if (d.k() <= e) fail("embedding depth must be < K");
  const Index m = d.m();
  std::vector<std::string> names;
  for (Index lag = 0; lag < e; ++lag)
    for (const auto& nm : d.observable_names())
      names.push_back(lag == 0 ? nm : nm + "[-" + std::to_string(lag) + "]");

  if (!d.is_ergodic()) {
    const Index kk = d.k() - e + 1;
    std::vector<Mat> slices(static_cast<std::size_t>(kk));
    for (Index t = 0; t < kk; ++t) {
      Mat s(d.n(), m * e);
      for (Index lag = 0; lag < e; ++lag)
        s.middleCols(lag * m, m) = d.slice(t + e - 1 - lag);
      slices[std::size_t(t)] = std::move(s);
    }
    return DataMatrix::ensemble(std::move(slices), d.delta(), std::move(names));
  }

  std::vector<Mat> series;
  for (const auto& ser : d.series()) {
    const Index sp = ser.rows() - e + 1;
    Mat out(sp, m * e);
    for (Index lag = 0; lag < e; ++lag)
      out.middleCols(lag * m, m) = ser.middleRows(e - 1 - lag, sp);
    series.push_back(std::move(out));
  }
  return DataMatrix::ergodic(std::move(series), d.k() - e + 1, d.delta(),
                             std::move(names));
}

}  // namespace mz
