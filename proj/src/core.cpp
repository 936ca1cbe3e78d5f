#include "oodlr/core.hpp"
#include "oodlr/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unistd.h>

namespace oodlr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace

Seed derive_seed(Seed parent, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(parent.value);
  h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ splitmix64(b + 0x85157af5ULL));
  return Seed{h};
}

Rng::Rng(Seed seed) : engine_(splitmix64(seed.value)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0, 1] to avoid log(0).
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0)
    throw InvalidArgument("Rng::below: n must be positive");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::size_t dim) : dim_(dim) {
  if (dim == 0)
    throw InvalidArgument("dataset dimension must be positive");
}

Dataset::Dataset(std::size_t dim, std::vector<double> values,
                 std::optional<std::vector<std::uint32_t>> labels)
    : dim_(dim), values_(std::move(values)), labels_(std::move(labels)) {
  if (dim == 0)
    throw InvalidArgument("dataset dimension must be positive");
  if (values_.size() % dim != 0)
    throw DataError("dataset value count " + std::to_string(values_.size()) +
                    " is not a multiple of dim " + std::to_string(dim));
  for (double v : values_)
    if (!std::isfinite(v))
      throw DataError("dataset contains a non-finite value");
  if (labels_ && labels_->size() != size())
    throw DataError("label count does not match sample count");
}

Sample Dataset::sample(std::size_t i) const {
  Sample s;
  auto r = row(i);
  s.values.assign(r.begin(), r.end());
  if (labels_)
    s.label = (*labels_)[i];
  return s;
}

void Dataset::push_back(std::span<const double> r) {
  if (labels_)
    throw DataError("labeled dataset requires a label for every sample");
  if (r.size() != dim_)
    throw DataError("sample has length " + std::to_string(r.size()) +
                    ", dataset dim is " + std::to_string(dim_));
  for (double v : r)
    if (!std::isfinite(v))
      throw DataError("sample contains a non-finite value");
  values_.insert(values_.end(), r.begin(), r.end());
}

void Dataset::push_back(std::span<const double> r, std::uint32_t label) {
  if (!labels_) {
    if (!values_.empty())
      throw DataError("unlabeled dataset cannot take a labeled sample");
    labels_.emplace();
  }
  if (r.size() != dim_)
    throw DataError("sample has length " + std::to_string(r.size()) +
                    ", dataset dim is " + std::to_string(dim_));
  for (double v : r)
    if (!std::isfinite(v))
      throw DataError("sample contains a non-finite value");
  values_.insert(values_.end(), r.begin(), r.end());
  labels_->push_back(label);
}

void Dataset::push_back(const Sample &s) {
  if (s.label)
    push_back(s.values, *s.label);
  else
    push_back(s.values);
}

std::size_t Dataset::num_classes() const {
  if (!labels_ || labels_->empty())
    return 0;
  return static_cast<std::size_t>(
             *std::max_element(labels_->begin(), labels_->end())) +
         1;
}

// ---------------------------------------------------------------------------
// Generators

void GaussianSpec::validate() const {
  if (mean.empty())
    throw InvalidArgument("gaussian spec: dim must be positive");
  if (sigma.size() != mean.size())
    throw InvalidArgument("gaussian spec: mean and sigma lengths differ");
  for (double s : sigma)
    if (!(s > 0.0) || !std::isfinite(s))
      throw InvalidArgument("gaussian spec: sigma must be positive");
  for (double m : mean)
    if (!std::isfinite(m))
      throw InvalidArgument("gaussian spec: mean must be finite");
}

GaussianSpec GaussianSpec::isotropic(std::size_t dim, double mean,
                                     double sigma) {
  return {std::vector<double>(dim, mean), std::vector<double>(dim, sigma)};
}

Dataset gen_gaussian(const GaussianSpec &spec, std::size_t n, Seed seed) {
  spec.validate();
  if (n == 0)
    throw InvalidArgument("gen_gaussian: n must be at least 1");
  const std::size_t d = spec.dim();
  Rng rng(seed);
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      values[i * d + j] = spec.mean[j] + spec.sigma[j] * rng.normal();
  return Dataset(d, std::move(values));
}

Dataset gen_random_walk_sequences(std::size_t n, std::size_t length,
                                  double step_sigma, std::size_t alphabet,
                                  Seed seed) {
  if (alphabet < 2)
    throw InvalidArgument("random walk: alphabet must be at least 2");
  if (length == 0 || n == 0)
    throw InvalidArgument("random walk: n and length must be positive");
  if (!(step_sigma >= 0.0) || !std::isfinite(step_sigma))
    throw InvalidArgument("random walk: step_sigma must be non-negative");
  const double top = static_cast<double>(alphabet - 1);
  Rng rng(seed);
  std::vector<double> values(n * length);
  for (std::size_t i = 0; i < n; ++i) {
    double pos = static_cast<double>(rng.below(alphabet));
    values[i * length] = pos;
    for (std::size_t t = 1; t < length; ++t) {
      pos = std::clamp(pos + step_sigma * rng.normal(), 0.0, top);
      values[i * length + t] = std::round(pos);
    }
  }
  return Dataset(length, std::move(values));
}

namespace {

Dataset perturb_impl(const Dataset &ds, double mu,
                     const std::vector<double> &lo,
                     const std::vector<double> &hi, Seed seed) {
  if (!(mu > 0.0 && mu <= 1.0))
    throw InvalidArgument("perturb_dataset: mu must be in (0, 1]");
  const std::size_t d = ds.dim();
  std::vector<double> values(ds.values().begin(), ds.values().end());
  Rng rng(seed);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t j = i % d;
    // Both draws are always consumed so the stream does not depend on mu.
    const double gate = rng.uniform();
    const double u = rng.uniform(lo[j], hi[j]);
    if (gate < mu)
      values[i] = u;
  }
  return Dataset(d, std::move(values), ds.labels());
}

} // namespace

Dataset perturb_dataset(const Dataset &ds, double mu, Seed seed) {
  if (ds.empty())
    throw InvalidArgument("perturb_dataset: empty dataset");
  const std::size_t d = ds.dim();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], r[j]);
      hi[j] = std::max(hi[j], r[j]);
    }
  }
  return perturb_impl(ds, mu, lo, hi, seed);
}

Dataset perturb_dataset(const Dataset &ds, double mu, double lo, double hi,
                        Seed seed) {
  if (!(lo < hi))
    throw InvalidArgument("perturb_dataset: lo must be below hi");
  return perturb_impl(ds, mu, std::vector<double>(ds.dim(), lo),
                      std::vector<double>(ds.dim(), hi), seed);
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r')
    s.remove_suffix(1);
  return s;
}

} // namespace

Dataset parse_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim_cr(line).empty())
    throw DataError("csv: missing header");
  auto header = split_commas(trim_cr(line));
  bool has_label = header.back() == "label";
  const std::size_t dim = header.size() - (has_label ? 1 : 0);
  if (dim == 0)
    throw DataError("csv: header declares no feature columns");
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j] != "f" + std::to_string(j))
      throw DataError("csv: header column " + std::to_string(j) +
                      " should be f" + std::to_string(j) + ", got '" +
                      std::string(header[j]) + "'");

  std::vector<double> values;
  std::optional<std::vector<std::uint32_t>> labels;
  if (has_label)
    labels.emplace();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    auto l = trim_cr(line);
    if (l.empty())
      continue;
    auto cells = split_commas(l);
    if (cells.size() != header.size())
      throw DataError("csv: row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      auto c = cells[j];
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || p != c.data() + c.size() || !std::isfinite(v))
        throw DataError("csv: row " + std::to_string(row) + " column " +
                        std::to_string(j) + " is not a finite number: '" +
                        std::string(c) + "'");
      values.push_back(v);
    }
    if (has_label) {
      auto c = cells.back();
      std::uint32_t lab = 0;
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), lab);
      if (ec != std::errc() || p != c.data() + c.size())
        throw DataError("csv: row " + std::to_string(row) +
                        " label is not a non-negative integer: '" +
                        std::string(c) + "'");
      labels->push_back(lab);
    }
    ++row;
  }
  return Dataset(dim, std::move(values), std::move(labels));
}

std::string format_csv(const Dataset &ds) {
  std::string out;
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    if (j)
      out += ',';
    out += 'f' + std::to_string(j);
  }
  if (ds.labeled())
    out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto r = ds.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j)
        out += ',';
      out += format_double(r[j]);
    }
    if (ds.labeled())
      out += ',' + std::to_string(ds.label(i));
    out += '\n';
  }
  return out;
}

Dataset load_csv(const std::filesystem::path &path) {
  return parse_csv(read_file(path));
}

void save_csv(const Dataset &ds, const std::filesystem::path &path) {
  write_file_atomic(path, format_csv(ds));
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path &path,
                       const std::string &contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out)
      throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto '" + path.string() + "': " +
                  ec.message());
  }
}

} // namespace oodlr
