#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace oodlr {

struct Seed {
  std::uint64_t value = 0;
  friend bool operator==(const Seed &, const Seed &) = default;
};

/// Derive an independent child seed from a parent seed and stream ids.
Seed derive_seed(Seed parent, std::uint64_t a, std::uint64_t b = 0);

/// Seeded generator. Engine output is fixed by the standard; the uniform
/// and normal transforms are written here so results do not depend on the
/// standard library's distribution implementations.
class Rng {
public:
  explicit Rng(Seed seed);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double exponential() { return -std::log1p(-uniform()); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct Sample {
  std::vector<double> values;
  std::optional<std::uint32_t> label;
};

/// Row-major collection of equal-length samples.
class Dataset {
public:
  Dataset() = default;
  explicit Dataset(std::size_t dim);
  Dataset(std::size_t dim, std::vector<double> values,
          std::optional<std::vector<std::uint32_t>> labels = std::nullopt);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const { return values_.empty(); }
  bool labeled() const { return labels_.has_value(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::uint32_t label(std::size_t i) const { return (*labels_)[i]; }
  Sample sample(std::size_t i) const;

  std::span<const double> values() const { return values_; }
  const std::optional<std::vector<std::uint32_t>> &labels() const {
    return labels_;
  }

  void push_back(std::span<const double> row);
  void push_back(std::span<const double> row, std::uint32_t label);
  void push_back(const Sample &s);

  /// Number of distinct labels, assuming ids are 0..k-1.
  std::size_t num_classes() const;

  friend bool operator==(const Dataset &, const Dataset &) = default;

private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::optional<std::vector<std::uint32_t>> labels_;
};

struct GaussianSpec {
  std::vector<double> mean;
  std::vector<double> sigma;

  std::size_t dim() const { return mean.size(); }
  void validate() const;
  static GaussianSpec isotropic(std::size_t dim, double mean, double sigma);
};

Dataset gen_gaussian(const GaussianSpec &spec, std::size_t n, Seed seed);

/// Clamped random walks quantized to integer symbols in [0, alphabet-1].
/// The start position is uniform over the alphabet.
Dataset gen_random_walk_sequences(std::size_t n, std::size_t length,
                                  double step_sigma, std::size_t alphabet,
                                  Seed seed);

/// Replace each coordinate with probability mu by a uniform draw from
/// [lo, hi]. Without explicit bounds, each coordinate uses the dataset's
/// own min/max for that coordinate.
Dataset perturb_dataset(const Dataset &ds, double mu, Seed seed);
Dataset perturb_dataset(const Dataset &ds, double mu, double lo, double hi,
                        Seed seed);

Dataset load_csv(const std::filesystem::path &path);
void save_csv(const Dataset &ds, const std::filesystem::path &path);
Dataset parse_csv(const std::string &text);
std::string format_csv(const Dataset &ds);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Write through a temporary file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path &path,
                       const std::string &contents);
std::string read_file(const std::filesystem::path &path);

} // namespace oodlr
