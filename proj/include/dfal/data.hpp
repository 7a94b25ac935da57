#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dfal/nn.hpp"
#include "dfal/parallel.hpp"
#include "dfal/tensor.hpp"

namespace dfal {

/// Labeled inputs of one fixed shape. Labels are the simulated oracle's
/// ground truth.
struct Dataset {
  std::string name;
  Shape input_shape;
  std::size_t class_count = 0;
  std::vector<Tensor> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return inputs.size(); }
  /// Throws InvalidInput unless sizes agree, shapes are uniform, labels are
  /// in range and every class occurs.
  void validate() const;
  std::vector<std::size_t> class_counts() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::reference_wrapper<const Tensor>> refs() const;
};

// IDX (big-endian). Images: magic 0x00000803, dims [n, rows, cols], u8
// pixels scaled by 1/255 and shaped [1, rows, cols]. Labels: magic
// 0x00000801, dims [n], u8 class ids.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t class_count = 10);
/// Writes pixels rounded to the nearest 1/255 step.
void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels);

// CSV rows: label,v1,...,vd with constant d; optional header row, detected
// by a non-numeric first token.
Dataset load_csv(const std::filesystem::path& path, std::size_t class_count);
void write_csv(const Dataset& data, const std::filesystem::path& path);

struct SyntheticSpec {
  std::size_t class_count = 4;
  std::size_t points_per_class = 250;
  std::size_t dimension = 2;
  /// Centers sit on a circle of this radius in the first two coordinates.
  double center_radius = 2.0;
  /// Standard deviation of the isotropic gaussian around each center.
  double scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class c centered at angle 2*pi*c/class_count; points ordered class by class.
Dataset gen_blobs(const SyntheticSpec& spec);

/// Stratified split: roughly test_fraction of every class goes to the test
/// set, then the remaining pool is subsampled to pool_cap items with
/// per-class counts as even as availability allows. A pool_cap of 0 keeps
/// the whole pool.
std::pair<Dataset, Dataset> split_and_subsample(const Dataset& data, double test_fraction,
                                                std::size_t pool_cap, std::uint64_t seed);
/// Same with an explicit test set: only the pool is subsampled.
std::pair<Dataset, Dataset> split_and_subsample(const Dataset& train, const Dataset& test,
                                                std::size_t pool_cap, std::uint64_t seed);

/// Stratified sample of `count` positions of `labels` (per-class counts
/// differ by at most one when every class has enough members).
std::vector<std::size_t> stratified_sample(std::span<const std::size_t> labels,
                                           std::size_t class_count, std::size_t count,
                                           std::uint64_t seed);

struct MarginOracleConfig {
  double radius_max = 10.0;
  std::size_t radial_steps = 64;
  /// Directions probed: evenly spaced angles in 2-D, a Fibonacci sphere in
  /// 3-D, both signs in 1-D.
  std::size_t directions = 360;
  std::size_t bisection_steps = 30;
};

/// Brute-force distance from x to the nearest point predicted differently:
/// dense direction x radius sweep, then bisection on every direction whose
/// sweep flipped. Returns +inf when nothing flips within radius_max.
/// Input dimension must be at most 3.
double margin_oracle(const Network& net, const Tensor& x, const MarginOracleConfig& cfg = {});

std::vector<double> batch_margin_oracle(const Network& net,
                                        std::span<const std::reference_wrapper<const Tensor>> xs,
                                        const MarginOracleConfig& cfg = {},
                                        Execution exec = Execution::parallel);

/// Fraction of correctly predicted items.
double accuracy(const Network& net, const Dataset& data, Execution exec = Execution::parallel);

}  // namespace dfal
