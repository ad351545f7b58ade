#pragma once

// Synthetic dataset generators, CSV round-trip, the CIFAR-10 binary
// reader, and deterministic splitting. Generators are pure functions
// of their arguments and the PRNG state; loaders are pure functions of
// file bytes.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "lrc/rng.hpp"
#include "lrc/tensor.hpp"

namespace lrc {

struct Dataset {
    Tensor inputs;            // n x d
    std::vector<int> labels;  // n entries in [0, classes)
    std::size_t classes{0};
    std::string name;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return inputs.rank() == 2 ? inputs.cols() : 0; }

    void validate() const;
};

// Gaussian blobs around fixed unit-norm class centers: coordinate axes
// when d >= c (simplex vertices), otherwise evenly spaced directions
// on the unit circle (d = 2) or the line (d = 1). Low spread makes the
// classes linearly separable.
Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t d, double spread, Prng& p);

// Two interleaved spirals in the plane: radius 0.1 + 0.9 t, angle
// 3 pi t for t in [0, 1), class 1 the point reflection of class 0,
// plus isotropic Gaussian noise.
Dataset gen_two_spirals(std::size_t per_class, double noise, Prng& p);

// Rows of d floats followed by one integer label, comma separated, no
// header. d is inferred from the first row.
Dataset load_csv(const std::string& path, std::size_t classes);

// Writes floats with 17 significant digits so a reload reproduces the
// values exactly.
void write_csv(const std::string& path, const Dataset& ds);

// Concatenated 3073-byte records: a label byte in [0, 9] then 3072
// pixel bytes (R, G, B planes of a 32x32 image, row-major). Pixels are
// scaled to [0, 1]; standardize subtracts the per-channel mean and
// divides by the per-channel standard deviation over the loaded set.
Dataset load_cifar10_binary(const std::vector<std::string>& paths, bool standardize = false);

// Seed-determined permutation cut into contiguous train/val/test
// slices. Fractions must be positive with sum <= 1; when they sum to
// 1 the slices partition the dataset exactly.
std::array<Dataset, 3> split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                             Prng& p);

// Rows of ds at the given positions, in order.
Dataset select(const Dataset& ds, const std::vector<std::size_t>& idx);

}  // namespace lrc
