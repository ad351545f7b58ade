#include "lrc/data.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "lrc/errors.hpp"

namespace lrc {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(const std::string& field, const std::string& where) {
    if (field.empty()) throw DataError(where + ": empty field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v)) {
        throw DataError(where + ": not a finite number: '" + field + "'");
    }
    return v;
}

long parse_label(const std::string& field, const std::string& where) {
    if (field.empty()) throw DataError(where + ": empty label field");
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(field.c_str(), &end, 10);
    if (end != field.c_str() + field.size() || errno == ERANGE) {
        throw DataError(where + ": not an integer label: '" + field + "'");
    }
    return v;
}

// Near-integer products (10 * 0.8, 600 * 0.1) count as exact despite
// binary rounding; everything else floors.
std::size_t slice_count(std::size_t n, double frac) {
    const double v = static_cast<double>(n) * frac;
    const double r = std::round(v);
    return static_cast<std::size_t>(std::abs(v - r) < 1e-7 ? r : std::floor(v));
}

}  // namespace

void Dataset::validate() const {
    if (inputs.rank() != 2) {
        throw std::invalid_argument("Dataset: inputs must be a matrix, got " + shape_str(inputs.shape));
    }
    if (labels.size() != inputs.rows()) {
        throw std::invalid_argument("Dataset: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(inputs.rows()) + " rows");
    }
    if (classes < 2) throw std::invalid_argument("Dataset: need at least 2 classes");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw std::invalid_argument("Dataset: label " + std::to_string(labels[i]) +
                                        " out of range at row " + std::to_string(i));
        }
    }
}

Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t d, double spread, Prng& p) {
    if (classes < 2) throw std::invalid_argument("gen_blobs: need at least 2 classes");
    if (per_class < 1) throw std::invalid_argument("gen_blobs: per_class must be >= 1");
    if (d < 1) throw std::invalid_argument("gen_blobs: d must be >= 1");
    if (!(spread >= 0.0)) throw std::invalid_argument("gen_blobs: spread must be >= 0");

    std::vector<Tensor> centers;
    centers.reserve(classes);
    for (std::size_t k = 0; k < classes; ++k) {
        Tensor ctr = Tensor::zeros({d});
        if (d >= classes) {
            ctr.data[k] = 1.0;
        } else if (d >= 2) {
            const double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(k) /
                                 static_cast<double>(classes);
            ctr.data[0] = std::cos(angle);
            ctr.data[1] = std::sin(angle);
        } else {
            ctr.data[0] = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(classes - 1);
        }
        centers.push_back(std::move(ctr));
    }

    const std::size_t n = classes * per_class;
    Dataset ds;
    ds.inputs = Tensor::zeros({n, d});
    ds.labels.reserve(n);
    ds.classes = classes;
    ds.name = "blobs:" + std::to_string(classes) + "x" + std::to_string(per_class);
    std::size_t row = 0;
    for (std::size_t k = 0; k < classes; ++k) {
        for (std::size_t i = 0; i < per_class; ++i, ++row) {
            for (std::size_t j = 0; j < d; ++j) {
                ds.inputs.at(row, j) = centers[k].data[j] + spread * p.next_gaussian();
            }
            ds.labels.push_back(static_cast<int>(k));
        }
    }
    return ds;
}

Dataset gen_two_spirals(std::size_t per_class, double noise, Prng& p) {
    if (per_class < 1) throw std::invalid_argument("gen_two_spirals: per_class must be >= 1");
    if (!(noise >= 0.0)) throw std::invalid_argument("gen_two_spirals: noise must be >= 0");

    const std::size_t n = 2 * per_class;
    Dataset ds;
    ds.inputs = Tensor::zeros({n, 2});
    ds.labels.reserve(n);
    ds.classes = 2;
    ds.name = "spirals:" + std::to_string(per_class);
    std::size_t row = 0;
    for (int cls = 0; cls < 2; ++cls) {
        const double flip = cls == 0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < per_class; ++i, ++row) {
            const double t = static_cast<double>(i) / static_cast<double>(per_class);
            const double angle = 3.0 * 3.14159265358979323846 * t;
            const double radius = 0.1 + 0.9 * t;
            ds.inputs.at(row, 0) = flip * radius * std::cos(angle) + noise * p.next_gaussian();
            ds.inputs.at(row, 1) = flip * radius * std::sin(angle) + noise * p.next_gaussian();
            ds.labels.push_back(cls);
        }
    }
    return ds;
}

Dataset load_csv(const std::string& path, std::size_t classes) {
    if (classes < 2) throw std::invalid_argument("load_csv: need at least 2 classes");
    std::ifstream f(path);
    if (!f) throw DataError("csv " + path + ": cannot open");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t d = 0;
    std::size_t lineno = 0;
    std::string line;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = "csv " + path + " line " + std::to_string(lineno);
        const std::vector<std::string> fields = split_fields(line);
        if (d == 0) {
            if (fields.size() < 2) {
                throw DataError(where + ": expected at least one feature and a label");
            }
            d = fields.size() - 1;
        } else if (fields.size() != d + 1) {
            throw DataError(where + ": expected " + std::to_string(d + 1) + " fields, got " +
                            std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[j], where));
        const long label = parse_label(fields[d], where);
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw DataError(where + ": label " + std::to_string(label) + " out of range [0, " +
                            std::to_string(classes) + ")");
        }
        labels.push_back(static_cast<int>(label));
    }
    if (labels.empty()) throw DataError("csv " + path + ": no data rows");

    Dataset ds;
    ds.inputs = Tensor({labels.size(), d}, std::move(values));
    ds.labels = std::move(labels);
    ds.classes = classes;
    ds.name = "csv:" + path;
    return ds;
}

void write_csv(const std::string& path, const Dataset& ds) {
    ds.validate();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("csv " + path + ": cannot open for writing");
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::string line;
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.inputs.at(i, j));
            line += buf;
            line += ',';
        }
        line += std::to_string(ds.labels[i]);
        line += '\n';
        f << line;
    }
    if (!f) throw DataError("csv " + path + ": write failed");
}

Dataset load_cifar10_binary(const std::vector<std::string>& paths, bool standardize) {
    if (paths.empty()) throw std::invalid_argument("load_cifar10_binary: no paths given");
    constexpr std::size_t kRecord = 3073;
    constexpr std::size_t kPixels = 3072;

    std::vector<double> values;
    std::vector<int> labels;
    for (const std::string& path : paths) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw DataError("cifar10 " + path + ": cannot open");
        std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        if (bytes.empty() || bytes.size() % kRecord != 0) {
            throw DataError("cifar10 " + path + ": length " + std::to_string(bytes.size()) +
                            " is not a positive multiple of " + std::to_string(kRecord));
        }
        const std::size_t records = bytes.size() / kRecord;
        for (std::size_t rec = 0; rec < records; ++rec) {
            const unsigned char* base =
                reinterpret_cast<const unsigned char*>(bytes.data()) + rec * kRecord;
            if (base[0] > 9) {
                throw DataError("cifar10 " + path + ": record " + std::to_string(rec) +
                                " has label byte " + std::to_string(base[0]));
            }
            labels.push_back(static_cast<int>(base[0]));
            for (std::size_t i = 0; i < kPixels; ++i) {
                values.push_back(static_cast<double>(base[1 + i]) / 255.0);
            }
        }
    }

    Dataset ds;
    ds.inputs = Tensor({labels.size(), kPixels}, std::move(values));
    ds.labels = std::move(labels);
    ds.classes = 10;
    ds.name = "cifar10";

    if (standardize) {
        constexpr std::size_t kPlane = 1024;
        for (std::size_t ch = 0; ch < 3; ++ch) {
            double sum = 0.0;
            double sum_sq = 0.0;
            const std::size_t count = ds.size() * kPlane;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                for (std::size_t j = ch * kPlane; j < (ch + 1) * kPlane; ++j) {
                    const double v = ds.inputs.at(i, j);
                    sum += v;
                    sum_sq += v * v;
                }
            }
            const double mean = sum / static_cast<double>(count);
            const double var = std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
            const double stddev = var > 0.0 ? std::sqrt(var) : 1.0;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                for (std::size_t j = ch * kPlane; j < (ch + 1) * kPlane; ++j) {
                    ds.inputs.at(i, j) = (ds.inputs.at(i, j) - mean) / stddev;
                }
            }
        }
    }
    return ds;
}

std::array<Dataset, 3> split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                             Prng& p) {
    ds.validate();
    if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(test_frac > 0.0)) {
        throw std::invalid_argument("split: all fractions must be positive");
    }
    const double total = train_frac + val_frac + test_frac;
    if (total > 1.0 + 1e-12) {
        throw std::invalid_argument("split: fractions sum to " + std::to_string(total) + " > 1");
    }

    const std::size_t n = ds.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(p.next_u64() % (i + 1));
        std::swap(perm[i], perm[j]);
    }

    const std::size_t n_train = slice_count(n, train_frac);
    const std::size_t n_val = slice_count(n, val_frac);
    const std::size_t n_test = std::abs(total - 1.0) < 1e-9
                                   ? n - n_train - n_val
                                   : slice_count(n, test_frac);
    if (n_train + n_val + n_test > n || n_train == 0 || n_val == 0 || n_test == 0) {
        throw std::invalid_argument("split: fractions leave an empty or oversized slice for n = " +
                                    std::to_string(n));
    }

    auto slice = [&](std::size_t begin, std::size_t count, const char* tag) {
        std::vector<std::size_t> idx(perm.begin() + begin, perm.begin() + begin + count);
        Dataset part = select(ds, idx);
        part.name = ds.name + ":" + tag;
        return part;
    };
    return {slice(0, n_train, "train"), slice(n_train, n_val, "val"),
            slice(n_train + n_val, n_test, "test")};
}

Dataset select(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.inputs = Tensor::zeros({idx.size(), ds.dim()});
    out.labels.reserve(idx.size());
    out.classes = ds.classes;
    out.name = ds.name;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= ds.size()) {
            throw std::invalid_argument("select: index " + std::to_string(idx[i]) + " out of range");
        }
        for (std::size_t j = 0; j < ds.dim(); ++j) out.inputs.at(i, j) = ds.inputs.at(idx[i], j);
        out.labels.push_back(ds.labels[idx[i]]);
    }
    return out;
}

}  // namespace lrc
