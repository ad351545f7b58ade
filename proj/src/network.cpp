#include "lrc/network.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lrc/errors.hpp"

namespace lrc {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

class ByteReader {
public:
    ByteReader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
    std::uint64_t u64() { return raw(8); }

    double f64() {
        std::uint64_t bits = raw(8);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    void expect_magic() {
        if (bytes_.size() < 8 || std::memcmp(bytes_.data(), kMagic, 8) != 0) {
            throw DataError("checkpoint " + path_ + ": bad magic");
        }
        pos_ = 8;
    }

    void expect_end() const {
        if (pos_ != bytes_.size()) {
            throw DataError("checkpoint " + path_ + ": " + std::to_string(bytes_.size() - pos_) +
                            " trailing bytes");
        }
    }

private:
    std::uint64_t raw(int n) {
        if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) {
            throw DataError("checkpoint " + path_ + ": truncated");
        }
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const std::string& bytes_;
    std::string path_;
    std::size_t pos_{0};
};

}  // namespace

void MlpConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("MlpConfig: input_dim must be >= 1");
    if (classes < 2) throw std::invalid_argument("MlpConfig: need at least 2 classes, got " +
                                                 std::to_string(classes));
    for (std::size_t w : hidden) {
        if (w < 1) throw std::invalid_argument("MlpConfig: hidden widths must be >= 1");
    }
}

std::vector<std::pair<std::size_t, std::size_t>> MlpConfig::layer_dims() const {
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    std::size_t in = input_dim;
    for (std::size_t w : hidden) {
        dims.emplace_back(in, w);
        in = w;
    }
    dims.emplace_back(in, classes);
    return dims;
}

std::size_t MlpConfig::param_count() const {
    std::size_t n = 0;
    for (const auto& [fan_in, fan_out] : layer_dims()) n += fan_in * fan_out + fan_out;
    return n;
}

Network init_network(const MlpConfig& config, Prng& p) {
    config.validate();
    Tensor w = Tensor::zeros({config.param_count()});
    std::size_t offset = 0;
    for (const auto& [fan_in, fan_out] : config.layer_dims()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
            w.data[offset + i] = (2.0 * p.next_unit() - 1.0) * limit;
        }
        offset += fan_in * fan_out + fan_out;  // biases stay zero
    }
    return Network{config, std::move(w)};
}

BallSample sample_ball(const Tensor& center, double radius, std::size_t count, Prng& p) {
    if (!(radius > 0.0)) {
        throw std::invalid_argument("sample_ball: radius must be > 0, got " + std::to_string(radius));
    }
    if (count < 1) throw std::invalid_argument("sample_ball: count must be >= 1");
    if (center.rank() != 1 || center.numel() == 0) {
        throw std::invalid_argument("sample_ball: center must be a non-empty flat vector, got " +
                                    shape_str(center.shape));
    }
    const std::size_t dim = center.numel();
    BallSample out;
    out.center = center;
    out.radius = radius;
    out.offsets.reserve(count);
    out.offsets.push_back(Tensor::zeros({dim}));
    for (std::size_t s = 1; s < count; ++s) {
        Tensor dir = Tensor::zeros({dim});
        double norm_sq = 0.0;
        do {
            for (std::size_t i = 0; i < dim; ++i) {
                dir.data[i] = p.next_gaussian();
                norm_sq += dir.data[i] * dir.data[i];
            }
        } while (norm_sq == 0.0);
        const double scale =
            radius * std::pow(p.next_unit(), 1.0 / static_cast<double>(dim)) / std::sqrt(norm_sq);
        for (double& v : dir.data) v *= scale;
        out.offsets.push_back(std::move(dir));
    }
    return out;
}

double l2_norm(const Tensor& v) {
    double acc = 0.0;
    for (double x : v.data) acc += x * x;
    return std::sqrt(acc);
}

void save_checkpoint(const std::string& path, const Network& net) {
    net.config.validate();
    if (net.w.numel() != net.config.param_count()) {
        throw std::invalid_argument("save_checkpoint: parameter length " + std::to_string(net.w.numel()) +
                                    " does not match config (" + std::to_string(net.config.param_count()) +
                                    ")");
    }
    std::string bytes;
    bytes.append(kMagic, 8);
    put_u32(bytes, kVersion);
    put_u32(bytes, 0);  // reserved
    put_u32(bytes, static_cast<std::uint32_t>(net.config.input_dim));
    put_u32(bytes, static_cast<std::uint32_t>(net.config.classes));
    put_u32(bytes, static_cast<std::uint32_t>(net.config.hidden.size()));
    for (std::size_t w : net.config.hidden) put_u32(bytes, static_cast<std::uint32_t>(w));
    put_u64(bytes, net.w.numel());
    for (double v : net.w.data) put_f64(bytes, v);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("checkpoint " + path + ": cannot open for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("checkpoint " + path + ": write failed");
}

Network load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint " + path + ": cannot open");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    ByteReader r(bytes, path);
    r.expect_magic();
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw DataError("checkpoint " + path + ": unsupported version " + std::to_string(version));
    }
    r.u32();  // reserved

    Network net;
    net.config.input_dim = r.u32();
    net.config.classes = r.u32();
    const std::uint32_t hidden_count = r.u32();
    net.config.hidden.resize(hidden_count);
    for (std::uint32_t i = 0; i < hidden_count; ++i) net.config.hidden[i] = r.u32();
    try {
        net.config.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError("checkpoint " + path + ": " + e.what());
    }

    const std::uint64_t n = r.u64();
    if (n != net.config.param_count()) {
        throw DataError("checkpoint " + path + ": parameter count " + std::to_string(n) +
                        " does not match config (" + std::to_string(net.config.param_count()) + ")");
    }
    net.w = Tensor::zeros({static_cast<std::size_t>(n)});
    for (std::uint64_t i = 0; i < n; ++i) net.w.data[i] = r.f64();
    r.expect_end();
    return net;
}

}  // namespace lrc
