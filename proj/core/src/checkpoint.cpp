#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "nofis/errors.hpp"
#include "nofis/flow.hpp"

namespace nofis {

namespace {

constexpr char kMagicPrefix[] = "NOFIS";
constexpr char kVersion = '1';

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw FormatError("checkpoint truncated");
    return v;
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw FormatError("checkpoint truncated");
}

void write_net(std::ostream& out, const DenseNet& net) {
    write_u32(out, static_cast<std::uint32_t>(net.sizes.size()));
    for (int s : net.sizes) write_u32(out, static_cast<std::uint32_t>(s));
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        // Row-major on disk; Eigen matrices are column-major in memory.
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w =
            net.weights[i];
        write_doubles(out, w.data(), static_cast<std::size_t>(w.size()));
        write_doubles(out, net.biases[i].data(), static_cast<std::size_t>(net.biases[i].size()));
    }
}

DenseNet read_net(std::istream& in) {
    const std::uint32_t depth = read_u32(in);
    if (depth < 2 || depth > 64) throw FormatError("checkpoint: implausible net depth");
    std::vector<int> sizes(depth);
    for (auto& s : sizes) {
        const std::uint32_t v = read_u32(in);
        if (v > (1u << 20)) throw FormatError("checkpoint: implausible layer width");
        s = static_cast<int>(v);
    }
    DenseNet net = make_zero_net(sizes);
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(
            net.weights[i].rows(), net.weights[i].cols());
        read_doubles(in, w.data(), static_cast<std::size_t>(w.size()));
        net.weights[i] = w;
        read_doubles(in, net.biases[i].data(), static_cast<std::size_t>(net.biases[i].size()));
    }
    return net;
}

}  // namespace

void checkpoint_save(const FlowModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint_save: cannot open " + path);
    out.write(kMagicPrefix, 5);
    out.put(kVersion);
    write_u32(out, static_cast<std::uint32_t>(model.dim));
    write_u32(out, static_cast<std::uint32_t>(model.layer_count()));
    for (const CouplingLayer& layer : model.layers) {
        write_net(out, layer.scale_net);
        write_net(out, layer.translate_net);
    }
    if (!out) throw FormatError("checkpoint_save: write failed for " + path);
}

FlowModel checkpoint_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint_load: cannot open " + path);
    char magic[6] = {};
    in.read(magic, 6);
    if (!in || std::string(magic, 5) != kMagicPrefix) {
        throw FormatError("checkpoint_load: bad magic in " + path);
    }
    if (magic[5] != kVersion) {
        throw UnsupportedVersionError("checkpoint_load: unsupported format version '" +
                                      std::string(1, magic[5]) + "' in " + path);
    }
    const std::uint32_t dim = read_u32(in);
    const std::uint32_t layer_count = read_u32(in);
    if (dim < 1 || dim > (1u << 20)) throw FormatError("checkpoint: implausible dimension");
    if (layer_count > (1u << 16)) throw FormatError("checkpoint: implausible layer count");

    FlowModel model;
    model.dim = static_cast<int>(dim);
    model.layers.reserve(layer_count);
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        CouplingLayer layer;
        layer.dim = model.dim;
        layer.keep_first = (i % 2 == 0);
        layer.scale_net = read_net(in);
        layer.translate_net = read_net(in);
        if (layer.scale_net.input_size() != layer.pass_size() ||
            layer.scale_net.output_size() != std::max(layer.changed_size(), 1) ||
            layer.translate_net.sizes != layer.scale_net.sizes) {
            throw FormatError("checkpoint: subnet shapes do not match layer " + std::to_string(i));
        }
        model.layers.push_back(std::move(layer));
    }
    // Reject trailing garbage so truncation errors cannot hide behind it.
    in.peek();
    if (!in.eof()) throw FormatError("checkpoint: trailing bytes in " + path);
    return model;
}

}  // namespace nofis
