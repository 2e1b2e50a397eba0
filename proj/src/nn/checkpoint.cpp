#include "ctwin/nn/checkpoint.hpp"

#include "ctwin/io_util.hpp"

namespace ctwin::nn {

namespace {

constexpr char kMagic[5] = "CTWM";
constexpr std::uint32_t kVersion = 1;

void write_tensor(std::ostream &os, const Tensor &t) {
    io::write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape)
        io::write_u64(os, d);
    for (double v : t.data)
        io::write_f64(os, v);
}

Tensor read_tensor(std::istream &is) {
    const std::uint32_t rank = io::read_u32(is);
    if (rank > 8)
        throw numeric_error("checkpoint: implausible tensor rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto &d : shape) {
        d = io::read_u64(is);
        n *= d;
    }
    if (rank == 0)
        n = 0;
    std::vector<double> data(n);
    for (auto &v : data)
        v = io::read_f64(is);
    if (rank == 0)
        return Tensor{};
    return Tensor(shape, std::move(data));
}

} // namespace

void save_checkpoint(const std::string &path, const ModelParams &params, const TrainProvenance &prov) {
    io::AtomicFileWriter writer(path);
    std::ostream &os = writer.stream();
    io::write_magic(os, kMagic);
    io::write_u32(os, kVersion);
    io::write_u32(os, static_cast<std::uint32_t>(params.layer_count()));
    for (const Layer &ly : params.layers) {
        io::write_u8(os, static_cast<std::uint8_t>(ly.spec.kind));
        io::write_u32(os, static_cast<std::uint32_t>(ly.spec.kernel_count));
        io::write_u32(os, static_cast<std::uint32_t>(ly.spec.kernel_size));
        io::write_u32(os, static_cast<std::uint32_t>(ly.spec.stride));
        io::write_u32(os, static_cast<std::uint32_t>(ly.spec.output_width));
        write_tensor(os, ly.weights);
        write_tensor(os, ly.bias);
        write_tensor(os, ly.running_mean);
        write_tensor(os, ly.running_var);
    }
    io::write_u64(os, prov.dataset_seed);
    io::write_f64(os, prov.split);
    io::write_u64(os, prov.realizations);
    writer.commit();
}

ModelParams load_checkpoint(const std::string &path, TrainProvenance *prov) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw numeric_error("cannot open checkpoint: " + path);
    io::expect_magic(is, kMagic, "checkpoint " + path);
    const std::uint32_t version = io::read_u32(is);
    if (version != kVersion)
        throw numeric_error("checkpoint " + path + ": unsupported version " + std::to_string(version));
    const std::uint32_t layer_count = io::read_u32(is);
    ModelParams params;
    params.layers.reserve(layer_count);
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        Layer ly;
        const std::uint8_t kind = io::read_u8(is);
        if (kind > static_cast<std::uint8_t>(LayerKind::dense))
            throw numeric_error("checkpoint " + path + ": unknown layer kind tag " + std::to_string(kind));
        ly.spec.kind = static_cast<LayerKind>(kind);
        ly.spec.kernel_count = io::read_u32(is);
        ly.spec.kernel_size = io::read_u32(is);
        ly.spec.stride = io::read_u32(is);
        ly.spec.output_width = io::read_u32(is);
        ly.weights = read_tensor(is);
        ly.bias = read_tensor(is);
        ly.running_mean = read_tensor(is);
        ly.running_var = read_tensor(is);
        params.layers.push_back(std::move(ly));
    }
    TrainProvenance p;
    p.dataset_seed = io::read_u64(is);
    p.split = io::read_f64(is);
    p.realizations = io::read_u64(is);
    if (prov)
        *prov = p;
    return params;
}

} // namespace ctwin::nn
