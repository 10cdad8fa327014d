#include "redmotion/nn/parameters.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace redmotion::nn {

namespace {

constexpr char kMagic[4] = {'R', 'M', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint8_t kDtypeFloat64 = 2;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <class T>
void write_pod(std::ostream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const char* what)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

void write_string(std::ostream& out, const std::string& s)
{
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const char* what)
{
    const auto n = read_pod<std::uint32_t>(in, what);
    if (n > (1u << 20)) throw std::runtime_error(std::string("checkpoint: implausible length for ") + what);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
    return s;
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t hash)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        hash ^= p[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string hex_digest(std::uint64_t value)
{
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << value;
    return out.str();
}

ParamId ParameterStore::add(const std::string& name, std::size_t rows, std::size_t cols, Init init)
{
    if (index_.contains(name)) throw std::invalid_argument("parameter store: duplicate name '" + name + "'");
    if (rows == 0 || cols == 0) throw std::invalid_argument("parameter store: empty shape for '" + name + "'");

    Tensor t(rows, cols);
    std::mt19937_64 rng(splitmix64(seed_ ^ fnv1a(name.data(), name.size())));
    switch (init) {
    case Init::zeros:
        break;
    case Init::ones:
        std::fill(t.data.begin(), t.data.end(), 1.0);
        break;
    case Init::variance_scaled: {
        const double limit = std::sqrt(3.0 / static_cast<double>(rows));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& v : t.data) v = dist(rng);
        break;
    }
    case Init::normal_small: {
        std::normal_distribution<double> dist(0.0, 0.02);
        for (double& v : t.data) v = dist(rng);
        break;
    }
    }

    const std::size_t index = values_.size();
    names_.push_back(name);
    values_.push_back(std::move(t));
    index_.emplace(name, index);
    return ParamId{index};
}

std::optional<ParamId> ParameterStore::find(const std::string& name) const
{
    if (auto it = index_.find(name); it != index_.end()) return ParamId{it->second};
    return std::nullopt;
}

ParamId ParameterStore::at(const std::string& name) const
{
    if (auto id = find(name)) return *id;
    throw std::out_of_range("parameter store: no parameter named '" + name + "'");
}

std::size_t ParameterStore::element_count() const noexcept
{
    std::size_t n = 0;
    for (const auto& t : values_) n += t.size();
    return n;
}

std::uint64_t ParameterStore::digest() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        h = fnv1a(names_[i].data(), names_[i].size(), h);
        const std::uint64_t shape[2] = {values_[i].rows, values_[i].cols};
        h = fnv1a(shape, sizeof(shape), h);
        h = fnv1a(values_[i].data.data(), values_[i].data.size() * sizeof(double), h);
    }
    return h;
}

const NamedTensor* Checkpoint::find(const std::string& name) const
{
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

Checkpoint snapshot(const ParameterStore& store, std::string config_digest)
{
    Checkpoint c;
    c.config_digest = std::move(config_digest);
    c.tensors.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        c.tensors.push_back({store.name(ParamId{i}), store.value(ParamId{i})});
    }
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "' for writing");
    out.write(kMagic, 4);
    write_pod(out, kFormatVersion);
    write_string(out, checkpoint.config_digest);
    write_pod<std::uint64_t>(out, checkpoint.tensors.size());
    for (const auto& t : checkpoint.tensors) {
        write_string(out, t.name);
        write_pod(out, kDtypeFloat64);
        write_pod<std::uint8_t>(out, 2);
        write_pod<std::uint64_t>(out, t.value.rows);
        write_pod<std::uint64_t>(out, t.value.cols);
        out.write(reinterpret_cast<const char*>(t.value.data.data()),
                  static_cast<std::streamsize>(t.value.data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic in '" + path.string() + "'");
    if (auto v = read_pod<std::uint32_t>(in, "version"); v != kFormatVersion) {
        throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(v));
    }
    Checkpoint c;
    c.config_digest = read_string(in, "config digest");
    const auto count = read_pod<std::uint64_t>(in, "tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = read_string(in, "tensor name");
        if (auto dtype = read_pod<std::uint8_t>(in, "dtype"); dtype != kDtypeFloat64) {
            throw std::runtime_error("checkpoint: unsupported dtype for '" + t.name + "'");
        }
        if (auto rank = read_pod<std::uint8_t>(in, "rank"); rank != 2) {
            throw std::runtime_error("checkpoint: unsupported rank for '" + t.name + "'");
        }
        const auto rows = read_pod<std::uint64_t>(in, "rows");
        const auto cols = read_pod<std::uint64_t>(in, "cols");
        t.value = Tensor(rows, cols);
        in.read(reinterpret_cast<char*>(t.value.data.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated data for '" + t.name + "'");
        c.tensors.push_back(std::move(t));
    }
    return c;
}

LoadSummary load_into(ParameterStore& store, const Checkpoint& checkpoint, bool strict)
{
    LoadSummary summary;
    for (const auto& t : checkpoint.tensors) {
        auto id = store.find(t.name);
        if (!id) {
            summary.unused.push_back(t.name);
            continue;
        }
        Tensor& dst = store.value(*id);
        if (!dst.same_shape(t.value)) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + t.name + "': store " + dst.shape_string() +
                                     ", checkpoint " + t.value.shape_string());
        }
        dst = t.value;
        summary.loaded.push_back(t.name);
    }
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (checkpoint.find(store.name(ParamId{i})) == nullptr) summary.missing.push_back(store.name(ParamId{i}));
    }
    if (strict && (!summary.missing.empty() || !summary.unused.empty())) {
        throw std::runtime_error("checkpoint: strict load failed (" + std::to_string(summary.missing.size()) +
                                 " missing, " + std::to_string(summary.unused.size()) + " unused)");
    }
    return summary;
}

}  // namespace redmotion::nn
