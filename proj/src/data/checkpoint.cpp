#include "ivanet/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "ivanet/dataset.hpp"

namespace ivanet {

namespace {

constexpr char kMagic[8] = {'I', 'V', 'N', 'T', '0', '0', '0', '1'};

template <class T>
void put(std::string& out, T value) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    template <class T>
    T get(const char* what) {
        require(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string get_bytes(std::size_t n, const char* what) {
        require(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, pos_, what); }

private:
    void require(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
    }

    const std::string& bytes_;
    const std::string& source_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
        const auto data = t.data();
        out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
    }
    put<std::uint64_t>(out, ckpt.step);
    put<std::uint64_t>(out, ckpt.config.size());
    out += ckpt.config;
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source) {
    Reader r(bytes, source);
    if (r.get_bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
        throw ParseError(source, 0, "bad magic, not an IVNT0001 checkpoint");
    }
    Checkpoint ckpt;
    const auto count = r.get<std::uint64_t>("tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint32_t>("name length");
        std::string name = r.get_bytes(name_len, "tensor name");
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank == 0 || rank > 8) r.fail("implausible tensor rank " + std::to_string(rank));
        Shape shape;
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto dim = r.get<std::uint64_t>("dimension");
            if (dim == 0 || dim > (std::uint64_t{1} << 32)) r.fail("implausible dimension " + std::to_string(dim));
            shape.push_back(static_cast<std::size_t>(dim));
            numel *= static_cast<std::size_t>(dim);
            if (numel > (std::size_t{1} << 34)) r.fail("tensor too large");
        }
        const std::string raw = r.get_bytes(numel * sizeof(double), "tensor payload");
        std::vector<double> values(numel);
        std::memcpy(values.data(), raw.data(), raw.size());
        if (!ckpt.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values))).second) {
            r.fail("duplicate tensor name");
        }
    }
    ckpt.step = r.get<std::uint64_t>("step");
    const auto cfg_len = r.get<std::uint64_t>("config length");
    ckpt.config = r.get_bytes(static_cast<std::size_t>(cfg_len), "config text");
    if (!r.done()) r.fail("trailing bytes after checkpoint");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path), path.string());
}

}  // namespace ivanet
